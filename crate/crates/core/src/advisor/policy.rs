//! Decision policies and the registry that builds them by name.
//!
//! A policy spec is `name` or `name:argument`, for example `rule`,
//! `replay:runs/a/conversation.jsonl` or `remote`.

use std::collections::BTreeMap;
use std::time::Instant;

use thiserror::Error;

use super::{ActionName, Decision, ParseError, PromptConfig, QueryRecord};
use crate::llm_client::{ClientConfig, ClientError};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown policy `{name}` (available: {available})")]
    Unknown { name: String, available: String },
    #[error("bad policy argument: {0}")]
    BadArgument(String),
    #[error("transport failure: {0}")]
    Transport(#[from] ClientError),
    #[error("unparseable reply: {0}")]
    Parse(#[from] ParseError),
    #[error("replay transcript exhausted after {0} decisions")]
    ReplayExhausted(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("policy worker stopped")]
    Disconnected,
}

/// One completed query/answer pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub query: QueryRecord,
    pub decision: Decision,
}

/// Everything a factory may need to build a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyContext {
    pub prompt: PromptConfig,
    pub client: ClientConfig,
    /// Rough token budget for the remote conversation history.
    pub history_budget_tokens: usize,
}

impl Default for PolicyContext {
    fn default() -> Self {
        Self { prompt: PromptConfig::default(), client: ClientConfig::default(), history_budget_tokens: 6000 }
    }
}

impl PolicyContext {
    pub fn valid_actions(&self) -> Vec<ActionName> {
        self.prompt.available_actions()
    }
}

pub trait DecisionPolicy: Send {
    fn name(&self) -> &str;

    /// Answers `query` given the earlier exchanges, oldest first.
    fn decide(&mut self, query: &QueryRecord, history: &[Exchange]) -> Result<Decision, PolicyError>;

    /// Policies that block on the network run off the control loop.
    fn is_remote(&self) -> bool {
        false
    }
}

pub trait PolicyFactory: Send + Sync {
    fn describe(&self) -> &str;
    fn create(&self, arg: Option<&str>, ctx: &PolicyContext) -> Result<Box<dyn DecisionPolicy>, PolicyError>;
}

impl<F> PolicyFactory for (&'static str, F)
where
    F: Fn(Option<&str>, &PolicyContext) -> Result<Box<dyn DecisionPolicy>, PolicyError> + Send + Sync,
{
    fn describe(&self) -> &str {
        self.0
    }

    fn create(&self, arg: Option<&str>, ctx: &PolicyContext) -> Result<Box<dyn DecisionPolicy>, PolicyError> {
        (self.1)(arg, ctx)
    }
}

#[derive(Default)]
pub struct PolicyRegistry {
    factories: BTreeMap<String, Box<dyn PolicyFactory>>,
}

impl std::fmt::Debug for PolicyRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PolicyRegistry").field("names", &self.names()).finish()
    }
}

impl PolicyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with `rule`, `replay`, `remote` and `noop`.
    pub fn with_builtin() -> Self {
        let mut reg = Self::new();
        reg.register(
            "rule",
            Box::new(("deterministic code-to-action mapping", |_: Option<&str>, ctx: &PolicyContext| {
                Ok(Box::new(super::RulePolicy::new(ctx.prompt.include_tuning_apis)) as Box<dyn DecisionPolicy>)
            })),
        );
        reg.register(
            "replay",
            Box::new((
                "replays responses from a conversation record (replay:<file>)",
                |arg: Option<&str>, ctx: &PolicyContext| {
                    let path =
                        arg.ok_or_else(|| PolicyError::BadArgument("replay needs a file: replay:<path>".into()))?;
                    Ok(Box::new(super::ReplayPolicy::from_file(path, ctx.valid_actions())?) as Box<dyn DecisionPolicy>)
                },
            )),
        );
        reg.register(
            "remote",
            Box::new(("chat-completion endpoint", |_: Option<&str>, ctx: &PolicyContext| {
                Ok(Box::new(super::RemotePolicy::from_context(ctx)?) as Box<dyn DecisionPolicy>)
            })),
        );
        reg.register(
            "noop",
            Box::new(("always answers do_nothing (baseline)", |_: Option<&str>, _: &PolicyContext| {
                Ok(Box::new(NoopPolicy) as Box<dyn DecisionPolicy>)
            })),
        );
        reg
    }

    pub fn register(&mut self, name: &str, factory: Box<dyn PolicyFactory>) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn describe(&self) -> Vec<(&str, &str)> {
        self.factories.iter().map(|(k, f)| (k.as_str(), f.describe())).collect()
    }

    pub fn create(&self, spec: &str, ctx: &PolicyContext) -> Result<Box<dyn DecisionPolicy>, PolicyError> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| PolicyError::Unknown { name: name.to_string(), available: self.names().join(", ") })?;
        factory.create(arg, ctx)
    }
}

/// Baseline policy that never intervenes.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoopPolicy;

impl DecisionPolicy for NoopPolicy {
    fn name(&self) -> &str {
        "noop"
    }

    fn decide(&mut self, _query: &QueryRecord, _history: &[Exchange]) -> Result<Decision, PolicyError> {
        let raw = super::render_response(&[ActionName::DoNothing], "no_action", "baseline policy");
        Ok(Decision {
            explanation: "baseline policy".into(),
            short_label: Some("no_action".into()),
            ..Decision::do_nothing(raw)
        })
    }
}

/// Owns a policy and the conversation history it is shown.
pub struct PolicyDriver {
    policy: Box<dyn DecisionPolicy>,
    history: Vec<Exchange>,
}

impl PolicyDriver {
    pub fn new(policy: Box<dyn DecisionPolicy>) -> Self {
        Self { policy, history: Vec::new() }
    }

    pub fn policy_name(&self) -> &str {
        self.policy.name()
    }

    pub fn is_remote(&self) -> bool {
        self.policy.is_remote()
    }

    pub fn history(&self) -> &[Exchange] {
        &self.history
    }

    /// Queries the policy and records the exchange on success. `latency` is
    /// filled with the wall-clock time of the call.
    pub fn query(&mut self, query: QueryRecord) -> Result<Decision, PolicyError> {
        let started = Instant::now();
        let mut decision = self.policy.decide(&query, &self.history)?;
        decision.latency = started.elapsed().as_secs_f64();
        self.history.push(Exchange { query, decision: decision.clone() });
        Ok(decision)
    }
}
