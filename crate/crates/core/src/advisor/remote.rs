//! Decision policy backed by a chat-completion endpoint.

use super::policy::{DecisionPolicy, Exchange, PolicyContext, PolicyError};
use super::{build_initial_prompt, parse_decision, ActionName, Decision, QueryRecord};
use crate::llm_client::{ChatMessage, LlmClient};

/// Crude token estimate used for history eviction.
pub fn approx_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Builds `[prompt, q1, a1, ..., qn, an, query]`, dropping the oldest
/// question/answer pairs until the estimate fits `budget_tokens`. The
/// initial prompt and the current query are always kept.
pub fn build_messages(
    initial_prompt: &str,
    history: &[Exchange],
    query: &QueryRecord,
    budget_tokens: usize,
) -> Vec<ChatMessage> {
    let fixed = approx_tokens(initial_prompt) + approx_tokens(&query.rendered);
    let pair_cost = |ex: &Exchange| approx_tokens(&ex.query.rendered) + approx_tokens(&ex.decision.raw);
    let mut total: usize = fixed + history.iter().map(pair_cost).sum::<usize>();
    let mut first = 0;
    while total > budget_tokens && first < history.len() {
        total -= pair_cost(&history[first]);
        first += 1;
    }

    let mut messages = Vec::with_capacity(2 + 2 * (history.len() - first));
    messages.push(ChatMessage::user(initial_prompt));
    for ex in &history[first..] {
        messages.push(ChatMessage::user(ex.query.rendered.clone()));
        messages.push(ChatMessage::assistant(ex.decision.raw.clone()));
    }
    messages.push(ChatMessage::user(query.rendered.clone()));
    messages
}

#[derive(Debug)]
pub struct RemotePolicy {
    client: LlmClient,
    initial_prompt: String,
    valid: Vec<ActionName>,
    budget_tokens: usize,
}

impl RemotePolicy {
    pub fn new(client: LlmClient, initial_prompt: String, valid: Vec<ActionName>, budget_tokens: usize) -> Self {
        Self { client, initial_prompt, valid, budget_tokens }
    }

    pub fn from_context(ctx: &PolicyContext) -> Result<Self, PolicyError> {
        let client = LlmClient::new(ctx.client.clone())?;
        Ok(Self::new(client, build_initial_prompt(&ctx.prompt), ctx.valid_actions(), ctx.history_budget_tokens))
    }

    pub fn client(&self) -> &LlmClient {
        &self.client
    }
}

impl DecisionPolicy for RemotePolicy {
    fn name(&self) -> &str {
        "remote"
    }

    fn is_remote(&self) -> bool {
        true
    }

    fn decide(&mut self, query: &QueryRecord, history: &[Exchange]) -> Result<Decision, PolicyError> {
        let messages = build_messages(&self.initial_prompt, history, query, self.budget_tokens);
        let raw = self.client.complete(&messages)?;
        match parse_decision(&raw, &self.valid) {
            Ok(d) => Ok(d),
            Err(e) => {
                log::warn!("treating unparseable reply as do_nothing: {e}");
                Ok(Decision { dropped: vec![raw.clone()], ..Decision::do_nothing(raw) })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::{FailureCode, FailureReport};

    fn exchange(i: usize) -> Exchange {
        let q = QueryRecord::new(i as f64, FailureReport { codes: vec![FailureCode::NoIssue], info: "x".repeat(40) });
        Exchange { query: q, decision: Decision::do_nothing("y".repeat(40)) }
    }

    #[test]
    fn alternates_roles_after_the_prompt() {
        let history: Vec<Exchange> = (0..3).map(exchange).collect();
        let q = exchange(9).query;
        let msgs = build_messages("prompt", &history, &q, usize::MAX);
        assert_eq!(msgs.len(), 8);
        assert_eq!(msgs[0].content, "prompt");
        assert_eq!(msgs[2].role, crate::llm_client::Role::Assistant);
        assert_eq!(msgs.last().unwrap().content, q.rendered);
    }

    #[test]
    fn evicts_oldest_pairs_first() {
        let history: Vec<Exchange> = (0..10).map(exchange).collect();
        let q = exchange(10).query;
        let full = build_messages("prompt", &history, &q, usize::MAX);
        let cut = build_messages("prompt", &history, &q, 100);
        assert!(cut.len() < full.len());
        assert_eq!(cut.len() % 2, 0);
        assert_eq!(cut[0].content, "prompt");
        // the newest surviving pair is the newest pair of the full history
        assert_eq!(cut[cut.len() - 2].content, full[full.len() - 2].content);
        let tokens: usize = cut.iter().map(|m| approx_tokens(&m.content)).sum();
        assert!(tokens <= 100);
        // even a zero budget keeps prompt and query
        assert_eq!(build_messages("prompt", &history, &q, 0).len(), 2);
    }
}
