use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use uav_adapt::advisor::{build_initial_prompt, PolicyRegistry, RiskEmphasis};
use uav_adapt::harness::output::emit_outputs;
use uav_adapt::harness::{run_with_registry, ScenarioSpec, PRESETS};

#[derive(Parser)]
#[command(name = "uav-adapt", version, about = "Closed-loop multirotor runs with a text-protocol decision policy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly one scenario and write telemetry, conversation and metrics.
    Run(RunArgs),
    /// List built-in scenarios and policies.
    List,
    /// Print the initial prompt a scenario would send.
    Prompt {
        #[arg(long, default_value = "nominal")]
        scenario: String,
        #[arg(long)]
        no_tuning_apis: bool,
        #[arg(long)]
        risk: Option<RiskEmphasis>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Preset name or path to a JSON scenario file.
    #[arg(long)]
    scenario: String,
    /// rule | replay:<file> | remote | noop
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    no_tuning_apis: bool,
    #[arg(long)]
    risk: Option<RiskEmphasis>,
    /// Seconds of simulated time.
    #[arg(long)]
    duration: Option<f64>,
    /// Simulation step in seconds; the controller runs every step.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    decision_period: Option<f64>,
    #[arg(long, default_value = "runs/latest")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write SVG plots of position against reference.
    #[arg(long)]
    plot: bool,
}

fn apply_overrides(spec: &mut ScenarioSpec, args: &RunArgs) {
    if let Some(p) = &args.policy {
        spec.policy = p.clone();
    }
    if args.no_tuning_apis {
        spec.prompt.include_tuning_apis = false;
    }
    if let Some(r) = args.risk {
        spec.prompt.risk_emphasis = r;
    }
    if let Some(d) = args.duration {
        spec.duration = d;
        spec.steady_window = spec.steady_window.min(d);
    }
    if let Some(dt) = args.dt {
        spec.dt = dt;
        spec.control_rate = 1.0 / dt;
    }
    if let Some(p) = args.decision_period {
        spec.decision_period = p;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
}

fn run(args: RunArgs) -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = ScenarioSpec::resolve(&args.scenario)?;
    apply_overrides(&mut spec, &args);
    let out = run_with_registry(&spec, &PolicyRegistry::with_builtin())?;
    let files = emit_outputs(&out, &args.out, args.plot)?;
    std::fs::write(args.out.join("initial_prompt.txt"), &out.initial_prompt)?;

    let m = &out.metrics;
    println!(
        "scenario {} with policy {}: final phase {}, altitude {:.3} m",
        m.scenario, m.policy, m.final_phase, m.final_altitude
    );
    println!(
        "steady RMS error x/y/z: {:.3} / {:.3} / {:.3} m; decisions {}; emergency at {}",
        m.steady_rms_error[0],
        m.steady_rms_error[1],
        m.steady_rms_error[2],
        m.decisions_issued,
        m.emergency_time.map_or("-".to_string(), |t| format!("{t:.2} s"))
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::List => {
            println!("scenarios:");
            for name in PRESETS {
                let spec = ScenarioSpec::preset(name).expect("preset exists");
                println!("  {name:<28} {}", spec.description);
            }
            println!("policies:");
            for (name, about) in PolicyRegistry::with_builtin().describe() {
                println!("  {name:<28} {about}");
            }
            Ok(())
        }
        Command::Prompt { scenario, no_tuning_apis, risk } => {
            ScenarioSpec::resolve(&scenario).map_err(Into::into).map(|mut spec| {
                if no_tuning_apis {
                    spec.prompt.include_tuning_apis = false;
                }
                if let Some(r) = risk {
                    spec.prompt.risk_emphasis = r;
                }
                print!("{}", build_initial_prompt(&spec.prompt));
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
