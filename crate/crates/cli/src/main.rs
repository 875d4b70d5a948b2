use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aoi_cli::config::{parse_policy, ExperimentConfig, Overrides};
use aoi_cli::{experiment, report, CliError};

#[derive(Parser)]
#[command(
    name = "aoi",
    version,
    about = "Optimal AoI/energy update scheduling with optional preprocessing"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path prefix for sweep files.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Base simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// AoI cap.
    #[arg(long = "delta-hat", global = true)]
    delta_hat: Option<u32>,
    /// Uniformization constant in (0, 1].
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Override a config entry: `key=value` (a [params] key) or `section.key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single instance and report its structure.
    Solve,
    /// Run the sweep described by the config and write CSV reports.
    Sweep,
    /// Simulate one policy and compare with its exact average cost.
    Simulate {
        /// optimal, zero_wait_no_computation, zero_wait_computation or threshold:<w>:<below>:<above>.
        #[arg(long, default_value = "optimal")]
        policy: String,
        /// Simulated minislots.
        #[arg(long)]
        horizon: Option<u64>,
        /// Discarded leading minislots (default 10% of the horizon).
        #[arg(long)]
        warmup: Option<u64>,
    },
    /// Reliable-channel closed forms.
    Analyze,
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let g = cli.global;
    let overrides = Overrides {
        sets: g.sets,
        seed: g.seed,
        delta_hat: g.delta_hat,
        epsilon: g.epsilon,
        out: g.out,
    };
    let mut cfg = ExperimentConfig::load(g.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Solve => print!("{}", report::solve_report(&cfg)?),
        Command::Analyze => print!("{}", report::analyze_report(&cfg)?),
        Command::Simulate {
            policy,
            horizon,
            warmup,
        } => {
            let kind = parse_policy(&policy)
                .map_err(|_| CliError::config("--policy", format!("unknown policy {policy:?}")))?;
            if let Some(h) = horizon {
                cfg.sim.horizon_minislots = h;
                cfg.sim.warmup_minislots = h / 10;
            }
            if let Some(w) = warmup {
                cfg.sim.warmup_minislots = w;
            }
            print!("{}", report::simulate_report(&cfg, &kind)?);
        }
        Command::Sweep => {
            let outcome = experiment::run_experiment(&cfg)?;
            let rows: usize = outcome.points.iter().map(|p| p.rows.len()).sum();
            let prefix = cfg
                .output_prefix
                .as_deref()
                .unwrap_or(experiment::DEFAULT_PREFIX);
            println!("wrote {rows} rows to {prefix}.csv");
            if !outcome.all_converged() {
                let failed: Vec<String> = outcome
                    .points
                    .iter()
                    .filter(|p| !p.converged())
                    .map(|p| aoi_cli::format::g12(p.value))
                    .collect();
                eprintln!(
                    "error: solver did not converge at sweep values {}",
                    failed.join(", ")
                );
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
