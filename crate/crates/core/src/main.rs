use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uwb_novelty::harness::{
    cmd_ablate, cmd_evaluate, cmd_report, cmd_simulate, cmd_train, Context, EvaluateArgs,
    ExperimentConfig, HarnessResult, ModeKind, SimulateTarget,
};

#[derive(Parser)]
#[command(
    name = "uwbnov",
    version,
    about = "Novelty-adaptive EKF for UWB localization"
)]
struct Cli {
    /// TOML configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed, overriding `experiment.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Proceed despite a model/dataset layout mismatch.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a range dataset.
    Simulate(SimulateArgs),
    /// Train the novelty autoencoder.
    Train {
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        /// Grid-search the architecture and optimizer settings first.
        #[arg(long)]
        grid: bool,
    },
    /// Run one filter mode over a dataset.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_parser = parse_mode, default_value = "adaptive-full")]
        mode: ModeKind,
    },
    /// Sweep scenarios, layouts, modes and seeds.
    Ablate {
        /// Number of seeds, overriding `experiment.seeds`.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Merge run directories into a static versus adaptive comparison.
    Report { runs: Vec<PathBuf> },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SimulateArgs {
    /// Built-in scenario, 1-9.
    #[arg(long)]
    scenario: Option<u8>,
    /// The nominal training runs.
    #[arg(long)]
    training: bool,
    /// The `[trajectory]` section of the configuration.
    #[arg(long)]
    custom: bool,
}

fn parse_mode(s: &str) -> Result<ModeKind, String> {
    ModeKind::parse(s).ok_or_else(|| {
        let names: Vec<&str> = ModeKind::ALL.iter().map(|m| m.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn run(cli: Cli) -> HarnessResult<()> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.experiment.seed = seed;
    }
    if let Command::Ablate { seeds: Some(n) } = cli.command {
        config.experiment.seeds = n;
    }
    config.validate()?;
    let ctx = Context::new(config, cli.out, cli.force);

    match cli.command {
        Command::Simulate(args) => {
            let target = match (args.scenario, args.training) {
                (Some(id), _) => SimulateTarget::Scenario(id),
                (None, true) => SimulateTarget::Training,
                (None, false) => SimulateTarget::Custom,
            };
            for path in cmd_simulate(&ctx, target)? {
                println!("{}", path.display());
            }
        }
        Command::Train { data, grid } => {
            let outcome = cmd_train(&ctx, &data, grid)?;
            println!(
                "trained {}-{}-{}-{}-{} on {} samples, final loss {:.3e}, mean novelty {:.4}",
                outcome.shape.n_in,
                outcome.shape.n_e1,
                outcome.shape.n_e2,
                outcome.shape.n_d1,
                outcome.shape.n_in,
                outcome.samples,
                outcome.epoch_losses.last().copied().unwrap_or(f64::NAN),
                outcome.training_novelty_mean
            );
        }
        Command::Evaluate { data, model, mode } => {
            let args = EvaluateArgs { data, model, mode };
            if cmd_evaluate(&ctx, &args)?.is_some() {
                print!("{}", std::fs::read_to_string(ctx.out.join("metrics.txt"))?);
            }
        }
        Command::Ablate { .. } => {
            cmd_ablate(&ctx)?;
            print!("{}", std::fs::read_to_string(ctx.out.join("ablation.txt"))?);
        }
        Command::Report { runs } => {
            cmd_report(&ctx, &runs)?;
            print!("{}", std::fs::read_to_string(ctx.out.join("report.txt"))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
