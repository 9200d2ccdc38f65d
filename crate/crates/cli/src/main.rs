use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use momlab_cli::{run, ConfigError, ExperimentKind, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "momlab", version, about = "Momentum SGD versus SGD and SDE approximations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate SGD, SGDM and the SDEs on one landscape.
    Simulate(Common),
    /// Warm-up moments against closed forms.
    Warmup(Common),
    /// Weak distance between SGDM and SGD across learning rates.
    WeakApprox(Common),
    /// SGD and SGDM under SVAG across ℓ.
    SvagSweep(Common),
    /// SGDM and SGD against the slow SDE on a manifold.
    SlowSde(Common),
    /// Exact one-step descent decomposition on quadratics.
    Descent(Common),
    /// Convert a standard-form schedule to the EMA form.
    Convert(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "MOMLAB_THREADS")]
    threads: Option<usize>,
    /// Output directory; defaults to the config `output_dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write every seed's trajectory as raw binary (simulate only).
    #[arg(long)]
    dump_trajectories: bool,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::Simulate(c) => (ExperimentKind::Simulate, c),
            Command::Warmup(c) => (ExperimentKind::Warmup, c),
            Command::WeakApprox(c) => (ExperimentKind::WeakApprox, c),
            Command::SvagSweep(c) => (ExperimentKind::SvagSweep, c),
            Command::SlowSde(c) => (ExperimentKind::SlowSde, c),
            Command::Descent(c) => (ExperimentKind::Descent, c),
            Command::Convert(c) => (ExperimentKind::Convert, c),
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let (kind, args) = cli.command.split();
    let mut cfg = RunConfig::load(&args.config)?;
    if cfg.experiment != kind {
        return Err(ConfigError(format!(
            "experiment: config is for `{}` but the `{}` subcommand was given",
            cfg.experiment.name(),
            kind.name()
        ))
        .into());
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let threads = match args.threads {
        Some(0) => return Err(ConfigError("--threads: must be at least 1".into()).into()),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let out = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let opts = RunOptions {
        out: out.clone(),
        threads,
        dump_trajectories: args.dump_trajectories,
    };
    let outcome = run(&cfg, &opts).with_context(|| format!("{} failed", kind.name()))?;
    log::info!("wrote {} files to {}", outcome.files.len(), out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<momlab_core::Error>() {
            return match e {
                momlab_core::Error::AllDiverged { .. } => 3,
                _ => 2,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
