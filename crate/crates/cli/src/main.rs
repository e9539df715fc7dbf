mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use commands::phasespace::PhaseSpace;
use commands::quasiprob::QuasiProb;
use commands::singlet::Singlet;
use commands::spin::Spin;
use commands::twoslit::TwoSlit;
use commands::Experiment;
use error::CliError;
use output::{create_dir, write_manifest, ManifestInfo, RunContext};

#[derive(Parser)]
#[command(name = "eqm-lab", version, about = "Run extended-phase-space experiments from a config file")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quaternion spin lattice marginals and residuals.
    Spin(RunArgs),
    /// Singlet correlations, CHSH values and model agreement.
    Singlet(RunArgs),
    /// α-split operators, commutator and lift/projection round trips.
    Phasespace(RunArgs),
    /// Quasi-probability tables and joint-distribution feasibility.
    Quasiprob(RunArgs),
    /// Two-slit intensities and decohered ensembles.
    Twoslit(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment file (.toml or .json).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel kernels.
    #[arg(long)]
    threads: Option<usize>,
}

fn run<E: Experiment>(name: &str, args: &RunArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut cfg = config::load::<E::Params>(&args.config, name)?;
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set `out`".into()))?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let prepared = E::prepare(&cfg.params)?;

    cfg.experiment = Some(name.to_string());
    cfg.out = Some(dir.clone());
    cfg.seed = Some(seed);
    let echoed = serde_json::to_value(&cfg)?;

    create_dir(&dir)?;
    let mut ctx = RunContext::new(dir, seed, cfg.tolerances);
    let result = E::execute(&prepared, &mut ctx);
    let info = ManifestInfo {
        subcommand: name,
        threads: args.threads,
        config: &echoed,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    write_manifest(&ctx, &info, result.as_ref().err())?;
    result?;
    if let Some(first) = ctx.failures().first() {
        return Err(CliError::Numeric(format!("{first} ({} contract failure(s))", ctx.failures().len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Spin(a) => run::<Spin>("spin", a),
        Command::Singlet(a) => run::<Singlet>("singlet", a),
        Command::Phasespace(a) => run::<PhaseSpace>("phasespace", a),
        Command::Quasiprob(a) => run::<QuasiProb>("quasiprob", a),
        Command::Twoslit(a) => run::<TwoSlit>("twoslit", a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eqm-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
