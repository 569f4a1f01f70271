use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oulab::Error;
use oulab_cli::studies;
use oulab_cli::StudyKind;

#[derive(Parser)]
#[command(name = "oulab", version, about = "Monte Carlo studies of stochastic gradient iterates and their diffusion limits")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (`key = value` lines; manifests work too)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's master_seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core); results do not depend on this
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write one ensemble of paths (SGLD, linearized, or the limit) as CSV
    Simulate(RunArgs),
    /// Estimate functional gaps between iterate paths and the limit
    Compare(RunArgs),
    /// Sweep the step size and fit the convergence rate
    RateStudy(RunArgs),
    /// Measure the implied constant in the supremum moment inequality
    OuVerify(RunArgs),
    /// Estimate path-space metrics between iterates and the limit
    Metrics(RunArgs),
    /// Evaluate every error-bound constant for one configuration
    Bounds {
        #[command(flatten)]
        run: RunArgs,
        /// Also print each bound formula term by term
        #[arg(long)]
        explain: bool,
    },
    /// Compare the variance of the iterate average with its limit value
    VarAvg(RunArgs),
}

fn main() -> ExitCode {
    // die quietly instead of panicking when stdout is a closed pipe
    // (e.g. `oulab bounds ... --explain | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let (study, args, explain) = match &cli.cmd {
        Cmd::Simulate(a) => (StudyKind::Simulate, a, false),
        Cmd::Compare(a) => (StudyKind::Compare, a, false),
        Cmd::RateStudy(a) => (StudyKind::RateStudy, a, false),
        Cmd::OuVerify(a) => (StudyKind::OuVerify, a, false),
        Cmd::Metrics(a) => (StudyKind::Metrics, a, false),
        Cmd::Bounds { run, explain } => (StudyKind::Bounds, run, *explain),
        Cmd::VarAvg(a) => (StudyKind::VarAvg, a, false),
    };
    match studies::run(study, &args.config, &args.out, args.seed, args.threads, explain) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                // bad inputs vs. a computation that failed on valid inputs
                Error::Config(_) | Error::Model(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
