use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaplab::harness::commands::{exit_code, run, Command, RunOptions};

#[derive(Parser)]
#[command(name = "gaplab", version, about = "Gradient blow-up rates between nearly touching insulators")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment config (JSON); for `report`, a report.json
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory, depending on the command
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Eigenvalues of the weighted sphere problem
    Spectrum,
    /// Exponent prediction from the first eigenvalue
    Predict,
    /// One reduced solve at the first epsilon
    SolveReduced,
    /// One full gap solve at the first epsilon
    Gap,
    /// Radial ODE closed-form check
    Ode,
    /// Upper-bound epsilon sweep
    SweepUpper,
    /// Lower-bound pipeline
    SweepLower,
    /// Summarize an existing report.json
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Predict => Command::Predict,
            Cmd::SolveReduced => Command::SolveReduced,
            Cmd::Gap => Command::Gap,
            Cmd::Ode => Command::Ode,
            Cmd::SweepUpper => Command::SweepUpper,
            Cmd::SweepLower => Command::SweepLower,
            Cmd::Report => Command::Report,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GAPLAB_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let Some(config) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(1);
    };
    let opts = RunOptions {
        config,
        out: cli.out,
        workers: cli
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        seed: cli.seed,
    };
    let result = run(cli.command.into(), &opts);
    match &result {
        Ok(o) => print!("{}", o.stdout),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
