use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dissim::cli::{run_cli, RunFlags, Subcommand as Command};

/// Storage certificates, reduced abstractions and moment error bounds for
/// interconnected jump-diffusion systems.
///
/// Exit codes: 0 all checks pass, 1 a verification failed, 2 configuration
/// or usage error, 3 numerical divergence. A report.json is written to the
/// output directory in every case. DISSIM_THREADS caps the worker threads.
#[derive(Parser)]
#[command(name = "dissim", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Project file (JSON, schema_version 1).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Monte Carlo trials.
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Integration step.
    #[arg(long, value_name = "F")]
    dt: Option<f64>,
    #[arg(long, value_name = "F")]
    horizon: Option<f64>,
    /// Relative tolerance of the semidefinite and residual tests.
    #[arg(long, value_name = "F")]
    tol: Option<f64>,
    #[arg(long, value_name = "DIR", default_value = "dissim-out")]
    out: PathBuf,
    /// Drive concrete and abstract networks with the same Brownian
    /// increments (diagnostic; the bound is stated for independent noise).
    #[arg(long)]
    shared_noise: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the declared single-system runs and write one CSV each.
    Simulate(Common),
    /// Check block inequality, matching equations and sampled dissipation
    /// for every certificate.
    VerifyCert(Common),
    /// Check the interconnection inequality and the coupling match for
    /// every network.
    VerifyNet(Common),
    /// Build abstractions from the seed data and write them as project files.
    Abstract(Common),
    /// Close the coupling loops and write the resulting systems.
    Compose(Common),
    /// Evaluate the moment error bound on the time grid.
    Bound(Common),
    /// Compare the bound with paired Monte Carlo runs.
    McValidate(Common),
    /// Full pipeline on the bundled all-to-all network of three
    /// three-state subsystems with scalar abstractions. The abstract input is
    /// the piecewise-constant signal from the project file; no controller is
    /// synthesized.
    Example1(Common),
    /// Full pipeline on the bundled ring of three twenty-state oscillator
    /// chains with a dynamic supply rate.
    Example2(Common),
}

impl Cmd {
    fn split(self) -> (Command, Common) {
        match self {
            Cmd::Simulate(c) => (Command::Simulate, c),
            Cmd::VerifyCert(c) => (Command::VerifyCert, c),
            Cmd::VerifyNet(c) => (Command::VerifyNet, c),
            Cmd::Abstract(c) => (Command::Abstract, c),
            Cmd::Compose(c) => (Command::Compose, c),
            Cmd::Bound(c) => (Command::Bound, c),
            Cmd::McValidate(c) => (Command::McValidate, c),
            Cmd::Example1(c) => (Command::Example1, c),
            Cmd::Example2(c) => (Command::Example2, c),
        }
    }
}

fn configure_threads() {
    let Ok(raw) = std::env::var("DISSIM_THREADS") else { return };
    match raw.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("warning: could not size the thread pool: {e}");
            }
        }
        _ => eprintln!("warning: ignoring DISSIM_THREADS={raw:?} (expected a positive integer)"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let (cmd, common) = Cli::parse().command.split();
    let flags = RunFlags {
        seed: common.seed,
        trials: common.trials,
        dt: common.dt,
        horizon: common.horizon,
        tol: common.tol,
        shared_noise: common.shared_noise,
        out: common.out,
    };
    let outcome = run_cli(cmd, common.config.as_deref(), &flags);
    for line in &outcome.lines {
        println!("{line}");
    }
    match &outcome.report_path {
        Some(p) => println!("report: {}", p.display()),
        None => eprintln!("warning: report.json could not be written to {}", flags.out.display()),
    }
    ExitCode::from(outcome.exit_code() as u8)
}
