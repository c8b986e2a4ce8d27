use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fading_ilms::config::{parse_config, Mode, Overrides};
use fading_ilms::pipeline::{error_exit_code, run_experiment, write_outputs, Status};
use fading_ilms::PiConvention;

const THREADS_ENV: &str = "FADING_ILMS_THREADS";

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Theory,
    Sim,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ConventionArg {
    #[value(name = "per_step")]
    PerStep,
    #[value(name = "paper", alias = "paper_prefactor")]
    GlobalPrefactor,
}

/// Steady-state theory and Monte Carlo simulation of incremental LMS over
/// fading links.
#[derive(Debug, Parser)]
#[command(name = "fading-ilms", version)]
struct Args {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Master seed of the simulation.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    /// Number of final iterations averaged for steady-state values.
    #[arg(long)]
    tail: Option<usize>,
    /// Largest accepted |theory - simulation| gap in dB.
    #[arg(long = "tol-db")]
    tol_db: Option<f64>,
    #[arg(long = "pi-convention", value_enum)]
    pi_convention: Option<ConventionArg>,
    /// Fourth-moment factor: 2 for real data, 1 for circular complex data.
    #[arg(long, value_parser = ["1", "2"])]
    gamma: Option<String>,
}

impl Args {
    fn overrides(&self) -> Overrides {
        Overrides {
            mode: self.mode.map(|m| match m {
                ModeArg::Theory => Mode::Theory,
                ModeArg::Sim => Mode::Sim,
                ModeArg::Both => Mode::Both,
            }),
            seed: self.seed,
            iterations: self.iterations,
            runs: self.runs,
            tail: self.tail,
            tolerance_db: self.tol_db,
            pi_convention: self.pi_convention.map(|c| match c {
                ConventionArg::PerStep => PiConvention::PerStep,
                ConventionArg::GlobalPrefactor => PiConvention::GlobalPrefactor,
            }),
            gamma: self.gamma.as_deref().map(|g| g.parse().expect("validated by clap")),
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(4);
    }
    let exp = match parse_config(&args.config, &args.overrides()) {
        Ok(exp) => exp,
        Err(e) => {
            // unreadable files are configuration errors too
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    };
    let outcome = match run_experiment(&exp) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(error_exit_code(&e) as u8);
        }
    };
    if let Err(e) = write_outputs(&exp, &outcome, &args.out) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }

    match &outcome.status {
        Status::Complete => println!("{} run complete; outputs in {}", exp.run.mode.as_str(), args.out.display()),
        Status::Pass => println!(
            "pass: max |theory - sim| = {:.3} dB <= {} dB",
            outcome.report.max_delta_db.unwrap_or(0.0),
            exp.run.tolerance_db
        ),
        Status::ToleranceFailed { max_delta_db } => {
            println!("fail: max |theory - sim| = {max_delta_db:.3} dB > {} dB", exp.run.tolerance_db)
        }
        Status::Unstable(msg) => eprintln!("instability: {msg}"),
    }
    ExitCode::from(outcome.status.exit_code() as u8)
}
