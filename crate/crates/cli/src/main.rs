//! `qlink` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 data-format
//! error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qlink::Error;

mod commands;
mod run;

use run::{Outputs, RunReport};

#[derive(Parser)]
#[command(name = "qlink", version, about = "Satellite single-photon link budgets, simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Preset name, scenario file, or name looked up in $QLINK_SCENARIO_DIR.
    #[arg(long, short)]
    scenario: String,
    /// Directory receiving output files and the run report.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Print the run report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the link budget.
    Budget {
        #[command(flatten)]
        common: Common,
        /// Slant range (m); defaults to the scenario's budget range.
        #[arg(long)]
        range: Option<f64>,
        /// Extra loss on the returned spot, in (0, 1].
        #[arg(long)]
        spreading: Option<f64>,
        /// Tabulate photoelectrons against a parameter.
        #[arg(long, value_enum)]
        sweep: Option<Sweep>,
    },
    /// Simulate a time-tag stream.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Analyse a time-tag file.
    Analyze {
        #[arg(value_enum)]
        mode: Mode,
        /// Time-tag file in the v1 text format.
        #[arg(long, short)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Coincidence window (ns).
        #[arg(long)]
        window_ns: Option<f64>,
        /// Chebyshev degree of the range fit.
        #[arg(long)]
        degree: Option<usize>,
        /// Count bin width (s).
        #[arg(long)]
        bin_s: Option<f64>,
    },
    /// Expected count rate from a star.
    Star {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        magnitude: Option<f64>,
        /// Also simulate the run and test its counts for Poisson dispersion.
        #[arg(long)]
        observe: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        bin_s: Option<f64>,
    },
    /// List the built-in scenarios, optionally writing them as files.
    Presets {
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Sweep {
    Range,
    Divergence,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Mode {
    Fit,
    Coincidence,
    Calibrate,
    Spectrum,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Fit => "fit",
            Mode::Coincidence => "coincidence",
            Mode::Calibrate => "calibrate",
            Mode::Spectrum => "spectrum",
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Format { .. }
        | Error::NoReturns
        | Error::EmptyStream
        | Error::TooShort { .. }
        | Error::Underdetermined { .. }
        | Error::IllConditioned { .. }
        | Error::OutOfDomain { .. }
        | Error::EpochMismatch { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let (json, out, result) = match cli.command {
        Command::Budget {
            common,
            range,
            spreading,
            sweep,
        } => {
            let mut outputs = Outputs::new(common.out.clone());
            let r = commands::budget(&common.scenario, range, spreading, sweep, &mut outputs);
            (common.json, outputs, r)
        }
        Command::Simulate { common, seed } => {
            let mut outputs = Outputs::new(common.out.clone());
            let r = commands::simulate(&common.scenario, seed, &mut outputs);
            (common.json, outputs, r)
        }
        Command::Analyze {
            mode,
            input,
            common,
            window_ns,
            degree,
            bin_s,
        } => {
            let mut outputs = Outputs::new(common.out.clone());
            let opts = commands::AnalyzeOptions {
                window_ns,
                degree,
                bin_s,
            };
            let r = commands::analyze(mode, &input, &common.scenario, opts, &mut outputs);
            (common.json, outputs, r)
        }
        Command::Star {
            common,
            magnitude,
            observe,
            seed,
            bin_s,
        } => {
            let mut outputs = Outputs::new(common.out.clone());
            let r = commands::star(&common.scenario, magnitude, observe, seed, bin_s, &mut outputs);
            (common.json, outputs, r)
        }
        Command::Presets { out, json } => {
            let mut outputs = Outputs::new(out);
            let r = commands::presets(&mut outputs);
            (json, outputs, r)
        }
    };

    let (mut report, text) = match result {
        Ok(ok) => ok,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    report.manifest = out.manifest.clone();
    if let Err(e) = out.write_report(&mut report) {
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e));
    }
    report.wall_time_s = Some(started.elapsed().as_secs_f64());
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        print!("{text}");
        for m in &report.manifest {
            println!("wrote {}", m.path);
        }
        println!("inputs digest {}", report.inputs_digest);
        println!("wall time {:.3} s", report.wall_time_s.unwrap_or(0.0));
    }
    ExitCode::SUCCESS
}

pub type CommandResult = Result<(RunReport, String), Error>;
