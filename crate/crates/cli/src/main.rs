//! `eeqt`: command-line front end of the detection simulator.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eeqt_core::config::presets::catalog;
use eeqt_core::config::{parse_config, resolve, Experiment, RawConfig};
use eeqt_core::run::run_and_emit;
use eeqt_core::Error;

#[derive(Debug, Parser)]
#[command(name = "eeqt", version, about = "Relativistic detection-time simulator for a spin-1/2 particle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Arrival-time density at a single detector.
    Arrival(RunArgs),
    /// Traversal-time density between two detectors.
    Traversal(RunArgs),
    /// Sampled detection events at a single detector.
    McArrival(RunArgs),
    /// Sampled detection chains at two detectors.
    McTraversal(RunArgs),
    /// List the catalogued preset names.
    Presets,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Named preset, for example `fig1-p0=1.0` or `fig3-p0=0.5-state=N`.
    #[arg(long)]
    preset: Option<String>,
    /// TOML configuration file; command-line flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the coarse step sizes of the preset.
    #[arg(long)]
    coarse: bool,
    /// Also run at the second step size and report Richardson error bars.
    #[arg(long)]
    both_steps: bool,
    /// Frame velocities, comma separated, in units of c.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    boost: Vec<f64>,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of events (mc-arrival) or traversals (mc-traversal).
    #[arg(long)]
    samples: Option<u64>,
    /// Phase-B launch stride in proper-time steps.
    #[arg(long)]
    stride: Option<usize>,
    /// Also write the gzipped joint density (traversal).
    #[arg(long)]
    joint: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn raw_config(&self, experiment: Experiment) -> Result<RawConfig, Error> {
        let mut raw = match &self.config {
            Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
            None => RawConfig::default(),
        };
        match raw.experiment {
            Some(e) if e != experiment => {
                return Err(Error::config(
                    "experiment",
                    format!("file describes `{}` but `{}` was requested", e.name(), experiment.name()),
                ))
            }
            _ => raw.experiment = Some(experiment),
        }
        if self.preset.is_some() {
            raw.preset = self.preset.clone();
        }
        if self.coarse {
            raw.coarse = Some(true);
        }
        if self.both_steps {
            raw.both_steps = Some(true);
        }
        if !self.boost.is_empty() {
            raw.boosts = Some(self.boost.clone());
        }
        if self.joint {
            raw.joint = Some(true);
        }
        raw.seed = self.seed.or(raw.seed);
        raw.samples = self.samples.or(raw.samples);
        raw.stride = self.stride.or(raw.stride);
        raw.out = self.out.clone().or(raw.out);
        Ok(raw)
    }
}

/// Process exit status for an error.
fn exit_status(error: &Error) -> u8 {
    match error {
        Error::Usage(_) => 2,
        Error::Config { .. } | Error::Parse(_) | Error::Domain(_) | Error::Construction { .. } => 3,
        Error::NumericalInstability { .. } => 4,
        Error::NoDetection { .. } | Error::NoDoubleDetection { .. } => 5,
        Error::Io(_) => 6,
    }
}

fn run(experiment: Experiment, args: &RunArgs) -> Result<(), Error> {
    let config = resolve(args.raw_config(experiment)?)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Usage(e.to_string()))?;
    let report = pool.install(|| run_and_emit(&config))?;
    println!("{}", report.line);
    println!("wrote {}", config.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Presets => {
            let mut out = std::io::stdout().lock();
            for name in catalog() {
                if writeln!(out, "{name}").is_err() {
                    break;
                }
            }
            return ExitCode::SUCCESS;
        }
        Command::Arrival(a) => (Experiment::Arrival, a),
        Command::Traversal(a) => (Experiment::Traversal, a),
        Command::McArrival(a) => (Experiment::McArrival, a),
        Command::McTraversal(a) => (Experiment::McTraversal, a),
    };
    match run(experiment, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eeqt: {e}");
            ExitCode::from(exit_status(&e))
        }
    }
}
