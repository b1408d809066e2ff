mod commands;
mod error;
mod util;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use crate::util::{Band, IndexList, Sweep};

/// State-space dynamic substructuring: build models from modal parameters,
/// couple and decouple them, stabilize coupled models and simulate them.
///
/// Frequencies on the command line and in files are in Hz.
#[derive(Debug, Parser)]
#[command(name = "ssdss", version)]
pub struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Frequency band of interest, Hz.
    #[arg(long, global = true, default_value = "20:500")]
    band: Band,

    /// Frequency lines across the band (log-spaced).
    #[arg(long, global = true, default_value_t = 400)]
    points: usize,

    /// Tolerance reported against by `compare` and `build`.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,

    /// Seed for generated fixtures.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a displacement state-space model from a modal model.
    Build {
        #[arg(long)]
        modal: PathBuf,
        /// RCM settings; defaults to 0.1 Hz / 15 kHz / 15 kHz, all ξ = 0.1.
        #[arg(long)]
        rcm: Option<PathBuf>,
        /// Skip the Newton's-law RCMs.
        #[arg(long)]
        no_newton: bool,
        /// Write the model in real block form instead of diagonal complex.
        #[arg(long)]
        real_form: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Couple models through an interface map.
    Couple {
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        map: PathBuf,
        /// Outputs/inputs to keep, e.g. `6-17` or `0,2,4`; all when omitted.
        #[arg(long)]
        keep: Option<IndexList>,
        #[arg(long)]
        out: PathBuf,
        /// Pole report; defaults to the output path with `.poles.csv`.
        #[arg(long)]
        poles_out: Option<PathBuf>,
    },
    /// Remove substructures from an assembly model.
    Decouple {
        #[arg(long)]
        assembly: PathBuf,
        #[arg(long = "subtract", required = true)]
        subtract: Vec<PathBuf>,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        keep: Option<IndexList>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        poles_out: Option<PathBuf>,
    },
    /// Replace the unstable poles of a coupled model.
    Stabilize {
        #[arg(long)]
        model: PathBuf,
        /// LSFD weighting: displacement, velocity or acceleration.
        #[arg(long, default_value = "acceleration")]
        weighting: String,
        /// RCM settings for the re-estimated part; derived from the poles when omitted.
        #[arg(long)]
        rcm: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Diagnostics; defaults to the output path with `.diagnostics.json`.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Simulate a model under a faded sine sweep.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// Sampling rate; 2.5 × the fastest natural frequency when omitted.
        #[arg(long)]
        fs_hz: Option<f64>,
        /// `f0:f1:duration` in Hz and s.
        #[arg(long, default_value = "20:500:1.0")]
        sweep: Sweep,
        /// Fraction of the duration faded in and out at each end.
        #[arg(long, default_value_t = 0.05)]
        fade: f64,
        /// Input channel driven by the sweep.
        #[arg(long, default_value_t = 0)]
        input: usize,
        /// Response quantity; the model is differentiated as needed.
        #[arg(long, default_value = "acceleration")]
        domain: String,
        /// Model simulated alongside for an RMS comparison outside the fades.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate FRFs of several sources and their deviation from the first.
    Compare {
        /// Modal model, state-space model or FRF set.
        #[arg(long = "source", required = true, num_args = 1..)]
        sources: Vec<PathBuf>,
        /// Entry tabulated as magnitude and phase, `output,input`.
        #[arg(long, default_value = "0,0")]
        entry: IndexList,
        /// Domain to compare in; that of the first source when omitted.
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fixture generation.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Pole table of a model.
    Poles {
        #[arg(long)]
        model: PathBuf,
        /// CSV file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy of the RCMs a build would use, per frequency.
    RcmReport {
        #[arg(long)]
        modal: PathBuf,
        #[arg(long)]
        rcm: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Write every fixture as ssdss-v1 JSON.
    Export {
        #[arg(long)]
        out_dir: PathBuf,
        /// Relative perturbation of the assembly-A modal model.
        #[arg(long, default_value_t = 0.01)]
        rel: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    let g = &cli.global;
    let result = match cli.command {
        Command::Build { modal, rcm, no_newton, real_form, out } => {
            commands::build(g, &modal, rcm.as_deref(), !no_newton, real_form, &out)
        }
        Command::Couple { models, map, keep, out, poles_out } => {
            commands::couple(&models, &map, keep.as_ref(), &out, poles_out.as_deref())
        }
        Command::Decouple { assembly, subtract, map, keep, out, poles_out } => {
            commands::decouple(&assembly, &subtract, &map, keep.as_ref(), &out, poles_out.as_deref())
        }
        Command::Stabilize { model, weighting, rcm, out, diagnostics } => {
            commands::stabilize(g, &model, &weighting, rcm.as_deref(), &out, diagnostics.as_deref())
        }
        Command::Simulate { model, fs_hz, sweep, fade, input, domain, reference, out } => {
            commands::simulate(&model, fs_hz, &sweep, fade, input, &domain, reference.as_deref(), &out)
        }
        Command::Compare { sources, entry, domain, out } => {
            commands::compare(g, &sources, &entry, domain.as_deref(), &out)
        }
        Command::Bench(BenchCommand::Export { out_dir, rel }) => commands::bench_export(g, &out_dir, rel),
        Command::Poles { model, out } => commands::poles(&model, out.as_deref()),
        Command::RcmReport { modal, rcm, out } => commands::rcm_report(g, &modal, rcm.as_deref(), &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
