use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scanalr_core::calibration::{CACHE_DIR_ENV, DEFAULT_BLOCK_OFFSET};
use scanalr_core::Detector;

mod commands;
mod input;

#[derive(Debug, Parser)]
#[command(
    name = "scanalr",
    version,
    about = "Detect a signal of unknown location and extent in Gaussian noise"
)]
struct Cli {
    /// Worker threads for Monte Carlo loops (default: all cores). Results do
    /// not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Directory holding cached critical values.
    #[arg(long, global = true, env = CACHE_DIR_ENV, value_name = "DIR")]
    cache_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Monte Carlo calibration parameters shared by several subcommands.
#[derive(Debug, Args)]
struct CalibrationArgs {
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Detector to run; repeat for several (default: all five).
    #[arg(long = "detector", value_name = "NAME")]
    detectors: Vec<Detector>,

    /// Base seed; calibration draws come from a stream derived from it.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Monte Carlo samples for the critical values.
    #[arg(long, default_value_t = 10_000, value_name = "B")]
    mc_crit: usize,

    /// Offset A in the blocked-scan levels alpha~ / (A + l)^2.
    #[arg(long, default_value_t = DEFAULT_BLOCK_OFFSET, value_name = "A")]
    a_offset: u32,

    /// Allow the O(n^2) ALR at n >= 10000, which takes hours to calibrate.
    #[arg(long)]
    long_run: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate null critical values and write them as JSON.
    Calibrate {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        cal: CalibrationArgs,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test a data series (one number per line) for a signal.
    Detect {
        /// Input file; `-` reads stdin.
        input: PathBuf,
        /// Expected series length; checked against the input.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        cal: CalibrationArgs,
        /// Subtract the mean and divide by a robust noise scale first. The
        /// critical values assume standard Gaussian noise; this only makes
        /// rough data fit that assumption.
        #[arg(long)]
        standardize: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run a power study and write one row per detector and grid value.
    PowerTable {
        /// Study configuration (TOML). Flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "detector", value_name = "NAME")]
        detectors: Vec<Detector>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "B")]
        mc_crit: Option<usize>,
        #[arg(long, value_name = "B")]
        mc_power: Option<usize>,
        /// Fixed signal norm; use with --scales.
        #[arg(long, requires = "scales", conflicts_with = "norms")]
        norm: Option<f64>,
        /// Comma-separated spatial extents in (0, 1].
        #[arg(long, value_delimiter = ',', requires = "norm")]
        scales: Vec<f64>,
        /// Comma-separated norms; each replicate draws its extent from U(0, 1).
        #[arg(long, value_delimiter = ',')]
        norms: Vec<f64>,
        /// Centre the signal instead of placing it uniformly at random.
        #[arg(long)]
        centered: bool,
        #[arg(long)]
        long_run: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Output file (default: stdout). CSV output also gets a
        /// `<out>.meta.json` sidecar with the full configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Describe the condensed interval family at a given n, as JSON.
    InspectFamily {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the condensed ALR (and the ALR for n <= 20000).
    Bench {
        /// Comma-separated sample sizes, strictly increasing.
        #[arg(long = "n", value_delimiter = ',', default_values_t = [1_000usize, 10_000, 100_000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
