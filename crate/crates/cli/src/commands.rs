use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use scanalr_core::calibration::{calibrate_all, Calibration, CalibrationCache};
use scanalr_core::detectors::{build_condensed_family, FamilyReport};
use scanalr_core::experiments::{
    benchmark_complexity, calibration_seed, render_table, ExperimentConfig, SignalGrid,
    StudyTiming, TableFormat,
};
use scanalr_core::signal_model::{CumulativeSums, SeedRecord};
use scanalr_core::{Detector, Error, StatisticSuite};

use crate::input::{read_series, standardize};
use crate::{CalibrationArgs, Cli, Command, Format};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Sample size from which the full ALR needs `--long-run`.
const LONG_RUN_N: usize = 10_000;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
    Core(Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) | Failure::Core(Error::Io { .. } | Error::Parse(_)) => 1,
            Failure::Usage(_) | Failure::Core(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Io(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CmdResult = Result<(), Failure>;

pub fn run(cli: Cli) -> CmdResult {
    let cache = cli.cache_dir.map(CalibrationCache::new);
    match cli.command {
        Command::Calibrate { n, cal, out } => calibrate(n, &cal, cache.as_ref(), out.as_deref()),
        Command::Detect {
            input,
            n,
            cal,
            standardize,
            format,
        } => detect(&input, n, &cal, standardize, format, cache.as_ref()),
        Command::PowerTable {
            config,
            n,
            alpha,
            detectors,
            seed,
            mc_crit,
            mc_power,
            norm,
            scales,
            norms,
            centered,
            long_run,
            format,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::from_file(path)?,
                None => {
                    let n = n.ok_or_else(|| {
                        Failure::Usage("power-table needs --config or --n".into())
                    })?;
                    ExperimentConfig {
                        n,
                        alpha: 0.05,
                        detectors: Detector::ALL.to_vec(),
                        signal_grid: SignalGrid::RandomScale { norms: Vec::new() },
                        random_location: true,
                        b_crit: 10_000,
                        b_power: 2000,
                        seed: 1,
                        a_offset: scanalr_core::calibration::DEFAULT_BLOCK_OFFSET,
                    }
                }
            };
            if let Some(v) = n {
                cfg.n = v;
            }
            if let Some(v) = alpha {
                cfg.alpha = v;
            }
            if !detectors.is_empty() {
                cfg.detectors = dedup(detectors);
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = mc_crit {
                cfg.b_crit = v;
            }
            if let Some(v) = mc_power {
                cfg.b_power = v;
            }
            if let Some(norm) = norm {
                cfg.signal_grid = SignalGrid::FixedNorm { norm, scales };
            } else if !norms.is_empty() {
                cfg.signal_grid = SignalGrid::RandomScale { norms };
            }
            if centered {
                cfg.random_location = false;
            }
            if cfg.signal_grid.is_empty() {
                return Err(Failure::Usage(
                    "no signal grid: give --norm with --scales, or --norms".into(),
                ));
            }
            cfg.validate()?;
            check_long_run(cfg.n, &cfg.detectors, long_run)?;
            power_table(&cfg, format, out.as_deref(), cache.as_ref())
        }
        Command::InspectFamily { n, out } => inspect_family(n, out.as_deref()),
        Command::Bench {
            sizes,
            repeats,
            seed,
            format,
            out,
        } => bench(&sizes, repeats, seed, format, out.as_deref()),
    }
}

fn dedup(mut detectors: Vec<Detector>) -> Vec<Detector> {
    detectors.sort();
    detectors.dedup();
    detectors
}

fn detectors_or_all(list: &[Detector]) -> Vec<Detector> {
    if list.is_empty() {
        Detector::ALL.to_vec()
    } else {
        dedup(list.to_vec())
    }
}

fn check_long_run(n: usize, detectors: &[Detector], long_run: bool) -> CmdResult {
    if n >= LONG_RUN_N && detectors.contains(&Detector::Alr) && !long_run {
        return Err(Failure::Usage(format!(
            "calibrating the full ALR at n = {n} takes hours; pass --long-run, \
             or pick other detectors with --detector"
        )));
    }
    Ok(())
}

fn write_output(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

fn calibrations_for(
    n: usize,
    detectors: &[Detector],
    cal: &CalibrationArgs,
    cache: Option<&CalibrationCache>,
) -> Result<Vec<Calibration>, Failure> {
    Ok(calibrate_all(
        n,
        cal.alpha,
        detectors,
        cal.mc_crit,
        calibration_seed(cal.seed),
        cal.a_offset,
        cache,
    )?)
}

#[derive(Serialize)]
struct CalibrationOutput<'a> {
    version: &'static str,
    n: usize,
    alpha: f64,
    detectors: &'a [Detector],
    seed: u64,
    /// Stream the null draws came from.
    calibration_stream: SeedRecord,
    mc_crit: usize,
    a_offset: u32,
    calibrations: &'a [Calibration],
}

fn calibrate(
    n: usize,
    cal: &CalibrationArgs,
    cache: Option<&CalibrationCache>,
    out: Option<&Path>,
) -> CmdResult {
    let detectors = detectors_or_all(&cal.detectors);
    check_long_run(n, &detectors, cal.long_run)?;
    let calibrations = calibrations_for(n, &detectors, cal, cache)?;
    let doc = CalibrationOutput {
        version: VERSION,
        n,
        alpha: cal.alpha,
        detectors: &detectors,
        seed: cal.seed,
        calibration_stream: calibration_seed(cal.seed),
        mc_crit: cal.mc_crit,
        a_offset: cal.a_offset,
        calibrations: &calibrations,
    };
    write_output(out, &to_json(&doc))
}

#[derive(Serialize)]
struct Decision {
    detector: Detector,
    /// Log domain for the two ALRs; the largest block maximum for the blocked scan.
    statistic: f64,
    /// The smallest block threshold for the blocked scan.
    critical_value: f64,
    reject: bool,
}

#[derive(Serialize)]
struct DetectOutput<'a> {
    version: &'static str,
    input: &'a Path,
    n: usize,
    alpha: f64,
    seed: u64,
    mc_crit: usize,
    a_offset: u32,
    standardized: bool,
    /// Scale divided out by `--standardize` (1 otherwise).
    scale: f64,
    results: Vec<Decision>,
}

fn detect(
    input: &PathBuf,
    expected_n: Option<usize>,
    cal: &CalibrationArgs,
    standardized: bool,
    format: Format,
    cache: Option<&CalibrationCache>,
) -> CmdResult {
    let raw = read_series(input)?;
    if let Some(n) = expected_n {
        if n != raw.len() {
            return Err(Failure::Usage(format!(
                "--n {n} does not match the {} values in {}",
                raw.len(),
                input.display()
            )));
        }
    }
    let n = raw.len();
    if n < 3 {
        return Err(Failure::Usage(format!("need at least 3 values, got {n}")));
    }
    let (values, scale) = if standardized {
        standardize(&raw)
    } else {
        (raw, 1.0)
    };
    let detectors = detectors_or_all(&cal.detectors);
    check_long_run(n, &detectors, cal.long_run)?;

    let stats =
        StatisticSuite::new(n, &detectors)?.evaluate(&CumulativeSums::from_values(&values))?;
    let calibrations = calibrations_for(n, &detectors, cal, cache)?;
    let mut results = Vec::with_capacity(calibrations.len());
    for c in &calibrations {
        let detector = c.detector();
        let statistic = match detector {
            Detector::BlockedScan => stats.block_maxima.as_ref().map(|b| b.overall()),
            d => stats.scalar(d),
        }
        .expect("every requested detector is evaluated");
        results.push(Decision {
            detector,
            statistic,
            critical_value: c.headline_value(),
            reject: c.rejects(&stats)?,
        });
    }

    let text = match format {
        Format::Json => to_json(&DetectOutput {
            version: VERSION,
            input,
            n,
            alpha: cal.alpha,
            seed: cal.seed,
            mc_crit: cal.mc_crit,
            a_offset: cal.a_offset,
            standardized,
            scale,
            results,
        }),
        Format::Csv => {
            let mut t = format!(
                "# scanalr {VERSION} n={n} alpha={} seed={} mc_crit={} a_offset={} standardized={standardized} scale={scale}\n",
                cal.alpha, cal.seed, cal.mc_crit, cal.a_offset
            );
            t.push_str("detector,statistic,critical_value,decision\n");
            for r in &results {
                let decision = if r.reject { "reject" } else { "accept" };
                t.push_str(&format!(
                    "{},{},{},{decision}\n",
                    r.detector, r.statistic, r.critical_value
                ));
            }
            t
        }
    };
    write_output(None, &text)
}

#[derive(Serialize)]
struct StudyMetadata<'a> {
    version: &'a str,
    config: &'a ExperimentConfig,
    calibrations: &'a [Calibration],
    timing: &'a StudyTiming,
}

fn power_table(
    cfg: &ExperimentConfig,
    format: Format,
    out: Option<&Path>,
    cache: Option<&CalibrationCache>,
) -> CmdResult {
    let tbl = scanalr_core::run_power_study(cfg, cache)?;
    let table_format = match format {
        Format::Csv => TableFormat::Csv,
        Format::Json => TableFormat::Json,
    };
    write_output(out, &render_table(&tbl, table_format)?)?;
    if let (Format::Csv, Some(path)) = (format, out) {
        let mut meta = path.as_os_str().to_owned();
        meta.push(".meta.json");
        let doc = StudyMetadata {
            version: &tbl.version,
            config: &tbl.config,
            calibrations: &tbl.calibrations,
            timing: &tbl.timing,
        };
        write_output(Some(Path::new(&meta)), &to_json(&doc))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FamilyOutput {
    version: &'static str,
    #[serde(flatten)]
    report: FamilyReport,
}

fn inspect_family(n: usize, out: Option<&Path>) -> CmdResult {
    let report = build_condensed_family(n)?.report();
    write_output(
        out,
        &to_json(&FamilyOutput {
            version: VERSION,
            report,
        }),
    )
}

fn bench(
    sizes: &[usize],
    repeats: usize,
    seed: u64,
    format: Format,
    out: Option<&Path>,
) -> CmdResult {
    let report = benchmark_complexity(sizes, repeats, seed)?;
    let text = match format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &report.rows {
                w.serialize(row).map_err(|e| Failure::Io(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
            String::from_utf8(bytes).expect("csv output is utf-8")
        }
    };
    write_output(out, &text)
}
