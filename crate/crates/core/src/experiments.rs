//! Power studies and complexity benchmarks.

use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_all, Calibration, CalibrationCache, DEFAULT_BLOCK_OFFSET};
use crate::detectors::{
    build_condensed_family, condensed_alr_counted, Detector, FullFamilyKernel, StatisticSuite,
};
use crate::error::{Error, Result};
use crate::signal_model::{
    make_signal, sample, sample_into, CumulativeSums, IntervalIndex, SeedRecord, SignalSpec,
};

const TAG_CALIBRATION: u64 = 0xC411_B000;
const TAG_NOISE: u64 = 0x9017_5E00;
const TAG_DESIGN: u64 = 0xDE51_6000;

/// Signal grid of a power study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SignalGrid {
    /// One norm, one column per spatial extent.
    FixedNorm { norm: f64, scales: Vec<f64> },
    /// One column per norm; the extent of each replicate is drawn from U(0, 1).
    RandomScale { norms: Vec<f64> },
}

impl SignalGrid {
    pub fn len(&self) -> usize {
        match self {
            SignalGrid::FixedNorm { scales, .. } => scales.len(),
            SignalGrid::RandomScale { norms } => norms.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column values: scales or norms.
    pub fn values(&self) -> &[f64] {
        match self {
            SignalGrid::FixedNorm { scales, .. } => scales,
            SignalGrid::RandomScale { norms } => norms,
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_offset() -> u32 {
    DEFAULT_BLOCK_OFFSET
}

/// A power study, as read from a TOML config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub alpha: f64,
    pub detectors: Vec<Detector>,
    pub signal_grid: SignalGrid,
    /// Uniform random placement of the support; centered otherwise.
    #[serde(default = "default_true")]
    pub random_location: bool,
    pub b_crit: usize,
    pub b_power: usize,
    pub seed: u64,
    #[serde(default = "default_offset")]
    pub a_offset: u32,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 3 {
            return bad(format!("n must be at least 3, got {}", self.n));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let Some(d) = self
            .detectors
            .iter()
            .enumerate()
            .find_map(|(i, d)| self.detectors[..i].contains(d).then_some(d))
        {
            return bad(format!("detector {d} is listed twice"));
        }
        if self.b_crit < 100 || self.b_power < 100 {
            return bad("b_crit and b_power must be at least 100".into());
        }
        match &self.signal_grid {
            SignalGrid::FixedNorm { norm, scales } => {
                if !norm.is_finite() || *norm < 0.0 {
                    return bad(format!("norm must be >= 0, got {norm}"));
                }
                if let Some(s) = scales.iter().find(|&&s| !(s > 0.0 && s <= 1.0)) {
                    return bad(format!("scales must lie in (0, 1], got {s}"));
                }
            }
            SignalGrid::RandomScale { norms } => {
                if let Some(v) = norms.iter().find(|&&v| !v.is_finite() || v < 0.0) {
                    return bad(format!("norms must be >= 0, got {v}"));
                }
            }
        }
        Ok(())
    }
}

/// Support length for a real extent: `max(1, round(scale n))`, at most `n`.
pub fn support_length(scale: f64, n: usize) -> usize {
    ((scale * n as f64).round() as usize).clamp(1, n)
}

/// One power estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub detector: Detector,
    pub grid_value: f64,
    pub power: f64,
    pub stderr: f64,
    pub n: usize,
    pub alpha: f64,
    #[serde(rename = "B_power")]
    pub b_power: usize,
    pub seed: u64,
}

impl PowerRow {
    fn new(detector: Detector, grid_value: f64, rejections: u64, cfg: &ExperimentConfig) -> Self {
        let p = rejections as f64 / cfg.b_power as f64;
        Self {
            detector,
            grid_value,
            power: p,
            stderr: (p * (1.0 - p) / cfg.b_power as f64).sqrt(),
            n: cfg.n,
            alpha: cfg.alpha,
            b_power: cfg.b_power,
            seed: cfg.seed,
        }
    }
}

/// Wall-clock seconds spent in each phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyTiming {
    pub calibration_seconds: f64,
    pub power_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub version: String,
    pub config: ExperimentConfig,
    pub calibrations: Vec<Calibration>,
    pub rows: Vec<PowerRow>,
    pub timing: StudyTiming,
}

impl PowerTable {
    pub fn get(&self, detector: Detector, grid_value: f64) -> Option<&PowerRow> {
        self.rows
            .iter()
            .find(|r| r.detector == detector && r.grid_value == grid_value)
    }
}

/// Stream keys derived from the study seed. Calibration, noise and design
/// (location, extent) draws never share a stream.
pub fn calibration_seed(seed: u64) -> SeedRecord {
    SeedRecord::new(seed, 0).derive(TAG_CALIBRATION)
}

fn noise_seed(seed: u64, column: usize) -> SeedRecord {
    SeedRecord::new(seed, 0).derive(TAG_NOISE + column as u64)
}

fn design_seed(seed: u64, column: usize) -> SeedRecord {
    SeedRecord::new(seed, 0).derive(TAG_DESIGN + column as u64)
}

/// Signal for replicate `r` of grid column `column`.
pub fn replicate_signal(cfg: &ExperimentConfig, column: usize, r: u64) -> Result<SignalSpec> {
    let n = cfg.n;
    let mut rng = design_seed(cfg.seed, column).with_replicate(r).rng();
    let (norm, scale) = match &cfg.signal_grid {
        SignalGrid::FixedNorm { norm, scales } => (*norm, scales[column]),
        SignalGrid::RandomScale { norms } => (norms[column], rng.random::<f64>()),
    };
    let len = support_length(scale, n);
    let j = if cfg.random_location {
        rng.random_range(0..=n - len)
    } else {
        (n - len) / 2
    };
    make_signal(n, norm, IntervalIndex::new(j, j + len, n)?, true)
}

/// Simulates critical values, then power at every grid column.
pub fn run_power_study(
    cfg: &ExperimentConfig,
    cache: Option<&CalibrationCache>,
) -> Result<PowerTable> {
    cfg.validate()?;
    let detectors = &cfg.detectors;

    let t0 = Instant::now();
    let calibrations = if detectors.is_empty() {
        Vec::new()
    } else {
        calibrate_all(
            cfg.n,
            cfg.alpha,
            detectors,
            cfg.b_crit,
            calibration_seed(cfg.seed),
            cfg.a_offset,
            cache,
        )?
    };
    let calibration_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut rows = Vec::with_capacity(detectors.len() * cfg.signal_grid.len());
    if !detectors.is_empty() {
        let suite = StatisticSuite::new(cfg.n, detectors)?;
        let per_column = (0..cfg.signal_grid.len())
            .map(|column| column_rejections(cfg, &suite, &calibrations, column))
            .collect::<Result<Vec<_>>>()?;
        for (d, &det) in detectors.iter().enumerate() {
            for (counts, &value) in per_column.iter().zip(cfg.signal_grid.values()) {
                rows.push(PowerRow::new(det, value, counts[d], cfg));
            }
        }
    }
    let power_seconds = t1.elapsed().as_secs_f64();

    Ok(PowerTable {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        calibrations,
        rows,
        timing: StudyTiming {
            calibration_seconds,
            power_seconds,
        },
    })
}

fn column_rejections(
    cfg: &ExperimentConfig,
    suite: &StatisticSuite,
    calibrations: &[Calibration],
    column: usize,
) -> Result<Vec<u64>> {
    let n = cfg.n;
    let noise = noise_seed(cfg.seed, column);
    let zero = || vec![0u64; calibrations.len()];
    (0..cfg.b_power as u64)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], CumulativeSums::from_values(&[])),
            |(buf, sums), r| -> Result<Vec<u64>> {
                let spec = replicate_signal(cfg, column, r)?;
                sample_into(&spec, noise.with_replicate(r), buf);
                sums.refill(buf);
                let values = suite.evaluate(sums)?;
                calibrations
                    .iter()
                    .map(|c| c.rejects(&values).map(u64::from))
                    .collect()
            },
        )
        .try_reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            Ok(a)
        })
}

/// Output format of [`emit_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::Parse(format!("unknown format '{other}'"))),
        }
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "detector",
    "grid_value",
    "power",
    "stderr",
    "n",
    "alpha",
    "B_power",
    "seed",
];

/// Renders the table as CSV (one row per cell) or JSON (rows plus metadata).
pub fn render_table(tbl: &PowerTable, format: TableFormat) -> Result<String> {
    match format {
        TableFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::Parse(e.to_string());
            w.write_record(CSV_HEADER).map_err(csv_err)?;
            for row in &tbl.rows {
                w.serialize(row).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        TableFormat::Json => Ok(serde_json::to_string_pretty(tbl).expect("table serializes")),
    }
}

pub fn emit_table(tbl: &PowerTable, format: TableFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = render_table(tbl, format)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses rows written by [`emit_table`] in CSV form.
pub fn parse_csv_rows(text: &str) -> Result<Vec<PowerRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

/// Timing of one `n` in a complexity benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub n: usize,
    pub condensed_family_size: u64,
    pub condensed_evaluations: u64,
    /// Median seconds per condensed ALR evaluation (cumulative sums excluded).
    pub condensed_seconds: f64,
    pub full_evaluations: Option<u64>,
    pub alr_seconds: Option<f64>,
    /// `#I_app / (n ln^2 n)`
    pub family_ratio_nlog2n: f64,
    /// `condensed_seconds / (n ln^2 n)`
    pub condensed_seconds_per_nlog2n: f64,
    /// `alr_seconds / n^2`
    pub alr_seconds_per_n2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub version: String,
    pub repeats: usize,
    pub seed: u64,
    pub rows: Vec<ComplexityRow>,
}

impl ComplexityReport {
    pub fn row(&self, n: usize) -> Option<&ComplexityRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

/// Largest `n` at which the `O(n^2)` ALR is timed.
pub const ALR_BENCH_LIMIT: usize = 20_000;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Times single evaluations of the condensed ALR (and the ALR up to
/// [`ALR_BENCH_LIMIT`]) on pure-noise data.
pub fn benchmark_complexity(ns: &[usize], repeats: usize, seed: u64) -> Result<ComplexityReport> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("benchmark sizes must be strictly ascending"));
    }
    let repeats = repeats.max(1);
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let fam = build_condensed_family(n)?;
        let y = sample(&SignalSpec::null(n)?, SeedRecord::new(seed, n as u64));
        let s = CumulativeSums::from_values(&y.values);

        let mut times = Vec::with_capacity(repeats);
        let mut evaluations = 0;
        for _ in 0..repeats {
            let t = Instant::now();
            let (v, count) = condensed_alr_counted(&s, &fam)?;
            times.push(t.elapsed().as_secs_f64());
            std::hint::black_box(v);
            evaluations = count;
        }
        let condensed_seconds = median(times);

        let (full_evaluations, alr_seconds) = if n <= ALR_BENCH_LIMIT {
            let kernel = FullFamilyKernel::new(n)?;
            let times = (0..repeats)
                .map(|_| {
                    let t = Instant::now();
                    let stats = kernel.evaluate(&s, true)?;
                    std::hint::black_box(stats.log_alr);
                    Ok(t.elapsed().as_secs_f64())
                })
                .collect::<Result<Vec<_>>>()?;
            (Some((n as u64) * (n as u64 + 1) / 2), Some(median(times)))
        } else {
            (None, None)
        };

        let ln = (n as f64).ln();
        let nlog2n = n as f64 * ln * ln;
        rows.push(ComplexityRow {
            n,
            condensed_family_size: fam.total_cardinality,
            condensed_evaluations: evaluations,
            condensed_seconds,
            full_evaluations,
            alr_seconds,
            family_ratio_nlog2n: fam.total_cardinality as f64 / nlog2n,
            condensed_seconds_per_nlog2n: condensed_seconds / nlog2n,
            alr_seconds_per_n2: alr_seconds.map(|t| t / (n as f64 * n as f64)),
        });
    }
    Ok(ComplexityReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        repeats,
        seed,
        rows,
    })
}

/// Scales of the fixed-norm study, 0.01 then 0.05 to 0.5 in steps of 0.05.
pub fn fixed_norm_scales() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]
}

/// Norms of the random-extent study.
pub fn random_scale_norms() -> Vec<f64> {
    vec![0.02, 0.025, 0.03, 0.035, 0.04, 0.045, 0.05]
}

/// Fixed-norm study at `n = 10000`, norm 0.04, all five detectors.
pub fn fixed_norm_study(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        n: 10_000,
        alpha: 0.05,
        detectors: Detector::ALL.to_vec(),
        signal_grid: SignalGrid::FixedNorm {
            norm: 0.04,
            scales: fixed_norm_scales(),
        },
        random_location: true,
        b_crit: 10_000,
        b_power: 2000,
        seed,
        a_offset: DEFAULT_BLOCK_OFFSET,
    }
}

/// Random-extent study at `n = 10000`, all five detectors.
pub fn random_scale_study(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        signal_grid: SignalGrid::RandomScale {
            norms: random_scale_norms(),
        },
        ..fixed_norm_study(seed)
    }
}
