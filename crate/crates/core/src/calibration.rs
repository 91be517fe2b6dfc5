//! Monte Carlo critical values.
//!
//! Every detector rejects when its statistic is strictly above the critical
//! value. Critical values are order statistics of simulated null statistics:
//! the level-`alpha` value is the `ceil((1 - alpha)(B + 1))`-th smallest of `B`
//! draws, clamped to `B`.
//!
//! The blocked scan gets one critical value per length block, at level
//! `alpha_tilde / (A + l)^2` for block `l`, with `alpha_tilde` tuned by bisection
//! on one stored matrix of null block maxima so that the union of block
//! rejections has empirical level `alpha`.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{BlockMaxima, Detector, StatisticSuite, StatisticValues};
use crate::error::{Error, Result};
use crate::signal_model::{sample_into, CumulativeSums, SeedRecord, SignalSpec};

/// Default offset `A` in the block levels `alpha_tilde / (A + l)^2`.
pub const DEFAULT_BLOCK_OFFSET: u32 = 10;

/// Environment variable naming the on-disk calibration cache.
pub const CACHE_DIR_ENV: &str = "SCANALR_CACHE_DIR";

/// Simulated critical value for a scalar detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub detector: Detector,
    pub n: usize,
    pub alpha: f64,
    #[serde(with = "crate::float_serde")]
    pub value: f64,
    pub mc_samples: usize,
    pub seed: SeedRecord,
    /// One-based rank of `value` among the sorted null draws.
    pub order_index: usize,
}

impl CriticalValues {
    pub fn rejects(&self, statistic: f64) -> bool {
        statistic > self.value
    }
}

/// Per-block critical values of the blocked scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockedCalibration {
    pub n: usize,
    pub alpha: f64,
    pub a_offset: u32,
    pub alpha_tilde: f64,
    /// `q_l` for `l = 1..=l_max + 1`, stored zero-based. `+inf` never rejects.
    #[serde(with = "crate::float_serde::vec")]
    pub q: Vec<f64>,
    pub mc_samples: usize,
    pub seed: SeedRecord,
    /// Empirical joint level on the calibration sample.
    pub achieved_level: f64,
    /// False when no `alpha_tilde` brings the level within `1/B` of `alpha`.
    pub target_reached: bool,
}

/// One-based order index `ceil((1 - alpha)(B + 1))` and whether it was clamped to `B`.
pub fn order_index(alpha: f64, b: usize) -> (usize, bool) {
    let raw = ((1.0 - alpha) * (b as f64 + 1.0)).ceil();
    if raw > b as f64 {
        (b, true)
    } else {
        (raw.max(0.0) as usize, false)
    }
}

/// Level-`alpha` order statistic of an ascending sample.
///
/// `alpha <= 0` gives `+inf` (never reject); an index below one gives `-inf`.
pub fn order_statistic(sorted: &[f64], alpha: f64) -> f64 {
    if alpha <= 0.0 || sorted.is_empty() {
        return f64::INFINITY;
    }
    let (idx, _) = order_index(alpha, sorted.len());
    if idx == 0 {
        f64::NEG_INFINITY
    } else {
        sorted[idx - 1]
    }
}

fn sort_ascending(values: &mut [f64]) {
    values.sort_unstable_by(f64::total_cmp);
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Null statistics for a set of detectors, one entry per replicate.
#[derive(Debug, Clone)]
pub struct NullSample {
    pub n: usize,
    pub seed: SeedRecord,
    pub values: Vec<StatisticValues>,
}

impl NullSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Scalar statistics of one detector, in replicate order.
    pub fn scalar(&self, detector: Detector) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|v| {
                v.scalar(detector)
                    .ok_or_else(|| Error::domain(format!("{detector} was not simulated")))
            })
            .collect()
    }

    pub fn block_maxima(&self) -> Result<Vec<BlockMaxima>> {
        self.values
            .iter()
            .map(|v| {
                v.block_maxima
                    .clone()
                    .ok_or_else(|| Error::domain("blocked scan was not simulated"))
            })
            .collect()
    }
}

/// Evaluates `suite` on `b` pure-noise vectors; replicate `r` uses stream
/// `seed.with_replicate(r)`. Output order does not depend on the thread pool.
pub fn simulate_null(suite: &StatisticSuite, b: usize, seed: SeedRecord) -> Result<NullSample> {
    let n = suite.n();
    let spec = SignalSpec::null(n)?;
    let values = (0..b as u64)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], CumulativeSums::from_values(&[])),
            |(buf, sums), r| {
                sample_into(&spec, seed.with_replicate(r), buf);
                sums.refill(buf);
                suite.evaluate(sums)
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(NullSample { n, seed, values })
}

/// Critical value from already simulated null statistics.
pub fn critical_value_from_sample(
    detector: Detector,
    n: usize,
    alpha: f64,
    mut values: Vec<f64>,
    seed: SeedRecord,
) -> Result<CriticalValues> {
    check_alpha(alpha)?;
    let b = values.len();
    if b == 0 {
        return Err(Error::domain("empty null sample"));
    }
    let (idx, clamped) = order_index(alpha, b);
    if clamped {
        warn!("{detector}: B = {b} is too small for alpha = {alpha}; using the sample maximum");
    }
    sort_ascending(&mut values);
    Ok(CriticalValues {
        detector,
        n,
        alpha,
        value: values[idx.max(1) - 1],
        mc_samples: b,
        seed,
        order_index: idx.max(1),
    })
}

/// Null quantile of an arbitrary statistic. Used by [`null_quantile`] and by
/// tests that substitute a known statistic.
pub fn null_quantile_of<F>(
    detector: Detector,
    n: usize,
    alpha: f64,
    b: usize,
    seed: SeedRecord,
    statistic: F,
) -> Result<CriticalValues>
where
    F: Fn(&CumulativeSums) -> Result<f64> + Sync,
{
    check_alpha(alpha)?;
    if b < 20 {
        return Err(Error::domain(format!(
            "need at least 20 Monte Carlo samples, got {b}"
        )));
    }
    let spec = SignalSpec::null(n)?;
    let values = (0..b as u64)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], CumulativeSums::from_values(&[])),
            |(buf, sums), r| {
                sample_into(&spec, seed.with_replicate(r), buf);
                sums.refill(buf);
                statistic(sums)
            },
        )
        .collect::<Result<Vec<_>>>()?;
    critical_value_from_sample(detector, n, alpha, values, seed)
}

/// Simulated `(1 - alpha)` null quantile of a scalar detector from `b` draws.
///
/// For the blocked scan this is the quantile of the overall maximum, which is
/// just the scan; use [`calibrate_blocked`] for its per-block values.
pub fn null_quantile(
    detector: Detector,
    n: usize,
    alpha: f64,
    b: usize,
    seed: SeedRecord,
) -> Result<CriticalValues> {
    check_alpha(alpha)?;
    if b < 20 {
        return Err(Error::domain(format!(
            "need at least 20 Monte Carlo samples, got {b}"
        )));
    }
    let suite = StatisticSuite::new(n, &[detector])?;
    let sample = simulate_null(&suite, b, seed)?;
    critical_value_from_sample(detector, n, alpha, sample.scalar(detector)?, seed)
}

/// Stored null block maxima with per-block sorted columns.
struct BlockSample {
    rows: Vec<Vec<f64>>,
    sorted_cols: Vec<Vec<f64>>,
    active: Vec<bool>,
}

impl BlockSample {
    fn new(maxima: &[BlockMaxima]) -> Result<Self> {
        let width = maxima
            .first()
            .map(|m| m.values.len())
            .ok_or_else(|| Error::domain("empty null sample"))?;
        if maxima.iter().any(|m| m.values.len() != width) {
            return Err(Error::domain("block maxima rows differ in length"));
        }
        let rows: Vec<Vec<f64>> = maxima.iter().map(|m| m.values.clone()).collect();
        let mut sorted_cols = Vec::with_capacity(width);
        let mut active = Vec::with_capacity(width);
        for c in 0..width {
            let mut col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            sort_ascending(&mut col);
            active.push(col.iter().any(|v| v.is_finite()));
            sorted_cols.push(col);
        }
        Ok(Self {
            rows,
            sorted_cols,
            active,
        })
    }

    fn thresholds(&self, alpha_tilde: f64, a_offset: u32) -> Vec<f64> {
        self.sorted_cols
            .iter()
            .enumerate()
            .map(|(c, col)| {
                if !self.active[c] {
                    return f64::INFINITY;
                }
                let ell = (c + 1) as f64;
                let level = (alpha_tilde / (a_offset as f64 + ell).powi(2)).min(1.0);
                order_statistic(col, level)
            })
            .collect()
    }

    fn level(&self, q: &[f64]) -> f64 {
        let hits = self
            .rows
            .iter()
            .filter(|row| row.iter().zip(q).any(|(m, t)| m > t))
            .count();
        hits as f64 / self.rows.len() as f64
    }
}

/// Tunes `alpha_tilde` on stored null block maxima.
///
/// The empirical level is a nondecreasing step function of `alpha_tilde` with
/// steps of `1/B`. Bisection runs until the bracket's levels differ by at most
/// `1/B`, and the lower end (level `<= alpha`) is kept.
pub fn calibrate_blocked_from_maxima(
    n: usize,
    alpha: f64,
    a_offset: u32,
    maxima: &[BlockMaxima],
    seed: SeedRecord,
) -> Result<BlockedCalibration> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::domain(format!(
            "alpha must lie in [0, 1), got {alpha}"
        )));
    }
    if let Some(m) = maxima.iter().find(|m| m.n != n) {
        return Err(Error::SizeMismatch {
            expected: n,
            actual: m.n,
        });
    }
    let sample = BlockSample::new(maxima)?;
    let b = maxima.len();
    let step = 1.0 / b as f64;

    if alpha == 0.0 {
        return Ok(BlockedCalibration {
            n,
            alpha,
            a_offset,
            alpha_tilde: 0.0,
            q: vec![f64::INFINITY; sample.sorted_cols.len()],
            mc_samples: b,
            seed,
            achieved_level: 0.0,
            target_reached: true,
        });
    }

    // At alpha_tilde = (A + L)^2 every block level is 1, so every row rejects.
    let width = sample.sorted_cols.len() as f64;
    let mut lo = 0.0f64;
    let mut hi = (a_offset as f64 + width).powi(2);
    let mut level_lo = sample.level(&sample.thresholds(lo, a_offset));
    let mut level_hi = sample.level(&sample.thresholds(hi, a_offset));
    for _ in 0..200 {
        if level_hi - level_lo <= step * (1.0 + 1e-9) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let level_mid = sample.level(&sample.thresholds(mid, a_offset));
        if level_mid <= alpha {
            lo = mid;
            level_lo = level_mid;
        } else {
            hi = mid;
            level_hi = level_mid;
        }
    }

    let target_reached = alpha - level_lo <= step * (1.0 + 1e-9);
    if !target_reached {
        warn!(
            "blocked calibration: reached level {level_lo} for target {alpha} (B = {b}); \
             nearest achievable level kept"
        );
    }
    Ok(BlockedCalibration {
        n,
        alpha,
        a_offset,
        alpha_tilde: lo,
        q: sample.thresholds(lo, a_offset),
        mc_samples: b,
        seed,
        achieved_level: level_lo,
        target_reached,
    })
}

/// Simulates `b` null replicates and calibrates the blocked scan.
pub fn calibrate_blocked(
    n: usize,
    alpha: f64,
    a_offset: u32,
    b: usize,
    seed: SeedRecord,
) -> Result<BlockedCalibration> {
    if b < 1000 {
        warn!("blocked calibration with B = {b} < 1000 is unreliable");
    }
    let suite = StatisticSuite::new(n, &[Detector::BlockedScan])?;
    let sample = simulate_null(&suite, b, seed)?;
    calibrate_blocked_from_maxima(n, alpha, a_offset, &sample.block_maxima()?, seed)
}

/// True iff some block maximum exceeds its critical value.
pub fn blocked_reject(bm: &BlockMaxima, cal: &BlockedCalibration) -> Result<bool> {
    if bm.n != cal.n {
        return Err(Error::SizeMismatch {
            expected: cal.n,
            actual: bm.n,
        });
    }
    if bm.values.len() != cal.q.len() {
        return Err(Error::domain("block count differs from calibration"));
    }
    Ok(bm.values.iter().zip(&cal.q).any(|(m, q)| m > q))
}

/// Any calibrated decision rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Calibration {
    Scalar(CriticalValues),
    Blocked(BlockedCalibration),
}

impl Calibration {
    pub fn detector(&self) -> Detector {
        match self {
            Calibration::Scalar(c) => c.detector,
            Calibration::Blocked(_) => Detector::BlockedScan,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Calibration::Scalar(c) => c.n,
            Calibration::Blocked(c) => c.n,
        }
    }

    /// Decision for one set of statistic values.
    pub fn rejects(&self, values: &StatisticValues) -> Result<bool> {
        match self {
            Calibration::Scalar(c) => {
                let stat = values
                    .scalar(c.detector)
                    .ok_or_else(|| Error::domain(format!("{} was not evaluated", c.detector)))?;
                Ok(c.rejects(stat))
            }
            Calibration::Blocked(cal) => {
                let bm = values
                    .block_maxima
                    .as_ref()
                    .ok_or_else(|| Error::domain("blocked scan was not evaluated"))?;
                blocked_reject(bm, cal)
            }
        }
    }

    /// Scalar threshold for reporting; for the blocked scan, the smallest `q_l`.
    pub fn headline_value(&self) -> f64 {
        match self {
            Calibration::Scalar(c) => c.value,
            Calibration::Blocked(c) => c.q.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Parameters that fully determine a calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationKey {
    pub detector: Detector,
    pub n: usize,
    pub alpha: f64,
    pub mc_samples: usize,
    pub seed: SeedRecord,
    pub a_offset: u32,
}

impl CalibrationKey {
    fn file_name(&self) -> String {
        let offset = match self.detector {
            Detector::BlockedScan => format!("_A{}", self.a_offset),
            _ => String::new(),
        };
        format!(
            "{}_n{}_alpha{}_B{}_seed{}-{}{}.json",
            self.detector,
            self.n,
            self.alpha,
            self.mc_samples,
            self.seed.seed,
            self.seed.replicate,
            offset
        )
    }
}

/// Directory of calibration JSON files keyed by the full parameter tuple.
#[derive(Debug, Clone)]
pub struct CalibrationCache {
    dir: PathBuf,
}

impl CalibrationCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Cache at `$SCANALR_CACHE_DIR`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_DIR_ENV).map(Self::new)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CalibrationKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    pub fn load(&self, key: &CalibrationKey) -> Result<Option<Calibration>> {
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        let cal: Calibration = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Ok(Some(cal))
    }

    pub fn store(&self, key: &CalibrationKey, cal: &Calibration) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_for(key);
        let text = serde_json::to_string_pretty(cal).expect("calibration serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Calibrates several detectors from one shared null sample.
///
/// Detectors found in `cache` are loaded; the rest are simulated together and
/// stored back.
pub fn calibrate_all(
    n: usize,
    alpha: f64,
    detectors: &[Detector],
    b: usize,
    seed: SeedRecord,
    a_offset: u32,
    cache: Option<&CalibrationCache>,
) -> Result<Vec<Calibration>> {
    check_alpha(alpha)?;
    let key = |detector| CalibrationKey {
        detector,
        n,
        alpha,
        mc_samples: b,
        seed,
        a_offset,
    };
    let mut found: Vec<Option<Calibration>> = Vec::with_capacity(detectors.len());
    for &d in detectors {
        found.push(match cache {
            Some(c) => c.load(&key(d))?,
            None => None,
        });
    }
    let missing: Vec<Detector> = detectors
        .iter()
        .zip(&found)
        .filter(|(_, f)| f.is_none())
        .map(|(&d, _)| d)
        .collect();
    if !missing.is_empty() {
        if b < 20 {
            return Err(Error::domain(format!(
                "need at least 20 Monte Carlo samples, got {b}"
            )));
        }
        let suite = StatisticSuite::new(n, &missing)?;
        let sample = simulate_null(&suite, b, seed)?;
        for (slot, &d) in found.iter_mut().zip(detectors) {
            if slot.is_some() {
                continue;
            }
            let cal = match d {
                Detector::BlockedScan => Calibration::Blocked(calibrate_blocked_from_maxima(
                    n,
                    alpha,
                    a_offset,
                    &sample.block_maxima()?,
                    seed,
                )?),
                _ => Calibration::Scalar(critical_value_from_sample(
                    d,
                    n,
                    alpha,
                    sample.scalar(d)?,
                    seed,
                )?),
            };
            if let Some(c) = cache {
                c.store(&key(d), &cal)?;
            }
            *slot = Some(cal);
        }
    }
    Ok(found
        .into_iter()
        .map(|c| c.expect("filled above"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(s: u64) -> SeedRecord {
        SeedRecord::new(s, 0)
    }

    #[test]
    fn order_index_rule() {
        assert_eq!(order_index(0.05, 19), (19, false));
        assert_eq!(order_index(0.05, 10_000), (9501, false));
        assert_eq!(order_index(0.01, 20), (20, true));
        let sorted: Vec<f64> = (1..=19).map(f64::from).collect();
        assert_eq!(order_statistic(&sorted, 0.05), 19.0);
        assert_eq!(order_statistic(&sorted, 0.0), f64::INFINITY);
        assert_eq!(order_statistic(&sorted, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn constant_statistic_gives_constant_quantile() {
        for alpha in [0.01, 0.05, 0.5] {
            let cv = null_quantile_of(Detector::Scan, 10, alpha, 50, seed(1), |_| Ok(2.5)).unwrap();
            assert_eq!(cv.value, 2.5);
        }
    }

    #[test]
    fn nineteen_draws_at_five_percent_is_the_maximum() {
        let cv = null_quantile(Detector::Scan, 30, 0.05, 20, seed(3)).unwrap();
        let draws = {
            let suite = StatisticSuite::new(30, &[Detector::Scan]).unwrap();
            simulate_null(&suite, 20, seed(3))
                .unwrap()
                .scalar(Detector::Scan)
                .unwrap()
        };
        // B = 20: index ceil(0.95 * 21) = 20, the maximum
        assert_eq!(cv.value, draws.iter().copied().fold(f64::MIN, f64::max));
        let cv19 =
            critical_value_from_sample(Detector::Scan, 30, 0.05, draws[..19].to_vec(), seed(3))
                .unwrap();
        assert_eq!(cv19.order_index, 19);
        assert_eq!(
            cv19.value,
            draws[..19].iter().copied().fold(f64::MIN, f64::max)
        );
    }

    #[test]
    fn quantile_input_validation() {
        assert!(null_quantile(Detector::Scan, 10, 0.05, 19, seed(1)).is_err());
        assert!(null_quantile(Detector::Scan, 10, 0.0, 100, seed(1)).is_err());
        assert!(null_quantile(Detector::Scan, 10, 1.0, 100, seed(1)).is_err());
    }

    #[test]
    fn quantile_is_deterministic_and_monotone_in_alpha() {
        let suite = StatisticSuite::new(40, &[Detector::PenalizedScan]).unwrap();
        let a = simulate_null(&suite, 300, seed(9)).unwrap();
        let b = simulate_null(&suite, 300, seed(9)).unwrap();
        assert_eq!(a.values, b.values);
        let draws = a.scalar(Detector::PenalizedScan).unwrap();
        let mut prev = f64::INFINITY;
        for alpha in [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 0.9] {
            let cv = critical_value_from_sample(
                Detector::PenalizedScan,
                40,
                alpha,
                draws.clone(),
                seed(9),
            )
            .unwrap();
            assert!(cv.value <= prev);
            prev = cv.value;
        }
    }

    fn synthetic_maxima(
        n: usize,
        b: usize,
        cols: usize,
        active: &[usize],
        seed: u64,
    ) -> Vec<BlockMaxima> {
        use rand::Rng;
        let mut rng = SeedRecord::new(seed, 0).rng();
        (0..b)
            .map(|_| BlockMaxima {
                n,
                values: (0..cols)
                    .map(|c| {
                        if active.contains(&c) {
                            rng.random::<f64>()
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn blocked_alpha_zero_never_rejects() {
        let maxima = synthetic_maxima(100, 500, 4, &[0, 1, 2, 3], 5);
        let cal = calibrate_blocked_from_maxima(100, 0.0, 10, &maxima, seed(5)).unwrap();
        assert_eq!(cal.alpha_tilde, 0.0);
        assert!(cal.q.iter().all(|&q| q == f64::INFINITY));
        assert!(maxima.iter().all(|m| !blocked_reject(m, &cal).unwrap()));
    }

    #[test]
    fn blocked_single_block_reduces_to_one_quantile() {
        let b = 1000;
        let maxima = synthetic_maxima(64, b, 3, &[0], 17);
        let cal = calibrate_blocked_from_maxima(64, 0.05, 10, &maxima, seed(17)).unwrap();
        let mut col: Vec<f64> = maxima.iter().map(|m| m.values[0]).collect();
        col.sort_by(f64::total_cmp);
        // largest level <= alpha on B draws: exactly floor(alpha B) exceedances
        assert!((cal.achieved_level - 0.05).abs() < 1e-12);
        assert_eq!(cal.q[0], col[b - 50 - 1]);
        assert!(cal.q[1].is_infinite() && cal.q[2].is_infinite());
        // level alpha_tilde / 121 on the single block is about alpha
        let block_level = cal.alpha_tilde / 121.0;
        assert!(
            (block_level - 0.05).abs() <= 2.0 / b as f64,
            "{block_level}"
        );
        // within one rank of the plain order-statistic quantile
        let direct =
            critical_value_from_sample(Detector::Scan, 64, 0.05, col.clone(), seed(17)).unwrap();
        let rank = col.iter().position(|&v| v == cal.q[0]).unwrap() + 1;
        assert!(rank.abs_diff(direct.order_index) <= 1);
    }

    #[test]
    fn blocked_level_is_monotone_in_alpha_tilde() {
        let maxima = synthetic_maxima(100, 400, 5, &[0, 1, 2, 3, 4], 23);
        let sample = BlockSample::new(&maxima).unwrap();
        let mut prev = 0.0;
        for i in 0..=200 {
            let at = i as f64 * 225.0 / 200.0;
            let lvl = sample.level(&sample.thresholds(at, 10));
            assert!(lvl >= prev);
            prev = lvl;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn blocked_calibration_hits_target_on_its_sample() {
        let maxima = synthetic_maxima(100, 2000, 6, &[0, 1, 2, 3, 4, 5], 29);
        for alpha in [0.01, 0.05, 0.2] {
            let cal = calibrate_blocked_from_maxima(100, alpha, 10, &maxima, seed(29)).unwrap();
            assert!(cal.target_reached);
            assert!(cal.achieved_level <= alpha + 1e-12);
            assert!(alpha - cal.achieved_level <= 1.0 / 2000.0 + 1e-12);
            let hits = maxima
                .iter()
                .filter(|m| blocked_reject(m, &cal).unwrap())
                .count();
            assert!((hits as f64 / 2000.0 - cal.achieved_level).abs() < 1e-12);
        }
    }

    #[test]
    fn blocked_reject_rules() {
        let cal = BlockedCalibration {
            n: 10,
            alpha: 0.05,
            a_offset: 10,
            alpha_tilde: 1.0,
            q: vec![1.0, 2.0, 3.0],
            mc_samples: 100,
            seed: seed(0),
            achieved_level: 0.05,
            target_reached: true,
        };
        let bm = |values: Vec<f64>| BlockMaxima { n: 10, values };
        assert!(!blocked_reject(&bm(vec![f64::NEG_INFINITY; 3]), &cal).unwrap());
        assert!(!blocked_reject(&bm(vec![1.0, 2.0, 3.0]), &cal).unwrap());
        assert!(blocked_reject(&bm(vec![0.0, 2.0 + 1e-12, 0.0]), &cal).unwrap());
        let wrong = BlockMaxima {
            n: 11,
            values: vec![0.0; 3],
        };
        assert!(matches!(
            blocked_reject(&wrong, &cal),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn calibration_json_round_trip_and_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CalibrationCache::new(dir.path());
        let dets = [Detector::Scan, Detector::BlockedScan];
        let first = calibrate_all(32, 0.1, &dets, 200, seed(4), 10, Some(&cache)).unwrap();
        let files = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(files, 2);
        let second = calibrate_all(32, 0.1, &dets, 200, seed(4), 10, Some(&cache)).unwrap();
        assert_eq!(first, second);
        let uncached = calibrate_all(32, 0.1, &dets, 200, seed(4), 10, None).unwrap();
        assert_eq!(first, uncached);
        // a different tuple is a different file
        calibrate_all(32, 0.1, &dets, 201, seed(4), 10, Some(&cache)).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 4);
    }
}
