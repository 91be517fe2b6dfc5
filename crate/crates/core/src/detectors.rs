//! The five detection statistics and the condensed interval family.
//!
//! Every statistic is a reduction over `Y_n(I)` for `I` in some interval
//! family. The full-family statistics (scan, ALR, penalized scan, blocked scan)
//! share one `O(n^2)` pass; the condensed ALR touches only its own family.
//!
//! ALR values are returned on the log scale. Under strong signals `Y^2/2`
//! passes 700 and the plain sum would overflow.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval_stats::{FamilyLabel, IntervalFamily};
use crate::lse::{LogSumExp, TILE};
use crate::signal_model::CumulativeSums;

/// Identifier of a detection statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Scan,
    Alr,
    CondensedAlr,
    PenalizedScan,
    BlockedScan,
}

impl Detector {
    pub const ALL: [Detector; 5] = [
        Detector::Scan,
        Detector::Alr,
        Detector::CondensedAlr,
        Detector::PenalizedScan,
        Detector::BlockedScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Detector::Scan => "scan",
            Detector::Alr => "alr",
            Detector::CondensedAlr => "condensed_alr",
            Detector::PenalizedScan => "penalized_scan",
            Detector::BlockedScan => "blocked_scan",
        }
    }

    /// Whether evaluation needs the `O(n^2)` pass over all intervals.
    pub fn needs_full_family(self) -> bool {
        !matches!(self, Detector::CondensedAlr)
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "scan" => Ok(Detector::Scan),
            "alr" => Ok(Detector::Alr),
            "condensed_alr" | "condensed" => Ok(Detector::CondensedAlr),
            "penalized_scan" | "penalized" => Ok(Detector::PenalizedScan),
            "blocked_scan" | "blocked" => Ok(Detector::BlockedScan),
            other => Err(Error::Parse(format!("unknown detector '{other}'"))),
        }
    }
}

/// Number of length blocks, `ceil(log2(n / ln n))`.
pub fn ell_max(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::domain(format!("length blocks need n >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok((nf / nf.ln()).log2().ceil().max(1.0) as usize)
}

/// `m_l = n 2^{-l}`, exact in floating point.
#[inline]
pub fn block_scale(n: usize, ell: usize) -> f64 {
    n as f64 * 0.5f64.powi(ell as i32)
}

/// Smallest integer length strictly above `m`.
#[inline]
fn first_len_above(m: f64) -> usize {
    m.floor() as usize + 1
}

/// Largest integer length not above `m`.
#[inline]
fn last_len_within(m: f64) -> usize {
    m.floor() as usize
}

/// Length blocks of the blocked scan: block `l <= l_max` holds all intervals with
/// `m_l < k - j <= m_{l-1}` (`m_0 = n`), block `l_max + 1` the rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanBlocks {
    pub n: usize,
    pub ell_max: usize,
    pub families: Vec<IntervalFamily>,
}

impl ScanBlocks {
    pub fn new(n: usize) -> Result<Self> {
        let ell_max = ell_max(n)?;
        let mut families = Vec::with_capacity(ell_max + 1);
        for ell in 1..=ell_max {
            let lo = first_len_above(block_scale(n, ell));
            let hi = last_len_within(block_scale(n, ell - 1));
            families.push(IntervalFamily::new(
                FamilyLabel::ScanBlock(ell),
                n,
                1,
                lo,
                hi,
            ));
        }
        let hi = last_len_within(block_scale(n, ell_max));
        families.push(IntervalFamily::new(
            FamilyLabel::ScanBlock(ell_max + 1),
            n,
            1,
            1,
            hi,
        ));
        Ok(Self {
            n,
            ell_max,
            families,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.families.len()
    }

    /// Zero-based block index for each length `0..=n` (`usize::MAX` at length 0).
    fn block_of_len(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.n + 1];
        for (b, fam) in self.families.iter().enumerate() {
            if fam.is_empty() {
                continue;
            }
            for slot in &mut out[fam.min_len..=fam.max_len] {
                *slot = b;
            }
        }
        out
    }
}

/// Per-block scan maxima `M_{n,l}`, `l = 1..=l_max + 1` (stored zero-based).
/// Empty blocks hold `-inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMaxima {
    pub n: usize,
    #[serde(with = "crate::float_serde::vec")]
    pub values: Vec<f64>,
}

impl BlockMaxima {
    /// Largest entry; equals the scan statistic.
    pub fn overall(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub use crate::lse::logsumexp;

/// Scale penalty `sqrt(2 log(e n / len))`.
#[inline]
pub fn scale_penalty(n: usize, len: usize) -> f64 {
    (2.0 * (1.0 + (n as f64 / len as f64).ln())).sqrt()
}

/// Everything the full-family pass produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullFamilyStats {
    pub scan: f64,
    /// `log A_n`; `None` when the pass skipped the exponentials.
    pub log_alr: Option<f64>,
    pub penalized: f64,
    pub block_maxima: Option<BlockMaxima>,
}

/// Precomputed tables for the `O(n^2)` pass at a fixed `n`.
///
/// Intervals are visited length by length. For each length the statistics are
/// reduced over all left endpoints, so the scale penalty and block index are
/// per-chunk constants and the log-sum-exp is merged once per length.
#[derive(Debug, Clone)]
pub struct FullFamilyKernel {
    n: usize,
    sqrt_len: Vec<f64>,
    penalty: Vec<f64>,
    blocks: Option<(ScanBlocks, Vec<usize>)>,
}

impl FullFamilyKernel {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("sample size must be at least 1"));
        }
        let sqrt_len = (0..=n).map(|l| (l as f64).sqrt()).collect();
        let penalty = (0..=n)
            .map(|l| {
                if l == 0 {
                    f64::INFINITY
                } else {
                    scale_penalty(n, l)
                }
            })
            .collect();
        let blocks = if n >= 2 {
            let b = ScanBlocks::new(n)?;
            let idx = b.block_of_len();
            Some((b, idx))
        } else {
            None
        };
        Ok(Self {
            n,
            sqrt_len,
            penalty,
            blocks,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scan_blocks(&self) -> Option<&ScanBlocks> {
        self.blocks.as_ref().map(|(b, _)| b)
    }

    /// One pass over all `n(n+1)/2` intervals. `with_alr` adds the exponentials.
    pub fn evaluate(&self, s: &CumulativeSums, with_alr: bool) -> Result<FullFamilyStats> {
        check_n(self.n, s.n())?;
        let n = self.n;
        let sums = s.as_slice();
        let mut scan = 0.0f64;
        let mut penalized = f64::NEG_INFINITY;
        let mut lse = LogSumExp::new();
        let mut block_max = self
            .blocks
            .as_ref()
            .map(|(b, _)| vec![f64::NEG_INFINITY; b.num_blocks()]);
        let mut terms = [0.0f64; TILE];

        for len in 1..=n {
            let root = self.sqrt_len[len];
            let count = n - len + 1;
            let mut local = 0.0f64;
            if with_alr {
                let mut start = 0;
                while start < count {
                    let end = (start + TILE).min(count);
                    let lo = &sums[start..end];
                    let hi = &sums[start + len..end + len];
                    let tile = &mut terms[..end - start];
                    for ((t, &a), &b) in tile.iter_mut().zip(lo).zip(hi) {
                        let y = (b - a) / root;
                        local = local.max(y.abs());
                        *t = 0.5 * y * y;
                    }
                    lse.merge_tile(tile);
                    start = end;
                }
            } else {
                for (&a, &b) in sums[..count].iter().zip(&sums[len..]) {
                    local = local.max(((b - a) / root).abs());
                }
            }
            scan = scan.max(local);
            penalized = penalized.max(local - self.penalty[len]);
            if let (Some(bm), Some((_, idx))) = (block_max.as_mut(), self.blocks.as_ref()) {
                let b = idx[len];
                bm[b] = bm[b].max(local);
            }
        }

        let log_alr = with_alr.then(|| lse.value() - 2.0 * (n as f64).ln());
        Ok(FullFamilyStats {
            scan,
            log_alr,
            penalized,
            block_maxima: block_max.map(|values| BlockMaxima { n, values }),
        })
    }
}

fn check_n(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, actual })
    }
}

/// Scan statistic `M_n = max |Y_n(I)|` over all intervals.
pub fn scan(s: &CumulativeSums) -> Result<f64> {
    Ok(FullFamilyKernel::new(s.n())?.evaluate(s, false)?.scan)
}

/// `log A_n`, with `A_n = n^{-2} sum_I exp(Y_n(I)^2 / 2)` over all intervals.
pub fn log_alr(s: &CumulativeSums) -> Result<f64> {
    let stats = FullFamilyKernel::new(s.n())?.evaluate(s, true)?;
    Ok(stats.log_alr.expect("requested"))
}

/// Penalized scan `max (|Y_n(I)| - sqrt(2 log(e n / (k - j))))`. May be negative.
pub fn penalized_scan(s: &CumulativeSums) -> Result<f64> {
    Ok(FullFamilyKernel::new(s.n())?.evaluate(s, false)?.penalized)
}

/// Scan maxima per length block. Needs `n >= 2`.
pub fn block_maxima(s: &CumulativeSums) -> Result<BlockMaxima> {
    if s.n() < 2 {
        return Err(Error::domain("block maxima need n >= 2"));
    }
    let stats = FullFamilyKernel::new(s.n())?.evaluate(s, false)?;
    Ok(stats.block_maxima.expect("n >= 2"))
}

/// One length block of the condensed family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxBlock {
    pub ell: usize,
    /// `m_l = n 2^{-l}`; member lengths satisfy `m_l < k - j <= 2 m_l`.
    pub m_ell: f64,
    /// Grid spacing for both endpoints.
    pub d_ell: usize,
    pub intervals: IntervalFamily,
}

/// The approximating family of the condensed ALR: coarse-grid blocks for long
/// intervals plus every interval of at most `m_{l_max}` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedFamily {
    pub n: usize,
    pub ell_max: usize,
    pub blocks: Vec<ApproxBlock>,
    pub small: IntervalFamily,
    pub total_cardinality: u64,
}

/// `d_l = ceil(sqrt(m_l) l^{4/5} / ln n)`.
pub fn grid_spacing(n: usize, ell: usize) -> usize {
    let m = block_scale(n, ell);
    let d = (m.sqrt() * (ell as f64).powf(0.8) / (n as f64).ln()).ceil();
    (d as usize).max(1)
}

/// Builds the condensed family. Needs `n >= 3`.
pub fn build_condensed_family(n: usize) -> Result<CondensedFamily> {
    if n < 3 {
        return Err(Error::domain(format!(
            "condensed family needs n >= 3, got {n}"
        )));
    }
    let ell_max = ell_max(n)?;
    let mut blocks = Vec::with_capacity(ell_max);
    for ell in 1..=ell_max {
        let m_ell = block_scale(n, ell);
        let d_ell = grid_spacing(n, ell);
        let intervals = IntervalFamily::new(
            FamilyLabel::Approx(ell),
            n,
            d_ell,
            first_len_above(m_ell),
            last_len_within(2.0 * m_ell),
        );
        blocks.push(ApproxBlock {
            ell,
            m_ell,
            d_ell,
            intervals,
        });
    }
    let small_max = last_len_within(block_scale(n, ell_max));
    let small = IntervalFamily::new(FamilyLabel::Small, n, 1, 1, small_max);

    // Length ranges must tile without overlap: (m_l, 2 m_l] per block, small below.
    for pair in blocks.windows(2) {
        assert!(
            pair[1].intervals.max_len < pair[0].intervals.min_len || pair[1].intervals.is_empty()
        );
    }
    if let Some(last) = blocks.last() {
        assert!(small.max_len < last.intervals.min_len || small.is_empty());
    }

    let total_cardinality = blocks
        .iter()
        .map(|b| b.intervals.cardinality())
        .sum::<u64>()
        + small.cardinality();
    Ok(CondensedFamily {
        n,
        ell_max,
        blocks,
        small,
        total_cardinality,
    })
}

impl CondensedFamily {
    /// Sub-families in evaluation order: blocks `1..=l_max`, then small.
    pub fn families(&self) -> impl Iterator<Item = &IntervalFamily> {
        self.blocks
            .iter()
            .map(|b| &b.intervals)
            .chain(std::iter::once(&self.small))
    }

    pub fn report(&self) -> FamilyReport {
        let log_n = (self.n as f64).ln();
        FamilyReport {
            n: self.n,
            ell_max: self.ell_max,
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockReport {
                    ell: b.ell,
                    m_ell: b.m_ell,
                    d_ell: b.d_ell,
                    min_len: b.intervals.min_len,
                    max_len: b.intervals.max_len,
                    count: b.intervals.cardinality(),
                })
                .collect(),
            small: SmallReport {
                max_len: self.small.max_len,
                count: self.small.cardinality(),
            },
            total: self.total_cardinality,
            bound_total: 9.0 * self.n as f64 * log_n * log_n,
            bound_small: self.n as f64 * log_n,
        }
    }
}

/// Diagnostic summary of a [`CondensedFamily`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub n: usize,
    pub ell_max: usize,
    pub blocks: Vec<BlockReport>,
    pub small: SmallReport,
    pub total: u64,
    /// `9 n (ln n)^2`
    pub bound_total: f64,
    /// `n ln n`
    pub bound_small: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub ell: usize,
    pub m_ell: f64,
    pub d_ell: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallReport {
    pub max_len: usize,
    pub count: u64,
}

/// `log A_{n,cond}`: log of the mean of `exp(Y^2/2)` over the condensed family.
pub fn condensed_alr(s: &CumulativeSums, fam: &CondensedFamily) -> Result<f64> {
    condensed_alr_counted(s, fam).map(|(v, _)| v)
}

/// [`condensed_alr`] plus the number of interval statistics evaluated.
pub fn condensed_alr_counted(s: &CumulativeSums, fam: &CondensedFamily) -> Result<(f64, u64)> {
    check_n(fam.n, s.n())?;
    let mut grid = Vec::new();
    let mut lse = LogSumExp::new();
    let mut evaluated = 0u64;
    for sub in fam.families() {
        evaluated += accumulate_family(s, sub, &mut grid, &mut lse);
    }
    Ok((lse.value() - (fam.total_cardinality as f64).ln(), evaluated))
}

/// Merges `Y^2/2` over one grid family into `lse`, one length at a time.
///
/// Prefix sums at the grid points are first gathered into a contiguous buffer,
/// so a length of `t` grid steps reads `g[i]` and `g[i + t]` sequentially.
fn accumulate_family(
    s: &CumulativeSums,
    fam: &IntervalFamily,
    grid: &mut Vec<f64>,
    lse: &mut LogSumExp,
) -> u64 {
    if fam.is_empty() {
        return 0;
    }
    let d = fam.step;
    let g: &[f64] = if d == 1 {
        s.as_slice()
    } else {
        grid.clear();
        grid.extend(s.as_slice().iter().step_by(d));
        grid
    };
    let points = g.len() - 1;
    let mut terms = [0.0f64; TILE];
    let mut evaluated = 0u64;
    for t in fam.min_len.div_ceil(d)..=fam.max_len / d {
        // Y^2 / 2 = diff^2 / (2 len)
        let scale = 0.5 / (t * d) as f64;
        let count = points - t + 1;
        let mut start = 0;
        while start < count {
            let end = (start + TILE).min(count);
            let tile = &mut terms[..end - start];
            for ((v, &a), &b) in tile
                .iter_mut()
                .zip(&g[start..end])
                .zip(&g[start + t..end + t])
            {
                let diff = b - a;
                *v = diff * diff * scale;
            }
            lse.merge_tile(tile);
            start = end;
        }
        evaluated += count as u64;
    }
    evaluated
}

/// Values of the requested statistics on one data vector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatisticValues {
    pub scan: Option<f64>,
    pub log_alr: Option<f64>,
    pub log_condensed_alr: Option<f64>,
    pub penalized_scan: Option<f64>,
    pub block_maxima: Option<BlockMaxima>,
}

impl StatisticValues {
    /// Scalar statistic for a detector. The blocked scan has no single scalar;
    /// its overall maximum is returned.
    pub fn scalar(&self, detector: Detector) -> Option<f64> {
        match detector {
            Detector::Scan => self.scan,
            Detector::Alr => self.log_alr,
            Detector::CondensedAlr => self.log_condensed_alr,
            Detector::PenalizedScan => self.penalized_scan,
            Detector::BlockedScan => self.block_maxima.as_ref().map(BlockMaxima::overall),
        }
    }
}

/// Evaluates a fixed set of detectors at a fixed `n`, sharing work between them.
#[derive(Debug, Clone)]
pub struct StatisticSuite {
    n: usize,
    detectors: Vec<Detector>,
    full: Option<FullFamilyKernel>,
    condensed: Option<CondensedFamily>,
}

impl StatisticSuite {
    pub fn new(n: usize, detectors: &[Detector]) -> Result<Self> {
        let mut detectors = detectors.to_vec();
        detectors.sort_unstable();
        detectors.dedup();
        let full = if detectors.iter().any(|d| d.needs_full_family()) {
            if detectors.contains(&Detector::BlockedScan) && n < 2 {
                return Err(Error::domain("blocked scan needs n >= 2"));
            }
            Some(FullFamilyKernel::new(n)?)
        } else {
            None
        };
        let condensed = if detectors.contains(&Detector::CondensedAlr) {
            Some(build_condensed_family(n)?)
        } else {
            None
        };
        Ok(Self {
            n,
            detectors,
            full,
            condensed,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn detectors(&self) -> &[Detector] {
        &self.detectors
    }

    pub fn condensed_family(&self) -> Option<&CondensedFamily> {
        self.condensed.as_ref()
    }

    pub fn scan_blocks(&self) -> Option<&ScanBlocks> {
        self.full.as_ref().and_then(FullFamilyKernel::scan_blocks)
    }

    pub fn evaluate(&self, s: &CumulativeSums) -> Result<StatisticValues> {
        check_n(self.n, s.n())?;
        let has = |d| self.detectors.contains(&d);
        let mut out = StatisticValues::default();
        if let Some(kernel) = &self.full {
            let stats = kernel.evaluate(s, has(Detector::Alr))?;
            if has(Detector::Scan) {
                out.scan = Some(stats.scan);
            }
            out.log_alr = stats.log_alr;
            if has(Detector::PenalizedScan) {
                out.penalized_scan = Some(stats.penalized);
            }
            if has(Detector::BlockedScan) {
                out.block_maxima = stats.block_maxima;
            }
        }
        if let Some(fam) = &self.condensed {
            out.log_condensed_alr = Some(condensed_alr(s, fam)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_stats::{full_family, ystat};
    use crate::signal_model::{sample, IntervalIndex, SeedRecord, SignalSpec};
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn sums(v: &[f64]) -> CumulativeSums {
        CumulativeSums::from_values(v)
    }

    fn noise(n: usize, seed: u64) -> CumulativeSums {
        let y = sample(&SignalSpec::null(n).unwrap(), SeedRecord::new(seed, 0));
        CumulativeSums::from_values(&y.values)
    }

    // Brute-force reference: direct division per interval, no shared tables.
    fn brute_abs_y(s: &CumulativeSums) -> Vec<(usize, usize, f64)> {
        full_family(s.n())
            .unwrap()
            .iter()
            .map(|i| (i.j, i.k, ystat(s, i).unwrap().abs()))
            .collect()
    }

    #[test]
    fn scan_examples() {
        assert_eq!(scan(&sums(&[0.0; 7])).unwrap(), 0.0);
        assert_eq!(scan(&sums(&[3.0, 0.0])).unwrap(), 3.0);
        assert_eq!(scan(&sums(&[1.0; 4])).unwrap(), 2.0);
    }

    #[test]
    fn log_alr_examples() {
        let v = log_alr(&sums(&[0.0, 0.0])).unwrap();
        assert!((v - 0.75f64.ln()).abs() < 1e-15, "{v}");
        assert!((0.75f64.ln() + 0.287_682_072_451_780_9).abs() < 1e-15);

        // direct sum of the 10 terms for (1,1,1,1): lengths 1..4 with counts 4,3,2,1
        let direct: f64 = [(4.0, 1.0), (3.0, 2.0), (2.0, 3.0), (1.0, 4.0)]
            .iter()
            .map(|&(count, len): &(f64, f64)| count * (len / 2.0).exp())
            .sum::<f64>()
            / 16.0;
        let v = log_alr(&sums(&[1.0; 4])).unwrap();
        assert!((v - direct.ln()).abs() < 1e-12);
    }

    #[test]
    fn penalized_examples() {
        let p = penalized_scan(&sums(&[0.0; 9])).unwrap();
        assert!((p + SQRT_2).abs() < 1e-15);
        // n = 2, (3, 0): lengths 1 -> 3 - sqrt(2 ln(2e)); 2 -> 3/sqrt2 - sqrt2
        let p = penalized_scan(&sums(&[3.0, 0.0])).unwrap();
        let expected = 3.0 - (2.0 * (1.0 + 2f64.ln())).sqrt();
        assert!((p - expected).abs() < 1e-14);
        assert!((p - 1.159_811_324_586_554_7).abs() < 1e-12, "{p}");
    }

    #[test]
    fn penalty_is_at_least_sqrt2() {
        for n in [1usize, 2, 10, 1000] {
            for len in 1..=n {
                assert!(scale_penalty(n, len) >= SQRT_2);
            }
            assert_eq!(scale_penalty(n, n), SQRT_2);
        }
    }

    #[test]
    fn ell_max_values() {
        assert!(ell_max(1).is_err());
        assert_eq!(ell_max(16).unwrap(), 3);
        assert_eq!(ell_max(1000).unwrap(), 8);
        assert_eq!(ell_max(10_000).unwrap(), 11);
    }

    #[test]
    fn block_maxima_partition_n16() {
        let s = noise(16, 3);
        let bm = block_maxima(&s).unwrap();
        assert_eq!(bm.values.len(), 4);
        // ranges (8,16], (4,8], (2,4], [1,2]
        let ranges = [(9, 16), (5, 8), (3, 4), (1, 2)];
        let mut expected = [f64::NEG_INFINITY; 4];
        let mut seen = 0;
        for (j, k, a) in brute_abs_y(&s) {
            let b = ranges
                .iter()
                .position(|&(lo, hi)| (lo..=hi).contains(&(k - j)))
                .unwrap();
            expected[b] = expected[b].max(a);
            seen += 1;
        }
        assert_eq!(seen, 136);
        assert_eq!(bm.values, expected);
        assert_eq!(bm.overall(), scan(&s).unwrap());
    }

    #[test]
    fn block_maxima_zero_data_and_empty_blocks() {
        let bm = block_maxima(&sums(&[0.0; 16])).unwrap();
        assert!(bm.values.iter().all(|&v| v == 0.0));
        // n = 3: small block covers lengths <= 0.75, i.e. nothing
        let bm = block_maxima(&sums(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(bm.values.last(), Some(&f64::NEG_INFINITY));
        assert!(block_maxima(&sums(&[1.0])).is_err());
    }

    #[test]
    fn condensed_family_n16() {
        let fam = build_condensed_family(16).unwrap();
        assert_eq!(fam.ell_max, 3);
        let ds: Vec<usize> = fam.blocks.iter().map(|b| b.d_ell).collect();
        assert_eq!(ds, vec![2, 2, 2]);
        let counts: Vec<u64> = fam
            .blocks
            .iter()
            .map(|b| b.intervals.cardinality())
            .collect();
        assert_eq!(counts, vec![10, 11, 7]);
        assert_eq!(fam.small.cardinality(), 31);
        assert_eq!(fam.total_cardinality, 59);
        let v = condensed_alr(&sums(&[0.0; 16]), &fam).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn condensed_family_errors() {
        assert!(build_condensed_family(2).is_err());
        let fam = build_condensed_family(16).unwrap();
        assert!(matches!(
            condensed_alr(&sums(&[0.0; 15]), &fam),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn condensed_members_belong_to_one_subfamily() {
        for n in [3usize, 4, 7, 16, 33, 100, 257] {
            let fam = build_condensed_family(n).unwrap();
            let subs: Vec<_> = fam.families().collect();
            for i in full_family(n).unwrap().iter() {
                let hits = subs.iter().filter(|f| f.contains(i)).count();
                assert!(hits <= 1, "n={n} {i:?}");
            }
        }
    }

    #[test]
    fn condensed_eval_count_equals_cardinality() {
        for n in [3usize, 16, 50, 999, 4096] {
            let fam = build_condensed_family(n).unwrap();
            let (_, count) = condensed_alr_counted(&noise(n, 11), &fam).unwrap();
            assert_eq!(count, fam.total_cardinality);
        }
    }

    #[test]
    fn alr_survives_huge_statistics() {
        let mut v = vec![0.0; 50];
        v[20] = 60.0; // Y^2/2 = 1800 on the singleton
        let la = log_alr(&sums(&v)).unwrap();
        assert!(la.is_finite());
        assert!(la <= 1800.0 && la >= 1800.0 - 2.0 * 50f64.ln());
    }

    #[test]
    fn suite_matches_standalone_functions() {
        let s = noise(64, 5);
        let suite = StatisticSuite::new(64, &Detector::ALL).unwrap();
        let v = suite.evaluate(&s).unwrap();
        assert_eq!(v.scan, Some(scan(&s).unwrap()));
        assert_eq!(v.log_alr, Some(log_alr(&s).unwrap()));
        assert_eq!(v.penalized_scan, Some(penalized_scan(&s).unwrap()));
        assert_eq!(v.block_maxima, Some(block_maxima(&s).unwrap()));
        let fam = build_condensed_family(64).unwrap();
        assert_eq!(v.log_condensed_alr, Some(condensed_alr(&s, &fam).unwrap()));

        let only = StatisticSuite::new(64, &[Detector::CondensedAlr]).unwrap();
        let w = only.evaluate(&s).unwrap();
        assert!(w.scan.is_none() && w.log_alr.is_none());
        assert_eq!(w.log_condensed_alr, v.log_condensed_alr);
    }

    #[test]
    fn detector_names_round_trip() {
        for d in Detector::ALL {
            assert_eq!(d.name().parse::<Detector>().unwrap(), d);
        }
        assert_eq!(
            "blocked-scan".parse::<Detector>().unwrap(),
            Detector::BlockedScan
        );
        assert!("median".parse::<Detector>().is_err());
    }

    proptest! {
        #[test]
        fn sign_flip_invariance(v in prop::collection::vec(-4.0f64..4.0, 3..40)) {
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            let (a, b) = (sums(&v), sums(&neg));
            let suite = StatisticSuite::new(v.len(), &Detector::ALL).unwrap();
            // negation is exact in every prefix sum, so results match bit for bit
            prop_assert_eq!(suite.evaluate(&a).unwrap(), suite.evaluate(&b).unwrap());
        }

        #[test]
        fn reversal_invariance(v in prop::collection::vec(-4.0f64..4.0, 1..40)) {
            let rev: Vec<f64> = v.iter().rev().copied().collect();
            let (a, b) = (sums(&v), sums(&rev));
            let tol = |x: f64| 1e-9 * (1.0 + x.abs());
            let (sa, sb) = (scan(&a).unwrap(), scan(&b).unwrap());
            prop_assert!((sa - sb).abs() <= tol(sa));
            let (la, lb) = (log_alr(&a).unwrap(), log_alr(&b).unwrap());
            prop_assert!((la - lb).abs() <= tol(la));
            let (pa, pb) = (penalized_scan(&a).unwrap(), penalized_scan(&b).unwrap());
            prop_assert!((pa - pb).abs() <= tol(pa));
        }

        #[test]
        fn scan_dominates_every_interval(v in prop::collection::vec(-4.0f64..4.0, 1..30)) {
            let s = sums(&v);
            let m = scan(&s).unwrap();
            let brute = brute_abs_y(&s).into_iter().map(|t| t.2).fold(0.0, f64::max);
            prop_assert_eq!(m, brute);
            for i in full_family(v.len()).unwrap().iter() {
                prop_assert!(m >= ystat(&s, i).unwrap().abs());
            }
        }

        #[test]
        fn alr_sandwich(v in prop::collection::vec(-6.0f64..6.0, 1..40)) {
            let s = sums(&v);
            let n = v.len() as f64;
            let m = scan(&s).unwrap();
            let la = log_alr(&s).unwrap();
            prop_assert!(la <= 0.5 * m * m);
            prop_assert!(la >= 0.5 * m * m - 2.0 * n.ln());
            prop_assert!(penalized_scan(&s).unwrap() <= m - SQRT_2);
        }

        #[test]
        fn block_partition(v in prop::collection::vec(-4.0f64..4.0, 2..60)) {
            let s = sums(&v);
            prop_assert_eq!(block_maxima(&s).unwrap().overall(), scan(&s).unwrap());
        }
    }

    #[test]
    fn scan_on_signal_finds_support() {
        let n = 200;
        let spec = SignalSpec {
            n,
            mu: 3.0,
            support: IntervalIndex::new(50, 90, n).unwrap(),
        };
        let y = sample(&spec, SeedRecord::new(8, 0));
        let s = CumulativeSums::from_values(&y.values);
        // Y_n on the true support has mean 3 * sqrt(40) ~ 19
        assert!(scan(&s).unwrap() > 15.0);
    }
}
