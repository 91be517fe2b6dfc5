//! Standardized interval sums and interval families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_model::{CumulativeSums, IntervalIndex};

/// `Y_n(I) = (s[k] - s[j]) / sqrt(k - j)`.
pub fn ystat(s: &CumulativeSums, interval: IntervalIndex) -> Result<f64> {
    let n = s.n();
    if !interval.is_valid_for(n) {
        return Err(Error::InvalidInterval {
            j: interval.j,
            k: interval.k,
            n,
        });
    }
    Ok(ystat_unchecked(s, interval.j, interval.k))
}

#[inline]
pub(crate) fn ystat_unchecked(s: &CumulativeSums, j: usize, k: usize) -> f64 {
    s.window_sum(j, k) / ((k - j) as f64).sqrt()
}

/// Which family an [`IntervalFamily`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "block")]
pub enum FamilyLabel {
    /// Every interval of the grid.
    Full,
    /// A length block `m_l < k - j <= m_{l-1}` of the full grid (blocked scan).
    ScanBlock(usize),
    /// The coarse-grid family for length block `l` of the condensed ALR.
    Approx(usize),
    /// All intervals of at most `m_{l_max}` design points.
    Small,
}

/// The set `{(j, k): j, k multiples of step, min_len <= k - j <= max_len, k <= n}`.
///
/// Every family used by the detectors has this shape, so the set is kept as its
/// defining rule and enumerated on demand. At `n = 10^6` the condensed family has
/// a few hundred million members; storing them is not an option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalFamily {
    pub label: FamilyLabel,
    pub n: usize,
    pub step: usize,
    pub min_len: usize,
    pub max_len: usize,
    cardinality: u64,
}

impl IntervalFamily {
    /// Family of grid intervals whose length lies in `[min_len, max_len]`.
    /// An empty length range gives an empty family.
    pub fn new(label: FamilyLabel, n: usize, step: usize, min_len: usize, max_len: usize) -> Self {
        assert!(step >= 1, "grid step must be positive");
        let min_len = min_len.max(1);
        let max_len = max_len.min(n);
        let cardinality = count_grid_intervals(n, step, min_len, max_len);
        Self {
            label,
            n,
            step,
            min_len,
            max_len,
            cardinality,
        }
    }

    /// Exact number of distinct intervals.
    #[inline]
    pub fn cardinality(&self) -> u64 {
        self.cardinality
    }

    pub fn is_empty(&self) -> bool {
        self.cardinality == 0
    }

    pub fn contains(&self, interval: IntervalIndex) -> bool {
        let len = interval.k.saturating_sub(interval.j);
        interval.is_valid_for(self.n)
            && interval.j % self.step == 0
            && interval.k % self.step == 0
            && (self.min_len..=self.max_len).contains(&len)
    }

    /// Calls `f(j, k)` for every member, `j` ascending then `k` ascending.
    #[inline]
    pub fn for_each(&self, mut f: impl FnMut(usize, usize)) {
        if self.is_empty() {
            return;
        }
        let d = self.step;
        // smallest multiple of d that is >= min_len
        let first = self.min_len.div_ceil(d) * d;
        let mut j = 0;
        while j + first <= self.n {
            let last = (j + self.max_len).min(self.n);
            let mut k = j + first;
            while k <= last {
                f(j, k);
                k += d;
            }
            j += d;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = IntervalIndex> + '_ {
        let d = self.step;
        let first = self.min_len.div_ceil(d) * d;
        let n = self.n;
        let max_len = self.max_len;
        let empty = self.is_empty();
        (0..=n)
            .step_by(d)
            .filter(move |_| !empty)
            .flat_map(move |j| {
                let last = if j + first <= n {
                    (j + max_len).min(n)
                } else {
                    0
                };
                ((j + first)..=last)
                    .step_by(d)
                    .filter(move |&k| k <= last)
                    .map(move |k| IntervalIndex { j, k })
            })
    }

    pub fn to_vec(&self) -> Vec<IntervalIndex> {
        self.iter().collect()
    }
}

/// Counts grid intervals by length: a length `L = t*d` admits `floor((n - L)/d) + 1`
/// left endpoints.
fn count_grid_intervals(n: usize, step: usize, min_len: usize, max_len: usize) -> u64 {
    if min_len > max_len {
        return 0;
    }
    let first = min_len.div_ceil(step) * step;
    let mut total = 0u64;
    let mut len = first;
    while len <= max_len {
        total += ((n - len) / step + 1) as u64;
        len += step;
    }
    total
}

/// All `(j, k)` with `0 <= j < k <= n`; cardinality `n(n+1)/2`.
pub fn full_family(n: usize) -> Result<IntervalFamily> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    Ok(IntervalFamily::new(FamilyLabel::Full, n, 1, 1, n))
}
