//! Observation model: a rectangular signal `mu * 1{j < i <= k}` plus i.i.d.
//! standard normal noise, sampled from counter-based random streams.
//!
//! Noise for replicate `r` under seed `s` is drawn from a ChaCha8 stream keyed
//! by `s` with stream id `r`, and converted to normals with the ziggurat
//! sampler of `rand_distr::StandardNormal`. Golden values in the tests depend
//! on exactly this pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The interval `(j/n, k/n]`, stored by its integer grid endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntervalIndex {
    pub j: usize,
    pub k: usize,
}

impl IntervalIndex {
    /// Builds an interval after checking `0 <= j < k <= n`.
    pub fn new(j: usize, k: usize, n: usize) -> Result<Self> {
        if j < k && k <= n {
            Ok(Self { j, k })
        } else {
            Err(Error::InvalidInterval { j, k, n })
        }
    }

    /// Number of design points `k - j`.
    #[inline]
    pub fn len(&self) -> usize {
        self.k - self.j
    }

    /// Always false for a validated interval; present for API symmetry with `len`.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.k <= self.j
    }

    /// Length as a fraction of the unit interval.
    pub fn extent(&self, n: usize) -> f64 {
        self.len() as f64 / n as f64
    }

    pub fn is_valid_for(&self, n: usize) -> bool {
        self.j < self.k && self.k <= n
    }

    /// Whether design point `i` (1-based) lies in the interval.
    #[inline]
    pub fn contains_point(&self, i: usize) -> bool {
        self.j < i && i <= self.k
    }
}

/// Seed of a reproducible random stream: a 64-bit key plus a replicate counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub replicate: u64,
}

impl SeedRecord {
    pub fn new(seed: u64, replicate: u64) -> Self {
        Self { seed, replicate }
    }

    /// The same key at another replicate counter.
    pub fn with_replicate(self, replicate: u64) -> Self {
        Self { replicate, ..self }
    }

    /// A key for an unrelated family of streams, e.g. calibration vs power runs.
    pub fn derive(self, tag: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(tag)),
            replicate: 0,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.replicate);
        rng
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A rectangular alternative on `n` design points. `mu == 0` is the null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub n: usize,
    pub mu: f64,
    pub support: IntervalIndex,
}

impl SignalSpec {
    /// Pure noise on `n` points.
    pub fn null(n: usize) -> Result<Self> {
        let support = IntervalIndex::new(0, n, n)?;
        Ok(Self {
            n,
            mu: 0.0,
            support,
        })
    }

    /// `|mu| * sqrt(|I|)`.
    pub fn norm(&self) -> f64 {
        self.mu.abs() * self.support.extent(self.n).sqrt()
    }

    pub fn is_null(&self) -> bool {
        self.mu == 0.0
    }
}

/// Builds the signal with the given norm on `support`.
pub fn make_signal(
    n: usize,
    norm: f64,
    support: IntervalIndex,
    positive: bool,
) -> Result<SignalSpec> {
    if !support.is_valid_for(n) {
        return Err(Error::InvalidInterval {
            j: support.j,
            k: support.k,
            n,
        });
    }
    if !norm.is_finite() || norm < 0.0 {
        return Err(Error::domain(format!(
            "signal norm must be finite and >= 0, got {norm}"
        )));
    }
    let sign = if positive { 1.0 } else { -1.0 };
    let mu = sign * norm / support.extent(n).sqrt();
    Ok(SignalSpec { n, mu, support })
}

/// Observations `Y_1..Y_n` together with the stream that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataVector {
    pub values: Vec<f64>,
    pub seed: Option<SeedRecord>,
}

impl DataVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values, seed: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Draws `Y_i = mu * 1{j < i <= k} + Z_i`, `i = 1..n`.
pub fn sample(spec: &SignalSpec, seed: SeedRecord) -> DataVector {
    let mut values = vec![0.0; spec.n];
    sample_into(spec, seed, &mut values);
    DataVector {
        values,
        seed: Some(seed),
    }
}

/// Allocation-free variant of [`sample`] for Monte Carlo loops.
pub fn sample_into(spec: &SignalSpec, seed: SeedRecord, out: &mut [f64]) {
    assert_eq!(out.len(), spec.n, "output buffer must hold n values");
    let mut rng = seed.rng();
    for z in out.iter_mut() {
        *z = rng.sample(StandardNormal);
    }
    if spec.mu != 0.0 {
        // design point i is stored at index i - 1
        for y in &mut out[spec.support.j..spec.support.k] {
            *y += spec.mu;
        }
    }
}

/// Prefix sums `s[0] = 0`, `s[i] = s[i-1] + Y_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeSums {
    s: Vec<f64>,
}

impl CumulativeSums {
    pub fn from_values(values: &[f64]) -> Self {
        let mut s = Vec::with_capacity(values.len() + 1);
        s.push(0.0);
        let mut acc = 0.0;
        for &y in values {
            acc += y;
            s.push(acc);
        }
        Self { s }
    }

    /// Recomputes the sums in place, reusing the allocation.
    pub fn refill(&mut self, values: &[f64]) {
        self.s.clear();
        self.s.push(0.0);
        let mut acc = 0.0;
        for &y in values {
            acc += y;
            self.s.push(acc);
        }
    }

    /// Number of observations.
    #[inline]
    pub fn n(&self) -> usize {
        self.s.len() - 1
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.s
    }

    /// `s[k] - s[j]`.
    #[inline]
    pub fn window_sum(&self, j: usize, k: usize) -> f64 {
        self.s[k] - self.s[j]
    }
}

pub fn cumsum(data: &DataVector) -> CumulativeSums {
    CumulativeSums::from_values(&data.values)
}
