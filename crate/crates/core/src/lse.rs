//! Log-sum-exp accumulation for the ALR kernels.
//!
//! Terms are reduced in fixed tiles: each tile is shifted by its own maximum,
//! exponentiated with [`exp_nonpositive`], summed in four lanes and merged into
//! a running `(max, sum)` pair. The tiling is fixed, so results do not depend
//! on how work is scheduled.

/// Terms per tile.
pub(crate) const TILE: usize = 512;

const LANES: usize = 4;

/// `exp(x)` for `x <= 0`, branch-free so loops over it vectorize.
///
/// Range reduction `x = k ln 2 + r`, `|r| <= ln2 / 2`, then a degree-12 Taylor
/// polynomial (truncation error below 2e-16 relative). Inputs below -708 are
/// clamped, returning about 3e-308 instead of a subnormal or zero.
#[inline(always)]
pub(crate) fn exp_nonpositive(x: f64) -> f64 {
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 0.693_147_180_369_123_8;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // 1.5 * 2^52: adding it rounds to an integer held in the low mantissa bits
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    const C: [f64; 13] = [
        1.0,
        1.0,
        1.0 / 2.0,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5040.0,
        1.0 / 40320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
        1.0 / 479_001_600.0,
    ];
    let x = if x > -708.0 { x } else { -708.0 };
    let shifted = x * LOG2E + SHIFTER;
    let k = shifted - SHIFTER;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = C[12];
    p = p * r + C[11];
    p = p * r + C[10];
    p = p * r + C[9];
    p = p * r + C[8];
    p = p * r + C[7];
    p = p * r + C[6];
    p = p * r + C[5];
    p = p * r + C[4];
    p = p * r + C[3];
    p = p * r + C[2];
    p = p * r + C[1];
    p = p * r + C[0];
    // low bits of `shifted` hold k as a two's-complement integer
    let k_bits = shifted.to_bits().wrapping_add(1023) << 52;
    p * f64::from_bits(k_bits)
}

#[inline(always)]
fn sum_exp_shifted_impl(terms: &mut [f64], shift: f64) -> f64 {
    for t in terms.iter_mut() {
        *t = exp_nonpositive(*t - shift);
    }
    let mut acc = [0.0f64; LANES];
    let mut chunks = terms.chunks_exact(LANES);
    for c in &mut chunks {
        for l in 0..LANES {
            acc[l] += c[l];
        }
    }
    for (l, &t) in chunks.remainder().iter().enumerate() {
        acc[l] += t;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

fn sum_exp_shifted_generic(terms: &mut [f64], shift: f64) -> f64 {
    sum_exp_shifted_impl(terms, shift)
}

// Same arithmetic as the generic path: Rust never contracts to FMA, so the
// wider vectors change speed, not results.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn sum_exp_shifted_avx2(terms: &mut [f64], shift: f64) -> f64 {
    sum_exp_shifted_impl(terms, shift)
}

/// `sum(exp(t - shift))`, overwriting `terms` with the exponentials.
pub(crate) fn sum_exp_shifted(terms: &mut [f64], shift: f64) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2, checked just above.
        return unsafe { sum_exp_shifted_avx2(terms, shift) };
    }
    sum_exp_shifted_generic(terms, shift)
}

#[inline]
pub(crate) fn max_of(terms: &[f64]) -> f64 {
    let mut acc = [f64::NEG_INFINITY; LANES];
    let mut chunks = terms.chunks_exact(LANES);
    for c in &mut chunks {
        for l in 0..LANES {
            acc[l] = acc[l].max(c[l]);
        }
    }
    for (l, &t) in chunks.remainder().iter().enumerate() {
        acc[l] = acc[l].max(t);
    }
    acc[0].max(acc[1]).max(acc[2].max(acc[3]))
}

/// Running `log(sum(exp(x)))` as a `(max, scaled sum)` pair.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    pub(crate) fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    /// Merges a chunk already reduced to `sum(exp(x - chunk_max))`.
    #[inline]
    pub(crate) fn merge(&mut self, chunk_max: f64, chunk_sum: f64) {
        if chunk_sum == 0.0 {
            return;
        }
        if chunk_max > self.max {
            self.sum = self.sum * (self.max - chunk_max).exp() + chunk_sum;
            self.max = chunk_max;
        } else {
            self.sum += chunk_sum * (chunk_max - self.max).exp();
        }
    }

    /// Reduces one tile of terms (at most [`TILE`] long) and merges it.
    /// The tile is used as scratch space.
    #[inline]
    pub(crate) fn merge_tile(&mut self, terms: &mut [f64]) {
        if terms.is_empty() {
            return;
        }
        let m = max_of(terms);
        self.merge(m, sum_exp_shifted(terms, m));
    }

    /// Reduces a buffer tile by tile.
    pub(crate) fn merge_terms(&mut self, terms: &[f64]) {
        let mut buf = [0.0f64; TILE];
        for tile in terms.chunks(TILE) {
            let scratch = &mut buf[..tile.len()];
            scratch.copy_from_slice(tile);
            self.merge_tile(scratch);
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// `log(sum(exp(x)))` over a slice; `-inf` for an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let mut acc = LogSumExp::new();
    acc.merge_terms(xs);
    acc.value()
}
