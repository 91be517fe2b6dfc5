//! Benchmarks live in `benches/`; run them with `cargo bench -p scanalr-bench`.

use scanalr_core::{sample, CumulativeSums, SeedRecord, SignalSpec};

/// Prefix sums of one pure-noise vector of length `n`.
pub fn noise_sums(n: usize, seed: u64) -> CumulativeSums {
    let spec = SignalSpec::null(n).expect("n >= 1");
    CumulativeSums::from_values(&sample(&spec, SeedRecord::new(seed, 0)).values)
}
