//! Multiscale detection of a signal of unknown location and extent in Gaussian noise.
//!
//! Implements the scan statistic, the average likelihood ratio (ALR), the
//! condensed ALR over an `O(n log^2 n)` approximating family, the penalized scan
//! and the blocked scan, together with Monte Carlo calibration and power studies.

pub mod calibration;
pub mod detectors;
pub mod error;
pub mod experiments;
mod float_serde;
pub mod interval_stats;
mod lse;
pub mod signal_model;

pub use calibration::{
    blocked_reject, calibrate_blocked, null_quantile, BlockedCalibration, Calibration,
    CriticalValues,
};
pub use detectors::{
    block_maxima, build_condensed_family, condensed_alr, condensed_alr_counted, log_alr,
    penalized_scan, scan, BlockMaxima, CondensedFamily, Detector, StatisticSuite, StatisticValues,
};
pub use error::{Error, Result};
pub use experiments::{
    benchmark_complexity, emit_table, run_power_study, ExperimentConfig, PowerRow, PowerTable,
    SignalGrid, TableFormat,
};
pub use interval_stats::{full_family, ystat, FamilyLabel, IntervalFamily};
pub use signal_model::{
    cumsum, make_signal, sample, CumulativeSums, DataVector, IntervalIndex, SeedRecord, SignalSpec,
};
