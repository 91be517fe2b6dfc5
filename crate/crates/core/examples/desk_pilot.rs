//! Pilot for the desk-scale power check: ALR power at scale 0.5, n = 1000,
//! over a grid of norms. The chosen norm is recorded in `configs/desk.toml`.

use scanalr_core::experiments::{run_power_study, ExperimentConfig, SignalGrid};
use scanalr_core::Detector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let norms: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse())
        .collect::<Result<_, _>>()?;
    let norms = if norms.is_empty() {
        vec![0.08, 0.09, 0.1, 0.11, 0.12, 0.13]
    } else {
        norms
    };
    for norm in norms {
        let cfg = ExperimentConfig {
            n: 1000,
            alpha: 0.05,
            detectors: vec![Detector::Scan, Detector::Alr],
            signal_grid: SignalGrid::FixedNorm {
                norm,
                scales: vec![0.5],
            },
            random_location: true,
            b_crit: 4000,
            b_power: 1000,
            seed: 0x5EED_0001,
            a_offset: 10,
        };
        let tbl = run_power_study(&cfg, None)?;
        let get = |d| tbl.get(d, 0.5).map(|r| r.power).unwrap_or(f64::NAN);
        println!(
            "norm {norm:.3}: alr {:.3} scan {:.3}",
            get(Detector::Alr),
            get(Detector::Scan)
        );
    }
    Ok(())
}
