use scanalr_core::experiments::{parse_csv_rows, render_table};
use scanalr_core::{run_power_study, Detector, ExperimentConfig, SignalGrid, TableFormat};

fn study(norms: Vec<f64>, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        n: 200,
        alpha: 0.1,
        detectors: vec![
            Detector::Scan,
            Detector::CondensedAlr,
            Detector::PenalizedScan,
            Detector::BlockedScan,
        ],
        signal_grid: SignalGrid::RandomScale { norms },
        random_location: true,
        b_crit: 1000,
        b_power: 800,
        seed,
        a_offset: 10,
    }
}

#[test]
fn power_grows_with_norm_and_matches_level_at_zero() {
    let cfg = study(vec![0.0, 0.15, 0.3, 0.45], 17);
    let tbl = run_power_study(&cfg, None).unwrap();
    let null_se = (cfg.alpha * (1.0 - cfg.alpha) / cfg.b_power as f64).sqrt();
    for &d in &cfg.detectors {
        let powers: Vec<(f64, f64)> = cfg
            .signal_grid
            .values()
            .iter()
            .map(|&v| {
                let r = tbl.get(d, v).unwrap();
                (r.power, r.stderr)
            })
            .collect();
        // the calibration quantile adds its own error, hence 4 SE instead of 3
        assert!(
            (powers[0].0 - cfg.alpha).abs() <= 4.0 * null_se,
            "{d}: null rate {} far from {}",
            powers[0].0,
            cfg.alpha
        );
        for w in powers.windows(2) {
            let slack = 3.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt();
            assert!(
                w[1].0 >= w[0].0 - slack,
                "{d}: power fell from {} to {}",
                w[0].0,
                w[1].0
            );
        }
        assert!(
            powers[3].0 > 0.9,
            "{d}: power {} at the largest norm",
            powers[3].0
        );
    }
}

#[test]
fn identical_config_gives_identical_table() {
    let cfg = study(vec![0.2], 5);
    let a = run_power_study(&cfg, None).unwrap();
    let b = run_power_study(&cfg, None).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.calibrations, b.calibrations);
    let other = run_power_study(&study(vec![0.2], 6), None).unwrap();
    assert_ne!(a.rows, other.rows);
}

#[test]
fn csv_output_parses_back() {
    let cfg = study(vec![0.1, 0.2], 8);
    let tbl = run_power_study(&cfg, None).unwrap();
    let rows = parse_csv_rows(&render_table(&tbl, TableFormat::Csv).unwrap()).unwrap();
    assert_eq!(rows, tbl.rows);
}

#[test]
fn fixed_norm_columns_follow_the_scales() {
    let cfg = ExperimentConfig {
        signal_grid: SignalGrid::FixedNorm {
            norm: 0.3,
            scales: vec![0.01, 0.5, 1.0],
        },
        ..study(Vec::new(), 9)
    };
    let tbl = run_power_study(&cfg, None).unwrap();
    assert_eq!(tbl.rows.len(), 4 * 3);
    let values: Vec<f64> = tbl.rows.iter().take(3).map(|r| r.grid_value).collect();
    assert_eq!(values, vec![0.01, 0.5, 1.0]);
}
