//! Reading and standardizing input series.

use std::io::Read;
use std::path::Path;

use crate::commands::Failure;

/// Parses one decimal number per line. Blank lines and `#` comments are skipped.
pub fn read_series(path: &Path) -> Result<Vec<f64>, Failure> {
    let mut text = String::new();
    let read = if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    read.map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    parse_series(&text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

pub fn parse_series(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| format!("line {}: '{line}' is not a number", i + 1))?;
        if !v.is_finite() {
            return Err(format!("line {}: non-finite value", i + 1));
        }
        out.push(v);
    }
    Ok(out)
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Noise scale from the median absolute deviation of first differences.
/// A block signal only moves two differences, so the estimate barely notices it.
pub fn robust_scale(values: &[f64]) -> f64 {
    if values.len() < 3 {
        return 1.0;
    }
    let mut diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let centre = median(&mut diffs);
    let mut dev: Vec<f64> = diffs.iter().map(|d| (d - centre).abs()).collect();
    // 1.4826 makes the MAD consistent for a normal; differences have variance 2
    1.4826 * median(&mut dev) / std::f64::consts::SQRT_2
}

/// Returns the standardized series and the scale that was divided out.
pub fn standardize(values: &[f64]) -> (Vec<f64>, f64) {
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let scale = robust_scale(values);
    let scale = if scale > 0.0 && scale.is_finite() {
        scale
    } else {
        1.0
    };
    (values.iter().map(|v| (v - mean) / scale).collect(), scale)
}
