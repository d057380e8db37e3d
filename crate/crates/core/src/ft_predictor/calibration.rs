use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine map from proxy accuracy to predicted fine-tuning accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationParams {
    pub a: f64,
    pub b: f64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self { a: 1.0, b: 0.0 }
    }
}

/// A calibrated prediction: `value` is clamped to [0, 1], `raw` is not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibrated {
    pub value: f64,
    pub raw: f64,
}

/// Fits `actual = a * proxy + b` by ordinary least squares.
///
/// With a single pair, or when every proxy value is identical, the slope is
/// fixed at 1 and `b` is the mean offset.
pub fn calibrate(pairs: &[(f64, f64)]) -> Result<CalibrationParams> {
    if pairs.is_empty() {
        return Err(Error::Empty("calibration pairs"));
    }
    if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("calibration pairs must be finite"));
    }
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if pairs.len() < 2 || sxx == 0.0 {
        return Ok(CalibrationParams {
            a: 1.0,
            b: mean_y - mean_x,
        });
    }
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let a = sxy / sxx;
    Ok(CalibrationParams {
        a,
        b: mean_y - a * mean_x,
    })
}

pub fn apply_calibration(params: &CalibrationParams, proxy_perf: f64) -> Calibrated {
    let raw = params.a * proxy_perf + params.b;
    Calibrated {
        value: raw.clamp(0.0, 1.0),
        raw,
    }
}

/// Size of the calibration subset: 200 examples or 10% of the training
/// set, whichever is larger, never more than the set itself.
pub fn calibration_subset_size(n_train: usize) -> usize {
    let tenth = n_train.div_ceil(10);
    tenth.max(200).min(n_train)
}
