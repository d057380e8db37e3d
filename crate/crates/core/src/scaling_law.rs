//! Exponential saturation law for retrieval-augmented in-context learning:
//! `perf(d) = pi0 + alpha * (1 - exp(-beta * d))` over shot count `d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower end of the decay-rate search range.
pub const BETA_MIN: f64 = 1e-4;
/// Upper end of the decay-rate search range. Beyond this the curve is a
/// step at d = 1 for integer shot counts.
pub const BETA_MAX: f64 = 16.0;
const BETA_GRID: usize = 400;
const GOLDEN_TOL: f64 = 1e-10;

/// Parameters of the saturation curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationParams {
    /// Amplitude; negative when more shots hurt.
    pub alpha: f64,
    /// Per-shot decay rate, > 0.
    pub beta: f64,
    /// Zero-shot baseline.
    pub pi0: f64,
}

impl SaturationParams {
    pub fn new(alpha: f64, beta: f64, pi0: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be > 0, got {beta}")));
        }
        if !alpha.is_finite() || !pi0.is_finite() {
            return Err(Error::invalid("alpha and pi0 must be finite"));
        }
        Ok(Self { alpha, beta, pi0 })
    }

    /// Unclamped curve value at `shots`.
    pub fn predict_raw(&self, shots: f64) -> f64 {
        self.pi0 + self.alpha * basis(self.beta, shots)
    }

    /// Curve value at `shots`, clamped to [0, 1].
    pub fn predict(&self, shots: f64) -> f64 {
        self.predict_raw(shots).clamp(0.0, 1.0)
    }

    /// Whether every prediction over `[0, max_shots]` stays in [0, 1]
    /// before clamping. The curve is monotone so the endpoints suffice.
    pub fn in_unit_range(&self, max_shots: f64) -> bool {
        let ends = [self.predict_raw(0.0), self.predict_raw(max_shots)];
        ends.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// `1 - exp(-beta * d)` without cancellation for small arguments.
fn basis(beta: f64, shots: f64) -> f64 {
    -(-beta * shots).exp_m1()
}

/// Clamped saturation prediction.
pub fn predict_saturation(params: &SaturationParams, shots: u32) -> f64 {
    params.predict(f64::from(shots))
}

/// Exact interpolation through two `(shots, perf)` points with a fixed
/// baseline `pi0`.
///
/// The amplitude cancels in the ratio `(p2 - pi0) / (p1 - pi0)`, leaving a
/// one-dimensional root problem in `beta` which is bracketed and bisected in
/// log space; `alpha` then follows in closed form.
pub fn two_point_fit(p1: (f64, f64), p2: (f64, f64), pi0: f64) -> Result<SaturationParams> {
    let ((d1, y1), (d2, y2)) = if p1.0 <= p2.0 { (p1, p2) } else { (p2, p1) };
    if !(d1 > 0.0) || d1 == d2 {
        return Err(Error::invalid(format!(
            "shot counts must be distinct and positive, got {d1} and {d2}"
        )));
    }
    if y1 == y2 {
        return Err(Error::Degenerate(format!(
            "flat pair ({y1} at both {d1} and {d2} shots) leaves beta unidentifiable"
        )));
    }
    let g1 = y1 - pi0;
    let g2 = y2 - pi0;
    if g1 == 0.0 || g2 == 0.0 || g1.signum() != g2.signum() {
        return Err(Error::Degenerate(format!(
            "points ({d1}, {y1}) and ({d2}, {y2}) are not on one side of pi0 = {pi0}"
        )));
    }
    let target = g2 / g1;
    // ratio(beta) = basis(beta, d2) / basis(beta, d1) falls from d2/d1 (beta -> 0)
    // to 1 (beta -> inf).
    let ratio = |beta: f64| basis(beta, d2) / basis(beta, d1);
    let (mut lo, mut hi) = (1e-12f64.ln(), 1e3f64.ln());
    if !(target < ratio(lo.exp()) && target > ratio(hi.exp())) {
        return Err(Error::Degenerate(format!(
            "gain ratio {target:.6} is outside the attainable range (1, {:.3}) for shots {d1} and {d2}",
            d2 / d1
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let beta = (0.5 * (lo + hi)).exp();
    // Pin alpha so the two points share the residual symmetrically.
    let alpha = (g1 * basis(beta, d1) + g2 * basis(beta, d2))
        / (basis(beta, d1).powi(2) + basis(beta, d2).powi(2));
    SaturationParams::new(alpha, beta, pi0)
}

/// How the baseline is treated when fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum Pi0Mode {
    Fixed(f64),
    Free,
}

impl Pi0Mode {
    /// Baseline rule: the lower of zero-shot and 1-shot performance when a
    /// zero-shot measurement exists, otherwise a free parameter.
    pub fn from_baselines(zero_shot: Option<f64>, one_shot: Option<f64>) -> Self {
        match (zero_shot, one_shot) {
            (Some(z), Some(o)) => Pi0Mode::Fixed(z.min(o)),
            (Some(z), None) => Pi0Mode::Fixed(z),
            _ => Pi0Mode::Free,
        }
    }
}

/// A least-squares fit and its sum of squared residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit {
    pub params: SaturationParams,
    pub residual: f64,
}

/// Best `(alpha, pi0)` for a fixed `beta` and the resulting squared error.
fn solve_linear(points: &[(f64, f64)], beta: f64, mode: Pi0Mode) -> (f64, f64, f64) {
    let phis: Vec<f64> = points.iter().map(|&(d, _)| basis(beta, d)).collect();
    let (alpha, pi0) = match mode {
        Pi0Mode::Fixed(pi0) => {
            let num: f64 = phis.iter().zip(points).map(|(f, &(_, y))| f * (y - pi0)).sum();
            let den: f64 = phis.iter().map(|f| f * f).sum();
            let alpha = if den > 0.0 { num / den } else { 0.0 };
            (alpha, pi0)
        }
        Pi0Mode::Free => {
            let n = points.len() as f64;
            let mean_f = phis.iter().sum::<f64>() / n;
            let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = phis
                .iter()
                .zip(points)
                .map(|(f, &(_, y))| (f - mean_f) * (y - mean_y))
                .sum();
            let sxx: f64 = phis.iter().map(|f| (f - mean_f).powi(2)).sum();
            let alpha = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            (alpha, mean_y - alpha * mean_f)
        }
    };
    let sse = phis
        .iter()
        .zip(points)
        .map(|(f, &(_, y))| (y - pi0 - alpha * f).powi(2))
        .sum();
    (alpha, pi0, sse)
}

/// Log-spaced decay-rate grid used by [`fit_saturation`].
pub fn beta_grid() -> Vec<f64> {
    let (lo, hi) = (BETA_MIN.ln(), BETA_MAX.ln());
    (0..BETA_GRID)
        .map(|i| (lo + (hi - lo) * i as f64 / (BETA_GRID - 1) as f64).exp())
        .collect()
}

/// Least-squares saturation fit by separable least squares.
///
/// For each `beta` on a log grid the linear parameters are solved in closed
/// form; the best cell is then refined by golden-section search in
/// `ln(beta)`. Identical performance values yield the flat sentinel
/// `alpha = 0, beta = 1`.
pub fn fit_saturation(points: &[(f64, f64)], mode: Pi0Mode) -> Result<SaturationFit> {
    let needed = match mode {
        Pi0Mode::Fixed(_) => 2,
        Pi0Mode::Free => 3,
    };
    if points.len() < needed {
        return Err(Error::InsufficientPoints {
            needed,
            got: points.len(),
        });
    }
    let mut shots: Vec<f64> = points.iter().map(|p| p.0).collect();
    shots.sort_by(f64::total_cmp);
    if shots.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("shot counts must be distinct"));
    }
    if points.iter().any(|&(d, y)| !(d >= 0.0) || !y.is_finite()) {
        return Err(Error::invalid("shot counts must be >= 0 and performance finite"));
    }

    let first = points[0].1;
    if points.iter().all(|p| p.1 == first) {
        let flat = match mode {
            Pi0Mode::Free => true,
            Pi0Mode::Fixed(pi0) => pi0 == first,
        };
        if flat {
            return Ok(SaturationFit {
                params: SaturationParams::new(0.0, 1.0, first)?,
                residual: 0.0,
            });
        }
    }

    let grid = beta_grid();
    let (best_idx, best_sse) = grid
        .iter()
        .enumerate()
        .map(|(i, &b)| (i, solve_linear(points, b, mode).2))
        .fold((0, f64::INFINITY), |acc, (i, sse)| if sse < acc.1 { (i, sse) } else { acc });

    let mut best_beta = grid[best_idx];
    let mut best = best_sse;
    let lo = grid[best_idx.saturating_sub(1)].ln();
    let hi = grid[(best_idx + 1).min(grid.len() - 1)].ln();
    let refined = golden_section(lo, hi, |x| solve_linear(points, x.exp(), mode).2);
    let refined_sse = solve_linear(points, refined.exp(), mode).2;
    if refined_sse <= best {
        best = refined_sse;
        best_beta = refined.exp();
    }
    let (alpha, pi0, _) = solve_linear(points, best_beta, mode);
    Ok(SaturationFit {
        params: SaturationParams::new(alpha, best_beta, pi0)?,
        residual: best,
    })
}

fn golden_section(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
