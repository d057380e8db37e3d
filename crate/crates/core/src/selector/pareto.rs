use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A (cost, performance) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub cost: f64,
    pub perf: f64,
}

impl ParetoPoint {
    pub fn new(cost: f64, perf: f64) -> Self {
        Self { cost, perf }
    }

    /// No worse on either axis and strictly better on one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.cost <= other.cost
            && self.perf >= other.perf
            && (self.cost < other.cost || self.perf > other.perf)
    }
}

/// Indices of the nondominated points, sorted by cost. Of several identical
/// points the first is kept. Points with a non-finite coordinate are
/// ignored.
pub fn pareto_indices(points: &[ParetoPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len())
        .filter(|&i| points[i].cost.is_finite() && points[i].perf.is_finite())
        .collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a], points[b]);
        pa.cost
            .total_cmp(&pb.cost)
            .then_with(|| pb.perf.total_cmp(&pa.perf))
            .then_with(|| a.cmp(&b))
    });
    let mut kept = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for i in order {
        if points[i].perf > best {
            best = points[i].perf;
            kept.push(i);
        }
    }
    kept
}

pub fn pareto_frontier(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    pareto_indices(points).into_iter().map(|i| points[i]).collect()
}

/// Best performance reachable at `cost` on a frontier: the step function
/// through its points. `None` below the cheapest point.
pub fn frontier_value(frontier: &[ParetoPoint], cost: f64) -> Option<f64> {
    frontier
        .iter()
        .filter(|p| p.cost <= cost)
        .map(|p| p.perf)
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

/// One constant piece of the frontier difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSample {
    pub cost_lo: f64,
    pub cost_hi: f64,
    pub old_perf: f64,
    pub new_perf: f64,
    /// `max(new_perf - old_perf, 0)`.
    pub gain: f64,
}

/// The piecewise-constant difference between two frontiers over
/// `[lo, hi]`, one sample per piece.
pub fn gain_series(
    old: &[ParetoPoint],
    new: &[ParetoPoint],
    (lo, hi): (f64, f64),
) -> Result<Vec<GainSample>> {
    if old.is_empty() || new.is_empty() {
        return Err(Error::Empty("frontier"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::invalid(format!("bad cost range [{lo}, {hi}]")));
    }
    let mut cuts: Vec<f64> = old
        .iter()
        .chain(new)
        .map(|p| p.cost)
        .filter(|&c| c > lo && c < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut series = Vec::with_capacity(cuts.len());
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (Some(o), Some(n)) = (frontier_value(old, a), frontier_value(new, a)) else {
            return Err(Error::invalid(format!(
                "cost range starts at {lo}, below the cheapest frontier point"
            )));
        };
        series.push(GainSample {
            cost_lo: a,
            cost_hi: b,
            old_perf: o,
            new_perf: n,
            gain: (n - o).max(0.0),
        });
    }
    Ok(series)
}

/// Area between the new and old frontier step functions over `[lo, hi]`,
/// counting only where the new frontier is higher. Units are perf × USD.
pub fn adaptation_gain(old: &[ParetoPoint], new: &[ParetoPoint], range: (f64, f64)) -> Result<f64> {
    let old = pareto_frontier(old);
    let new = pareto_frontier(new);
    Ok(gain_series(&old, &new, range)?
        .iter()
        .map(|s| s.gain * (s.cost_hi - s.cost_lo))
        .sum())
}
