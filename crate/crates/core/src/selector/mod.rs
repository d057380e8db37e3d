//! Per-band strategy selection: equal-width cost bands, the score function,
//! regret and cost-reduction metrics, and Pareto frontiers.

mod metrics;
mod pareto;
mod report;

pub use metrics::{crr, mae, round_half_even, selection_regret, BandRegret, RegretSummary};
pub use metrics::{summarize_cells, CellSummary, TableCell};
pub use pareto::{
    adaptation_gain, frontier_value, gain_series, pareto_frontier, pareto_indices, GainSample,
    ParetoPoint,
};
pub use report::{build_report, BandReport, Optimum, ReportOptions, SelectionReport};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::config::{EstimateRow, EstimateTable};
use crate::error::{Error, Result};

/// One of `k` equal-width cost intervals. Bands are half-open `[lo, hi)`
/// except the last, which also contains `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBand {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
}

impl CostBand {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Splits `[min(costs), max(costs)]` into `k` equal-width bands.
///
/// When every cost is equal the range is a point: all `k` bands are that
/// point and every cost lands in band 0.
pub fn partition_bands(costs: &[f64], k: usize) -> Result<Vec<CostBand>> {
    if costs.is_empty() {
        return Err(Error::Empty("costs"));
    }
    if k == 0 {
        return Err(Error::invalid("band count must be >= 1"));
    }
    if let Some(c) = costs.iter().find(|c| !c.is_finite()) {
        return Err(Error::invalid(format!("cost {c} is not finite")));
    }
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / k as f64;
    let edge = |i: usize| if i == k { hi } else { lo + width * i as f64 };
    Ok((0..k)
        .map(|i| CostBand {
            index: i,
            lo: edge(i),
            hi: edge(i + 1),
        })
        .collect())
}

/// Index of the band containing `cost`, if any.
pub fn band_of(bands: &[CostBand], cost: f64) -> Option<usize> {
    let first = bands.first()?;
    if first.lo == first.hi {
        return (cost == first.lo).then_some(0);
    }
    let last = bands.len() - 1;
    bands
        .iter()
        .position(|b| cost >= b.lo && (cost < b.hi || (b.index == last && cost <= b.hi)))
}

/// Weight of the cost penalty in the score function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorePolicy {
    pub epsilon: f64,
}

impl Default for ScorePolicy {
    fn default() -> Self {
        Self { epsilon: 1e-6 }
    }
}

impl ScorePolicy {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }
}

/// `perf - epsilon * cost / c_max_band`.
pub fn score(perf: f64, cost: f64, c_max_band: f64, policy: &ScorePolicy) -> Result<f64> {
    if !(c_max_band > 0.0) {
        return Err(Error::invalid(format!("band cost ceiling must be > 0, got {c_max_band}")));
    }
    Ok(perf - policy.epsilon * cost / c_max_band)
}

/// Which cost column places a row in a band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostBasis {
    /// Predicted cost; the only option before anything has been run.
    #[default]
    Predicted,
    /// Observed cost, for comparing against tables banded after the fact.
    Actual,
}

impl CostBasis {
    pub fn cost(self, row: &EstimateRow) -> Result<f64> {
        match self {
            CostBasis::Predicted => Ok(row.pred_cost),
            CostBasis::Actual => row
                .act_cost
                .ok_or_else(|| Error::invalid(format!("{} has no actual cost", row.config))),
        }
    }

    pub fn costs(self, table: &EstimateTable) -> Result<Vec<f64>> {
        table.rows.iter().map(|r| self.cost(r)).collect()
    }
}

impl std::str::FromStr for CostBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pred" | "predicted" => Ok(CostBasis::Predicted),
            "act" | "actual" => Ok(CostBasis::Actual),
            other => Err(Error::invalid(format!("unknown cost basis `{other}`"))),
        }
    }
}

/// The rows of one band and the row chosen from them.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSelection {
    pub band: CostBand,
    /// Row indices into the table, in table order.
    pub members: Vec<usize>,
    /// Row index of the selected configuration; `None` for an empty band.
    pub chosen: Option<usize>,
}

/// Picks the highest-scoring row in every band. The cost penalty is scaled
/// by the largest predicted cost in the band. Exact score ties go to the
/// lower predicted cost, then to the canonical config order.
pub fn select_per_band(
    table: &EstimateTable,
    bands: &[CostBand],
    policy: &ScorePolicy,
    basis: CostBasis,
) -> Result<Vec<BandSelection>> {
    let costs = basis.costs(table)?;
    let mut members = vec![Vec::new(); bands.len()];
    for (i, &c) in costs.iter().enumerate() {
        if let Some(b) = band_of(bands, c) {
            members[b].push(i);
        }
    }
    Ok(bands
        .iter()
        .zip(members)
        .map(|(band, members)| {
            let chosen = choose(&table.rows, &members, policy);
            BandSelection {
                band: *band,
                members,
                chosen,
            }
        })
        .collect())
}

fn choose(rows: &[EstimateRow], members: &[usize], policy: &ScorePolicy) -> Option<usize> {
    let c_max = members
        .iter()
        .map(|&i| rows[i].pred_cost)
        .fold(0.0, f64::max);
    let score_of = |i: usize| {
        let r = &rows[i];
        if c_max > 0.0 {
            r.pred_perf - policy.epsilon * r.pred_cost / c_max
        } else {
            r.pred_perf
        }
    };
    members.iter().copied().max_by(|&a, &b| {
        score_of(a)
            .total_cmp(&score_of(b))
            .then_with(|| rows[b].pred_cost.total_cmp(&rows[a].pred_cost))
            .then_with(|| rows[b].config.cmp(&rows[a].config))
    })
}

/// Orders rows by actual performance, then lower actual cost, then
/// canonical config order; the maximum is a band's true optimum.
pub(crate) fn actual_order(a: &EstimateRow, b: &EstimateRow) -> Ordering {
    let perf = |r: &EstimateRow| r.act_perf.unwrap_or(f64::NEG_INFINITY);
    let cost = |r: &EstimateRow| r.act_cost.unwrap_or(f64::INFINITY);
    perf(a)
        .total_cmp(&perf(b))
        .then_with(|| cost(b).total_cmp(&cost(a)))
        .then_with(|| b.config.cmp(&a.config))
}
