use serde::{Deserialize, Serialize};

use super::{actual_order, BandSelection};
use crate::config::EstimateTable;
use crate::error::{Error, Result};

/// Regret of one band's selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRegret {
    /// Row index of the best actual performer in the band.
    pub optimum: usize,
    pub optimum_perf: f64,
    pub chosen_perf: f64,
    /// `optimum_perf - chosen_perf`, never negative.
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    /// One entry per band; `None` for empty bands.
    pub per_band: Vec<Option<BandRegret>>,
    /// Mean over nonempty bands.
    pub mean: f64,
}

/// Actual-performance gap between each band's true optimum and its chosen
/// row. Ties for the optimum go to the cheaper config.
pub fn selection_regret(table: &EstimateTable, selections: &[BandSelection]) -> Result<RegretSummary> {
    let mut per_band = Vec::with_capacity(selections.len());
    for sel in selections {
        let Some(chosen) = sel.chosen else {
            per_band.push(None);
            continue;
        };
        for &i in &sel.members {
            let r = &table.rows[i];
            if r.act_perf.is_none() || r.act_cost.is_none() {
                return Err(Error::invalid(format!("{} has no actual performance/cost", r.config)));
            }
        }
        let optimum = sel
            .members
            .iter()
            .copied()
            .max_by(|&a, &b| actual_order(&table.rows[a], &table.rows[b]))
            .expect("nonempty band");
        let optimum_perf = table.rows[optimum].act_perf.unwrap_or_default();
        let chosen_perf = table.rows[chosen].act_perf.unwrap_or_default();
        per_band.push(Some(BandRegret {
            optimum,
            optimum_perf,
            chosen_perf,
            regret: (optimum_perf - chosen_perf).max(0.0),
        }));
    }
    let regrets: Vec<f64> = per_band.iter().flatten().map(|r| r.regret).collect();
    if regrets.is_empty() {
        return Err(Error::Empty("bands"));
    }
    let mean = regrets.iter().sum::<f64>() / regrets.len() as f64;
    Ok(RegretSummary { per_band, mean })
}

/// Mean absolute difference of two equal-length vectors.
pub fn mae(pred: &[f64], act: &[f64]) -> Result<f64> {
    if pred.len() != act.len() {
        return Err(Error::DimensionMismatch {
            expected: pred.len(),
            got: act.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("mae inputs"));
    }
    let total: f64 = pred.iter().zip(act).map(|(p, a)| (p - a).abs()).sum();
    Ok(total / pred.len() as f64)
}

/// Cost reduction ratio in percent: `(c_full - c_ours) / c_full * 100`.
pub fn crr(c_full: f64, c_ours: f64) -> Result<f64> {
    if !(c_full > 0.0) {
        return Err(Error::invalid(format!("full cost must be > 0, got {c_full}")));
    }
    Ok((c_full - c_ours) / c_full * 100.0)
}

/// Rounds to `decimals` places with ties to even, as used in reports.
pub fn round_half_even(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = x * scale;
    // Snap values that are a tie up to representation error.
    let snapped = if ((scaled - scaled.trunc()).abs() - 0.5).abs() < 1e-9 {
        scaled.trunc() + 0.5 * scaled.signum()
    } else {
        scaled
    };
    snapped.round_ties_even() / scale
}

/// One task/band cell of a published results table, in percent and USD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableCell {
    pub task: String,
    pub level: String,
    /// Actual accuracy of the selected strategy (%).
    pub pred_acc: f64,
    /// Actual accuracy of the band optimum (%).
    pub act_acc: f64,
    /// Printed regret (%), if the table has one.
    #[serde(default)]
    pub mae_reported: Option<f64>,
    /// Cost of running every configuration in the band (USD).
    pub act_total_cost: f64,
    /// Cost of predicting instead (USD).
    pub ours_total_cost: f64,
    /// Printed cost reduction ratio (%), if the table has one.
    #[serde(default)]
    pub crr_reported: Option<f64>,
}

/// Grand means over a set of [`TableCell`]s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cells: usize,
    /// Mean of `|act_acc - pred_acc|`.
    pub mean_regret: f64,
    /// Mean of the printed regret column, when every cell has one.
    pub mean_regret_reported: Option<f64>,
    /// Mean of the printed cost reduction column, when every cell has one.
    pub mean_crr_reported: Option<f64>,
    /// Mean cost reduction recomputed from the cost columns.
    pub mean_crr_recomputed: f64,
}

pub fn summarize_cells(cells: &[TableCell]) -> Result<CellSummary> {
    if cells.is_empty() {
        return Err(Error::Empty("table cells"));
    }
    let n = cells.len() as f64;
    let mean_regret = cells.iter().map(|c| (c.act_acc - c.pred_acc).abs()).sum::<f64>() / n;
    let mut crr_sum = 0.0;
    for c in cells {
        crr_sum += crr(c.act_total_cost, c.ours_total_cost)?;
    }
    let mean_of = |f: fn(&TableCell) -> Option<f64>| {
        let values: Option<Vec<f64>> = cells.iter().map(f).collect();
        values.map(|v| v.iter().sum::<f64>() / n)
    };
    Ok(CellSummary {
        cells: cells.len(),
        mean_regret,
        mean_regret_reported: mean_of(|c| c.mae_reported),
        mean_crr_reported: mean_of(|c| c.crr_reported),
        mean_crr_recomputed: crr_sum / n,
    })
}
