use serde::{Deserialize, Serialize};

use super::{
    crr, partition_bands, select_per_band, selection_regret, CostBand, CostBasis, ScorePolicy,
};
use crate::config::{EstimateTable, StrategyConfig};
use crate::error::{Error, Result};

/// The best actual performer of a band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub config: StrategyConfig,
    pub perf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub band: CostBand,
    pub candidates: usize,
    pub chosen: Option<StrategyConfig>,
    pub pred_perf: Option<f64>,
    pub pred_cost: Option<f64>,
    pub act_perf_of_chosen: Option<f64>,
    pub act_optimum: Option<Optimum>,
    pub regret: Option<f64>,
    /// Cost of running every configuration in the band: actual costs when
    /// known, predicted otherwise.
    pub c_full: f64,
    pub c_ours: Option<f64>,
    pub crr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub task: String,
    pub basis: CostBasis,
    pub epsilon: f64,
    pub bands: Vec<BandReport>,
    /// Mean regret over nonempty bands, when actuals are present.
    pub mae_selection: Option<f64>,
    pub c_full: f64,
    pub c_ours: Option<f64>,
    pub crr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub bands: usize,
    pub policy: ScorePolicy,
    pub basis: CostBasis,
    /// Prediction cost per band, for the cost reduction columns.
    pub ours_cost: Option<Vec<f64>>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            bands: 3,
            policy: ScorePolicy::default(),
            basis: CostBasis::Predicted,
            ours_cost: None,
        }
    }
}

/// Partitions, selects, and scores a table in one pass.
pub fn build_report(table: &EstimateTable, opts: &ReportOptions) -> Result<SelectionReport> {
    if table.is_empty() {
        return Err(Error::Empty("estimate table"));
    }
    table.validate()?;
    if let Some(ours) = &opts.ours_cost {
        if ours.len() != opts.bands {
            return Err(Error::DimensionMismatch {
                expected: opts.bands,
                got: ours.len(),
            });
        }
    }
    let bands = partition_bands(&opts.basis.costs(table)?, opts.bands)?;
    let selections = select_per_band(table, &bands, &opts.policy, opts.basis)?;
    let regrets = if table.has_actuals() {
        Some(selection_regret(table, &selections)?)
    } else {
        None
    };

    let mut out = Vec::with_capacity(selections.len());
    for (b, sel) in selections.iter().enumerate() {
        let chosen = sel.chosen.map(|i| &table.rows[i]);
        let band_regret = regrets.as_ref().and_then(|r| r.per_band[b]);
        let c_full: f64 = sel
            .members
            .iter()
            .map(|&i| {
                let r = &table.rows[i];
                r.act_cost.unwrap_or(r.pred_cost)
            })
            .sum();
        let c_ours = opts.ours_cost.as_ref().map(|v| v[b]);
        let band_crr = match c_ours {
            Some(o) if c_full > 0.0 => Some(crr(c_full, o)?),
            _ => None,
        };
        out.push(BandReport {
            band: sel.band,
            candidates: sel.members.len(),
            chosen: chosen.map(|r| r.config.clone()),
            pred_perf: chosen.map(|r| r.pred_perf),
            pred_cost: chosen.map(|r| r.pred_cost),
            act_perf_of_chosen: chosen.and_then(|r| r.act_perf),
            act_optimum: band_regret.map(|g| Optimum {
                config: table.rows[g.optimum].config.clone(),
                perf: g.optimum_perf,
            }),
            regret: band_regret.map(|g| g.regret),
            c_full,
            c_ours,
            crr: band_crr,
        });
    }

    let c_full: f64 = out.iter().map(|b| b.c_full).sum();
    let c_ours = opts.ours_cost.as_ref().map(|v| v.iter().sum::<f64>());
    let total_crr = match c_ours {
        Some(o) if c_full > 0.0 => Some(crr(c_full, o)?),
        _ => None,
    };
    Ok(SelectionReport {
        task: table.task.clone(),
        basis: opts.basis,
        epsilon: opts.policy.epsilon,
        bands: out,
        mae_selection: regrets.map(|r| r.mean),
        c_full,
        c_ours,
        crr: total_crr,
    })
}
