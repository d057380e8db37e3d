//! Domain types shared across the toolkit: strategy configurations, model
//! specs, measurements and estimate tables, plus configuration-space checks.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const QLORA: &str = "qlora";
pub const ICL: &str = "icl";

pub const DATA_PORTION: &str = "data_portion";
pub const ITERATIONS: &str = "iterations";
pub const SHOTS: &str = "shots";

/// Where an adaptation strategy acts on the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Updates model parameters (fine-tuning, LoRA, QLoRA).
    TrainingTime,
    /// Modifies inputs/outputs only (prompting, ICL).
    TestTime,
    /// Composition of a training-time and a test-time strategy.
    Hybrid,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::TrainingTime => "training_time",
            StrategyKind::TestTime => "test_time",
            StrategyKind::Hybrid => "hybrid",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "training_time" => Ok(StrategyKind::TrainingTime),
            "test_time" => Ok(StrategyKind::TestTime),
            "hybrid" => Ok(StrategyKind::Hybrid),
            other => Err(Error::invalid(format!("unknown strategy kind `{other}`"))),
        }
    }
}

/// One point in a strategy's configuration space.
///
/// Parameters live in a name-ordered map so that new strategies can be
/// described without new types. Configurations are totally ordered by
/// strategy id, then parameter names, then parameter values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy_id: String,
    pub kind: StrategyKind,
    pub params: BTreeMap<String, f64>,
}

impl StrategyConfig {
    pub fn new(strategy_id: impl Into<String>, kind: StrategyKind) -> Self {
        Self {
            strategy_id: strategy_id.into(),
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.params.insert(name.into(), value);
        self
    }

    pub fn qlora(data_portion: f64, iterations: u32) -> Self {
        Self::new(QLORA, StrategyKind::TrainingTime)
            .with_param(DATA_PORTION, data_portion)
            .with_param(ITERATIONS, f64::from(iterations))
    }

    pub fn icl(shots: u32) -> Self {
        Self::new(ICL, StrategyKind::TestTime).with_param(SHOTS, f64::from(shots))
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn is_qlora(&self) -> bool {
        self.strategy_id == QLORA
    }

    pub fn is_icl(&self) -> bool {
        self.strategy_id == ICL
    }
}

impl PartialEq for StrategyConfig {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for StrategyConfig {}

impl PartialOrd for StrategyConfig {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StrategyConfig {
    fn cmp(&self, other: &Self) -> Ordering {
        self.strategy_id
            .cmp(&other.strategy_id)
            .then_with(|| {
                let lhs = self.params.iter();
                let rhs = other.params.iter();
                for pair in lhs.zip(rhs) {
                    let ((ln, lv), (rn, rv)) = pair;
                    let ord = ln.cmp(rn).then_with(|| lv.total_cmp(rv));
                    if ord != Ordering::Equal {
                        return ord;
                    }
                }
                self.params.len().cmp(&other.params.len())
            })
            .then_with(|| self.kind.cmp(&other.kind))
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.strategy_id)?;
        for (i, (name, value)) in self.params.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}={value}")?;
        }
        write!(f, ")")
    }
}

/// A parameter that violates its configuration-space bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigViolation {
    pub param: String,
    pub bound: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}` violates {}", self.param, self.bound)
    }
}

fn violation(param: &str, bound: &str) -> ConfigViolation {
    ConfigViolation {
        param: param.to_string(),
        bound: bound.to_string(),
    }
}

fn require(config: &StrategyConfig, name: &str) -> Result<f64, ConfigViolation> {
    config
        .param(name)
        .ok_or_else(|| violation(name, "required parameter is missing"))
}

/// Checks a configuration against its strategy's space: `(0, 1] x N+` for
/// QLoRA, `N+` shots for ICL. Other strategies only need finite values.
pub fn validate_config(config: &StrategyConfig) -> Result<(), ConfigViolation> {
    for (name, value) in &config.params {
        if !value.is_finite() {
            return Err(violation(name, "must be finite"));
        }
    }
    if config.is_qlora() {
        let portion = require(config, DATA_PORTION)?;
        if !(portion > 0.0 && portion <= 1.0) {
            return Err(violation(DATA_PORTION, "0 < data_portion <= 1"));
        }
        let iterations = require(config, ITERATIONS)?;
        if iterations < 1.0 || iterations.fract() != 0.0 {
            return Err(violation(ITERATIONS, "integer iterations >= 1"));
        }
    } else if config.is_icl() {
        let shots = require(config, SHOTS)?;
        if shots < 1.0 || shots.fract() != 0.0 {
            return Err(violation(SHOTS, "integer shots >= 1"));
        }
    }
    Ok(())
}

/// Largest number of demonstrations that can be prepended to a query
/// without the prompt exceeding `l_max` tokens.
pub fn max_feasible_shots(query_len: u64, demo_lens: &[u64], l_max: u64) -> Result<usize> {
    if query_len > l_max {
        return Err(Error::Infeasible(format!(
            "query of {query_len} tokens exceeds the {l_max}-token limit"
        )));
    }
    let mut used = query_len;
    let mut shots = 0;
    for &len in demo_lens {
        match used.checked_add(len) {
            Some(total) if total <= l_max => {
                used = total;
                shots += 1;
            }
            _ => break,
        }
    }
    Ok(shots)
}

/// A base model's context limit and token prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub max_seq_len: u64,
    pub price_in_per_mtok: f64,
    pub price_out_per_mtok: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_seq_len < 1 {
            return Err(Error::invalid("max_seq_len must be >= 1"));
        }
        if !(self.price_in_per_mtok >= 0.0 && self.price_out_per_mtok >= 0.0) {
            return Err(Error::invalid("token prices must be >= 0"));
        }
        Ok(())
    }
}

/// An observed (config, performance, cost) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPoint {
    pub config: StrategyConfig,
    pub performance: f64,
    pub cost_usd: f64,
    pub seed: Option<i64>,
}

impl MeasurementPoint {
    pub fn new(config: StrategyConfig, performance: f64, cost_usd: f64) -> Result<Self> {
        let point = Self {
            config,
            performance,
            cost_usd,
            seed: None,
        };
        point.validate()?;
        Ok(point)
    }

    pub fn validate(&self) -> Result<()> {
        check_fraction("performance", self.performance)?;
        check_cost("cost_usd", self.cost_usd)
    }
}

/// Averages measurements that share a configuration (typically repeated
/// seeds). Output is in canonical config order; `seed` is cleared.
pub fn aggregate_seeds(points: &[MeasurementPoint]) -> Vec<MeasurementPoint> {
    let mut groups: BTreeMap<&StrategyConfig, (f64, f64, usize)> = BTreeMap::new();
    for p in points {
        let entry = groups.entry(&p.config).or_insert((0.0, 0.0, 0));
        entry.0 += p.performance;
        entry.1 += p.cost_usd;
        entry.2 += 1;
    }
    groups
        .into_iter()
        .map(|(config, (perf, cost, n))| MeasurementPoint {
            config: config.clone(),
            performance: perf / n as f64,
            cost_usd: cost / n as f64,
            seed: None,
        })
        .collect()
}

/// One row of an estimate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateRow {
    pub config: StrategyConfig,
    pub pred_perf: f64,
    pub pred_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub act_perf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub act_cost: Option<f64>,
}

impl EstimateRow {
    pub fn predicted(config: StrategyConfig, pred_perf: f64, pred_cost: f64) -> Self {
        Self {
            config,
            pred_perf,
            pred_cost,
            act_perf: None,
            act_cost: None,
        }
    }

    pub fn with_actuals(mut self, act_perf: f64, act_cost: f64) -> Self {
        self.act_perf = Some(act_perf);
        self.act_cost = Some(act_cost);
        self
    }
}

/// Predicted (and optionally observed) performance and cost per config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateTable {
    pub task: String,
    pub rows: Vec<EstimateRow>,
}

impl EstimateTable {
    /// Builds a validated table. Rows keep their input order.
    pub fn new(task: impl Into<String>, rows: Vec<EstimateRow>) -> Result<Self> {
        let table = Self {
            task: task.into(),
            rows,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for row in &self.rows {
            if !seen.insert(&row.config) {
                return Err(Error::invalid(format!("duplicate config {}", row.config)));
            }
            check_fraction("pred_perf", row.pred_perf)?;
            check_cost("pred_cost", row.pred_cost)?;
            if let Some(p) = row.act_perf {
                check_fraction("act_perf", p)?;
            }
            if let Some(c) = row.act_cost {
                check_cost("act_cost", c)?;
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn has_actuals(&self) -> bool {
        !self.rows.is_empty()
            && self
                .rows
                .iter()
                .all(|r| r.act_perf.is_some() && r.act_cost.is_some())
    }
}

pub(crate) fn check_fraction(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {value} is outside [0, 1]")))
    }
}

pub(crate) fn check_cost(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {value} must be a finite cost >= 0")))
    }
}
