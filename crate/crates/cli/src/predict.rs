use std::collections::BTreeMap;
use std::path::PathBuf;

use adaptsel::config::{
    aggregate_seeds, validate_config, EstimateRow, EstimateTable, StrategyConfig, DATA_PORTION,
    ICL, ITERATIONS, QLORA, SHOTS,
};
use adaptsel::cost_model::{
    ft_compute_cost, ft_token_cost, icl_dataset_cost, ComputeProfile, IclBilling, IclLengths,
    Packing, TokenPricing,
};
use adaptsel::ft_predictor::{apply_calibration, CalibrationParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult, EXIT_UNKNOWN_KIND};
use crate::files::{emit, read_bytes, read_json, read_text, to_json};
use crate::fit::FitOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PackingFlag {
    Concat,
    Ffd,
}

#[derive(Debug, clap::Args)]
pub struct PredictArgs {
    /// Configuration grid JSON.
    #[arg(long)]
    pub grid: PathBuf,
    /// Workload description JSON (token counts, ICL query profile).
    #[arg(long)]
    pub workload: Option<PathBuf>,
    /// Saturation fit from `fit-icl`, used for ICL rows.
    #[arg(long)]
    pub icl_fit: Option<PathBuf>,
    /// Proxy scores and calibration for QLoRA rows.
    #[arg(long)]
    pub qlora_proxy: Option<PathBuf>,
    /// Token pricing JSON (defaults to 0.2 USD/Mtok in and out).
    #[arg(long)]
    pub pricing: Option<PathBuf>,
    /// Compute profile JSON.
    #[arg(long)]
    pub compute: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "concat")]
    pub packing: PackingFlag,
    /// Measurement CSV whose rows are attached as actuals.
    #[arg(long)]
    pub actuals: Option<PathBuf>,
    /// Task name stored in the table (defaults to the grid's `task`).
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A list of values or an inclusive `start..=stop` range.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ValueSpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl ValueSpec {
    pub fn values(&self) -> CliResult<Vec<f64>> {
        match *self {
            ValueSpec::List(ref v) => Ok(v.clone()),
            ValueSpec::Range { start, stop, step } => {
                if !(step > 0.0) || !(stop >= start) {
                    return Err(CliError::parse(format!("bad range {start}..{stop} step {step}")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // snap to 10 decimals so 0.1 steps give 0.3, not 0.30000000000000004
                Ok((0..n)
                    .map(|i| ((start + step * i as f64) * 1e10).round() / 1e10)
                    .collect())
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QloraGrid {
    data_portion: ValueSpec,
    iterations: ValueSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IclGrid {
    shots: ValueSpec,
}

/// Expands a grid document into configurations. Unknown strategies exit
/// with code 4.
pub fn expand_grid(doc: &Value) -> CliResult<(Option<String>, Vec<StrategyConfig>)> {
    let task = doc.get("task").and_then(Value::as_str).map(String::from);
    let entries = doc
        .get("strategies")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::parse("grid needs a `strategies` array"))?;
    let mut configs = Vec::new();
    for (i, entry) in entries.iter().enumerate() {
        let mut entry = entry.clone();
        let obj = entry
            .as_object_mut()
            .ok_or_else(|| CliError::parse(format!("strategies[{i}] is not an object")))?;
        let name = obj
            .remove("strategy")
            .and_then(|v| v.as_str().map(String::from))
            .ok_or_else(|| CliError::parse(format!("strategies[{i}] has no `strategy` name")))?;
        let bad = |e: serde_json::Error| CliError::parse(format!("strategies[{i}] ({name}): {e}"));
        match name.as_str() {
            QLORA => {
                let g: QloraGrid = serde_json::from_value(entry).map_err(bad)?;
                for p in g.data_portion.values()? {
                    for it in g.iterations.values()? {
                        configs.push(check(StrategyConfig::qlora(p, 0).with_param(ITERATIONS, it))?);
                    }
                }
            }
            ICL => {
                let g: IclGrid = serde_json::from_value(entry).map_err(bad)?;
                for d in g.shots.values()? {
                    configs.push(check(StrategyConfig::icl(0).with_param(SHOTS, d))?);
                }
            }
            other => {
                return Err(CliError::new(
                    EXIT_UNKNOWN_KIND,
                    format!("unknown strategy `{other}` (known: {QLORA}, {ICL})"),
                ))
            }
        }
    }
    configs.sort();
    configs.dedup();
    Ok((task, configs))
}

fn check(config: StrategyConfig) -> CliResult<StrategyConfig> {
    validate_config(&config).map_err(|v| CliError::precondition(format!("{config}: {v}")))?;
    Ok(config)
}

/// One proxy accuracy, for a data portion and optionally one iteration
/// count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyEntry {
    pub data_portion: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<f64>,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heldout_accuracy: Option<f64>,
}

/// QLoRA performance predictor: proxy scores plus calibration. A
/// calibration keyed by iteration count overrides the shared one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyPredictor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub proxy: Vec<ProxyEntry>,
    #[serde(default)]
    pub calibration: CalibrationParams,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub calibration_by_iterations: BTreeMap<String, CalibrationParams>,
}

impl ProxyPredictor {
    pub fn predict(&self, portion: f64, iterations: f64) -> CliResult<f64> {
        let exact = self
            .proxy
            .iter()
            .find(|e| e.data_portion == portion && e.iterations == Some(iterations));
        let any = self
            .proxy
            .iter()
            .find(|e| e.data_portion == portion && e.iterations.is_none());
        let entry = exact.or(any).ok_or_else(|| {
            CliError::precondition(format!(
                "no proxy score for data_portion={portion}, iterations={iterations}"
            ))
        })?;
        let key = format!("{iterations}");
        let cal = self.calibration_by_iterations.get(&key).unwrap_or(&self.calibration);
        Ok(apply_calibration(cal, entry.score).value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FtBilling {
    #[default]
    Compute,
    Token,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IclWorkload {
    pub n_queries: u64,
    pub query_len: f64,
    pub exp_in: f64,
    pub exp_out: f64,
    #[serde(default)]
    pub billing: IclBilling,
    #[serde(default)]
    pub c_eval: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    /// Tokens in the full fine-tuning set.
    #[serde(default)]
    pub train_tokens: u64,
    #[serde(default = "default_l_max")]
    pub l_max: u64,
    /// Per-sequence token counts, needed for `--packing ffd`.
    #[serde(default)]
    pub sequence_lengths: Vec<u64>,
    #[serde(default)]
    pub c_eval: f64,
    #[serde(default)]
    pub ft_billing: FtBilling,
    #[serde(default)]
    pub icl: Option<IclWorkload>,
}

fn default_l_max() -> u64 {
    512
}

struct Costing {
    workload: Workload,
    compute: ComputeProfile,
    pricing: TokenPricing,
    packing: PackingFlag,
}

impl Costing {
    fn qlora(&self, portion: f64, iterations: f64) -> CliResult<f64> {
        let w = &self.workload;
        let epochs = iterations as u32;
        let tokens = (portion * w.train_tokens as f64).round() as u64;
        match w.ft_billing {
            FtBilling::Token => Ok(ft_token_cost(tokens as f64, epochs, &self.pricing) + w.c_eval),
            FtBilling::Compute => {
                let n = (portion * w.sequence_lengths.len() as f64).round() as usize;
                let packing = match self.packing {
                    PackingFlag::Concat => Packing::Concat,
                    PackingFlag::Ffd if w.sequence_lengths.is_empty() => {
                        return Err(CliError::precondition(
                            "--packing ffd needs `sequence_lengths` in the workload",
                        ))
                    }
                    PackingFlag::Ffd => Packing::Ffd(&w.sequence_lengths[..n]),
                };
                Ok(ft_compute_cost(epochs, tokens, w.l_max, &self.compute, w.c_eval, packing)?)
            }
        }
    }

    fn icl(&self, shots: f64) -> CliResult<f64> {
        let icl = self
            .workload
            .icl
            .as_ref()
            .ok_or_else(|| CliError::precondition("ICL rows need an `icl` section in the workload"))?;
        let lengths = IclLengths {
            query_len: icl.query_len,
            exp_in: icl.exp_in,
            exp_out: icl.exp_out,
        };
        Ok(icl_dataset_cost(shots as u32, icl.n_queries, lengths, &self.pricing, icl.billing, icl.c_eval))
    }
}

pub fn run(args: &PredictArgs) -> CliResult<()> {
    let grid: Value = read_json(&args.grid)?;
    let (grid_task, configs) = expand_grid(&grid).map_err(|e| e.in_file(&args.grid))?;
    let task = args.task.clone().or(grid_task).unwrap_or_default();

    let compute = match &args.compute {
        Some(p) => ComputeProfile::from_json(&read_text(p)?).map_err(|e| CliError::from(e).in_file(p))?,
        None => ComputeProfile::default(),
    };
    let pricing = match &args.pricing {
        Some(p) => TokenPricing::from_json(&read_text(p)?).map_err(|e| CliError::from(e).in_file(p))?,
        None => TokenPricing::default(),
    };
    let icl_fit: Option<FitOutput> = args.icl_fit.as_ref().map(|p| read_json(p)).transpose()?;
    let proxy: Option<ProxyPredictor> = args.qlora_proxy.as_ref().map(|p| read_json(p)).transpose()?;
    let workload: Option<Workload> = args.workload.as_ref().map(|p| read_json(p)).transpose()?;

    let mut rows = Vec::with_capacity(configs.len());
    if !configs.is_empty() {
        let workload = workload.ok_or_else(|| CliError::precondition("--workload is required for a nonempty grid"))?;
        let costing = Costing { workload, compute, pricing, packing: args.packing };
        for config in configs {
            let row = if config.is_qlora() {
                let proxy = proxy
                    .as_ref()
                    .ok_or_else(|| CliError::precondition("QLoRA rows need --qlora-proxy"))?;
                let p = config.param(DATA_PORTION).unwrap_or_default();
                let it = config.param(ITERATIONS).unwrap_or_default();
                EstimateRow::predicted(config, proxy.predict(p, it)?, costing.qlora(p, it)?)
            } else {
                let fit = icl_fit
                    .as_ref()
                    .ok_or_else(|| CliError::precondition("ICL rows need --icl-fit"))?;
                let d = config.param(SHOTS).unwrap_or_default();
                EstimateRow::predicted(config, fit.params.predict(d), costing.icl(d)?)
            };
            rows.push(row);
        }
    }

    if let Some(path) = &args.actuals {
        let raw = read_bytes(path)?;
        let measured = adaptsel::io::read_measurements(raw.as_slice())
            .map_err(|e| CliError::from(e).in_file(path))?;
        let measured: BTreeMap<StrategyConfig, (f64, f64)> = aggregate_seeds(&measured)
            .into_iter()
            .map(|m| (m.config, (m.performance, m.cost_usd)))
            .collect();
        for row in &mut rows {
            if let Some(&(perf, cost)) = measured.get(&row.config) {
                row.act_perf = Some(perf);
                row.act_cost = Some(cost);
            }
        }
    }

    let table = EstimateTable::new(task, rows)?;
    eprintln!("{} rows", table.len());
    emit(args.out.as_ref(), &to_json(&table)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn ranges_snap() {
        let r = ValueSpec::Range { start: 0.1, stop: 1.0, step: 0.1 };
        let v = r.values().unwrap();
        assert_eq!(v.len(), 10);
        assert_eq!(v[2], 0.3);
        assert_eq!(v[9], 1.0);
        assert!(ValueSpec::Range { start: 1.0, stop: 0.0, step: 0.1 }.values().is_err());
    }

    #[test]
    fn grid_sizes() {
        let doc = json!({"strategies": [
            {"strategy": "qlora", "data_portion": {"start": 0.1, "stop": 1.0, "step": 0.1}, "iterations": [4, 5, 6, 7, 8]},
            {"strategy": "icl", "shots": [1, 2, 4, 8, 16]}
        ]});
        assert_eq!(expand_grid(&doc).unwrap().1.len(), 55);
        let empty = json!({"strategies": []});
        assert!(expand_grid(&empty).unwrap().1.is_empty());
        let unknown = json!({"strategies": [{"strategy": "lora", "rank": [8]}]});
        assert_eq!(expand_grid(&unknown).unwrap_err().code, EXIT_UNKNOWN_KIND);
        let bad = json!({"strategies": [{"strategy": "icl", "shots": [1], "extra": 1}]});
        assert_eq!(expand_grid(&bad).unwrap_err().code, 2);
        let infeasible = json!({"strategies": [{"strategy": "qlora", "data_portion": [1.5], "iterations": [4]}]});
        assert_eq!(expand_grid(&infeasible).unwrap_err().code, 3);
    }

    #[test]
    fn proxy_lookup() {
        let p = ProxyPredictor {
            mode: None,
            proxy: vec![
                ProxyEntry { data_portion: 0.5, iterations: None, score: 0.8, train_accuracy: None, heldout_accuracy: None },
                ProxyEntry { data_portion: 0.5, iterations: Some(4.0), score: 0.9, train_accuracy: None, heldout_accuracy: None },
            ],
            calibration: CalibrationParams { a: 1.0, b: 0.05 },
            calibration_by_iterations: BTreeMap::from([("8".to_string(), CalibrationParams { a: 1.0, b: -0.1 })]),
        };
        assert!((p.predict(0.5, 4.0).unwrap() - 0.95).abs() < 1e-12);
        assert!((p.predict(0.5, 5.0).unwrap() - 0.85).abs() < 1e-12);
        assert!((p.predict(0.5, 8.0).unwrap() - 0.7).abs() < 1e-12);
        assert!(p.predict(0.6, 4.0).is_err());
    }
}
