//! Analytic cost models: compute-time and token-priced fine-tuning, ICL
//! inference, prediction overhead, and exhaustive-grid totals.

mod packing;

pub use packing::{pack_concat, pack_exact, pack_ffd, PACK_EXACT_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SECONDS_PER_HOUR: f64 = 3600.0;
const TOKENS_PER_MTOK: f64 = 1e6;

/// Seconds per data point per epoch for proxy training on an idle A100.
pub const PROXY_SECONDS_PER_POINT: f64 = 0.0009;

/// Hardware and schedule for compute-time fine-tuning cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComputeProfile {
    /// USD per device-hour.
    pub hourly_rate: f64,
    pub n_devices: u32,
    /// Seconds per optimizer step.
    pub step_time_s: f64,
    /// Peak memory occupation as a fraction of device memory.
    pub mem_util: f64,
    pub batch_size: u32,
    pub grad_accum: u32,
}

impl Default for ComputeProfile {
    fn default() -> Self {
        Self {
            hourly_rate: 1.0,
            n_devices: 1,
            step_time_s: 1.09,
            mem_util: 1.0,
            batch_size: 1,
            grad_accum: 2,
        }
    }
}

impl ComputeProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hourly_rate", self.hourly_rate),
            ("n_devices", f64::from(self.n_devices)),
            ("step_time_s", self.step_time_s),
            ("mem_util", self.mem_util),
            ("batch_size", f64::from(self.batch_size)),
            ("grad_accum", f64::from(self.grad_accum)),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.mem_util > 1.0 {
            return Err(Error::invalid(format!("mem_util must be <= 1, got {}", self.mem_util)));
        }
        Ok(())
    }

    /// Parses a strict-schema JSON document; unknown fields are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let profile: Self = serde_json::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }
}

/// Per-epoch training price `coef * tokens^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLaw {
    pub coef: f64,
    pub exponent: f64,
}

/// Token prices for inference and token-billed fine-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenPricing {
    /// USD per million input tokens.
    pub in_per_mtok: f64,
    /// USD per million output tokens.
    pub out_per_mtok: f64,
    pub train_powerlaw: PowerLaw,
}

impl Default for TokenPricing {
    /// Llama-3.1-8B style rates: 0.2 USD/Mtok and the fitted per-epoch law.
    fn default() -> Self {
        Self {
            in_per_mtok: 0.2,
            out_per_mtok: 0.2,
            train_powerlaw: PowerLaw {
                coef: 8.69e-7,
                exponent: 0.956,
            },
        }
    }
}

impl TokenPricing {
    pub fn validate(&self) -> Result<()> {
        if !(self.in_per_mtok >= 0.0 && self.out_per_mtok >= 0.0) {
            return Err(Error::invalid("token prices must be >= 0"));
        }
        if !(self.train_powerlaw.coef >= 0.0) {
            return Err(Error::invalid("power-law coefficient must be >= 0"));
        }
        let e = self.train_powerlaw.exponent;
        if !(e > 0.0 && e < 2.0) {
            return Err(Error::invalid(format!("power-law exponent must be in (0, 2), got {e}")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let pricing: Self = serde_json::from_str(text)?;
        pricing.validate()?;
        Ok(pricing)
    }
}

/// How the training set is packed into windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Packing<'a> {
    /// Concatenate all tokens and cut into windows.
    Concat,
    /// Keep sequences whole; pack by first-fit decreasing.
    Ffd(&'a [u64]),
}

/// Compute-time fine-tuning cost in USD:
///
/// `E * packed / (B * G) * t_step / 3600 * rate * N * mem_util + c_eval`.
///
/// The step count `packed / (B * G)` is kept fractional so cost varies
/// continuously with the data portion.
pub fn ft_compute_cost(
    epochs: u32,
    total_tokens: u64,
    l_max: u64,
    profile: &ComputeProfile,
    c_eval: f64,
    packing: Packing<'_>,
) -> Result<f64> {
    if epochs == 0 {
        return Err(Error::invalid("epochs must be >= 1"));
    }
    profile.validate()?;
    let packed = match packing {
        Packing::Concat => pack_concat(total_tokens, l_max)? as f64,
        Packing::Ffd(lengths) => pack_ffd(lengths, l_max)? as f64,
    };
    let steps = packed / f64::from(profile.batch_size * profile.grad_accum);
    let hours = f64::from(epochs) * steps * profile.step_time_s / SECONDS_PER_HOUR;
    Ok(hours * profile.hourly_rate * f64::from(profile.n_devices) * profile.mem_util + c_eval)
}

/// Token-billed fine-tuning cost: `epochs * coef * n_tokens^exponent`,
/// with no minimum charge.
pub fn ft_token_cost(n_tokens: f64, epochs: u32, pricing: &TokenPricing) -> f64 {
    let law = pricing.train_powerlaw;
    f64::from(epochs) * law.coef * n_tokens.powf(law.exponent)
}

/// Which rate applies to which ICL tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IclBilling {
    /// Demonstrations and the query at the input rate, generated tokens at
    /// the output rate.
    #[default]
    Split,
    /// Every token at the input rate.
    Uniform,
}

/// Expected token profile of one ICL workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IclLengths {
    /// Query length in tokens.
    pub query_len: f64,
    /// Expected input length of one demonstration.
    pub exp_in: f64,
    /// Expected output length (of a demonstration and of the answer).
    pub exp_out: f64,
}

/// Cost of one ICL query with `shots` demonstrations:
/// `(E[L_in] + E[L_out]) * d` demonstration tokens plus the query and its
/// expected output, plus `c_eval`.
pub fn icl_query_cost(
    shots: u32,
    lengths: IclLengths,
    pricing: &TokenPricing,
    billing: IclBilling,
    c_eval: f64,
) -> f64 {
    let p_in = pricing.in_per_mtok / TOKENS_PER_MTOK;
    let p_out = match billing {
        IclBilling::Split => pricing.out_per_mtok / TOKENS_PER_MTOK,
        IclBilling::Uniform => p_in,
    };
    let demos = (lengths.exp_in + lengths.exp_out) * f64::from(shots);
    p_in * (demos + lengths.query_len) + p_out * lengths.exp_out + c_eval
}

/// ICL cost over `n_queries` queries of average length, plus a one-off
/// evaluation charge.
pub fn icl_dataset_cost(
    shots: u32,
    n_queries: u64,
    lengths: IclLengths,
    pricing: &TokenPricing,
    billing: IclBilling,
    c_eval_total: f64,
) -> f64 {
    n_queries as f64 * icl_query_cost(shots, lengths, pricing, billing, 0.0) + c_eval_total
}

/// Prediction overhead: proxy training + strategy-specific overhead +
/// validation runs.
pub fn prediction_cost(c_proxy: f64, c_overhead: f64, c_val: f64) -> f64 {
    c_proxy + c_overhead + c_val
}

/// Proxy training cost from a fixed per-point processing time.
pub fn proxy_training_cost(n_points: u64, epochs: u32, seconds_per_point: f64, profile: &ComputeProfile) -> f64 {
    n_points as f64 * f64::from(epochs) * seconds_per_point / SECONDS_PER_HOUR
        * profile.hourly_rate
        * f64::from(profile.n_devices)
}

/// Cost of exhaustively running every configuration.
pub fn grid_total_cost(per_config_costs: &[f64]) -> f64 {
    per_config_costs.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    /// Prediction plus the selected run is cheaper than the full grid.
    pub efficient: bool,
    /// `(total_predict + selected_cost) / total_grid`.
    pub ratio: f64,
}

impl Efficiency {
    /// How many times cheaper than the exhaustive grid.
    pub fn speedup(&self) -> f64 {
        1.0 / self.ratio
    }

    /// Percent saved relative to the exhaustive grid.
    pub fn reduction_percent(&self) -> f64 {
        (1.0 - self.ratio) * 100.0
    }
}

pub fn efficiency_check(total_predict: f64, selected_cost: f64, total_grid: f64) -> Result<Efficiency> {
    if !(total_grid > 0.0) {
        return Err(Error::invalid(format!("grid total must be > 0, got {total_grid}")));
    }
    let spent = total_predict + selected_cost;
    Ok(Efficiency {
        efficient: spent < total_grid,
        ratio: spent / total_grid,
    })
}
