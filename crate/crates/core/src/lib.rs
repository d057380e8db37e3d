//! Cost-aware selection of LLM adaptation strategies.
//!
//! Cheap predictors estimate how each configuration of an adaptation
//! strategy would perform and what it would cost; the selector then picks
//! the best predicted configuration within each cost band, without running
//! the full grid.
//!
//! - [`scaling_law`]: exponential saturation curves over shot counts.
//! - [`ft_predictor`]: a linear projector on frozen embeddings as a proxy
//!   for fine-tuning accuracy, plus affine calibration.
//! - [`cost_model`]: compute-time and token-priced cost formulas.
//! - [`selector`]: cost bands, scoring, regret/CRR metrics, Pareto fronts.

pub mod config;
pub mod cost_model;
pub mod error;
pub mod ft_predictor;
pub mod io;
pub mod scaling_law;
pub mod selector;

pub use config::{
    aggregate_seeds, EstimateRow, EstimateTable, MeasurementPoint, ModelSpec, StrategyConfig,
    StrategyKind,
};
pub use error::{Error, Result};
