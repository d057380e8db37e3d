//! Fine-tuning performance prediction from frozen embeddings: mean pooling,
//! a lightweight linear projector, and affine calibration of the projector's
//! accuracy against realized fine-tuning accuracy.

mod calibration;
pub mod embeddings;
mod projector;

pub use calibration::{
    apply_calibration, calibrate, calibration_subset_size, Calibrated, CalibrationParams,
};
pub use projector::{
    contrastive_loss_grad, cross_entropy_loss_grad, gradient_check, projector_accuracy,
    train_projector_ce, train_projector_contrastive, GradCheckReport, Gradient, IterationRecord,
    LossMode, Normalization, ProjectorModel, TrainConfig, TrainedProjector, TrainingCurve,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pooled embedding with a class label (cross-entropy mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub vector: Vec<f64>,
    pub label: usize,
}

/// An anchor embedding scored against candidate answers (contrastive mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionExample {
    pub anchor: Vec<f64>,
    pub options: Vec<Vec<f64>>,
    pub correct: usize,
}

/// A homogeneous set of examples for one projector mode.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Labeled(Vec<LabeledExample>),
    Options(Vec<OptionExample>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Labeled(v) => v.len(),
            Dataset::Options(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            Dataset::Labeled(_) => "ce",
            Dataset::Options(_) => "contrastive",
        }
    }

    /// Embedding dimension shared by every vector, or an error if vectors
    /// disagree.
    pub fn dim(&self) -> Result<usize> {
        let mut dims = Vec::new();
        match self {
            Dataset::Labeled(v) => dims.extend(v.iter().map(|e| e.vector.len())),
            Dataset::Options(v) => {
                for e in v {
                    dims.push(e.anchor.len());
                    dims.extend(e.options.iter().map(Vec::len));
                }
            }
        }
        let first = *dims.first().ok_or(Error::Empty("dataset"))?;
        if first == 0 {
            return Err(Error::invalid("embedding dimension must be >= 1"));
        }
        match dims.iter().find(|&&d| d != first) {
            Some(&d) => Err(Error::DimensionMismatch { expected: first, got: d }),
            None => Ok(first),
        }
    }

    /// First `n` examples, in file order.
    pub fn prefix(&self, n: usize) -> Dataset {
        match self {
            Dataset::Labeled(v) => Dataset::Labeled(v[..n.min(v.len())].to_vec()),
            Dataset::Options(v) => Dataset::Options(v[..n.min(v.len())].to_vec()),
        }
    }
}

/// Componentwise mean of a token sequence.
pub fn mean_pool(tokens: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = tokens.first().ok_or(Error::Empty("token sequence"))?;
    let dim = first.len();
    let mut sum = vec![0.0; dim];
    for token in tokens {
        if token.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: token.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(token) {
            *s += x;
        }
    }
    let n = tokens.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}
