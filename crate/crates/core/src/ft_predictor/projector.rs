//! Linear projector over pooled embeddings, trained by plain mini-batch SGD
//! in one of two modes:
//!
//! * cross-entropy: logits `W^T x + b` against a class label;
//! * contrastive: anchor and options are layer-normalized, projected, and
//!   scored by cosine similarity over a temperature; the loss is the
//!   cross-entropy of the correct option within its option set.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledExample, OptionExample};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;
const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum LossMode {
    CrossEntropy,
    Contrastive { temperature: f64 },
}

impl LossMode {
    fn name(&self) -> &'static str {
        match self {
            LossMode::CrossEntropy => "ce",
            LossMode::Contrastive { .. } => "contrastive",
        }
    }
}

/// Input normalization. Layer norm uses per-vector statistics with no
/// learned affine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Normalization {
    None,
    LayerNorm { eps: f64 },
}

impl Normalization {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            Normalization::None => x.to_vec(),
            Normalization::LayerNorm { eps } => {
                let n = x.len() as f64;
                let mean = x.iter().sum::<f64>() / n;
                let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let inv = 1.0 / (var + eps).sqrt();
                x.iter().map(|v| (v - mean) * inv).collect()
            }
        }
    }
}

/// Weights are stored row-major as `input_dim x output_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorModel {
    pub mode: LossMode,
    pub input_dim: usize,
    pub output_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub normalization: Normalization,
}

impl ProjectorModel {
    /// All-zero cross-entropy classifier: uniform logits.
    pub fn zeros_ce(input_dim: usize, classes: usize) -> Self {
        Self {
            mode: LossMode::CrossEntropy,
            input_dim,
            output_dim: classes,
            weights: vec![0.0; input_dim * classes],
            bias: vec![0.0; classes],
            normalization: Normalization::None,
        }
    }

    /// Contrastive projector with the identity as projection.
    pub fn identity_contrastive(dim: usize, temperature: f64) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self {
            mode: LossMode::Contrastive { temperature },
            input_dim: dim,
            output_dim: dim,
            weights,
            bias: vec![0.0; dim],
            normalization: Normalization::LayerNorm { eps: LN_EPS },
        }
    }

    /// Contrastive projector with weights drawn from `U(-1/sqrt(e), 1/sqrt(e))`.
    pub fn random_contrastive(dim: usize, out_dim: usize, temperature: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (dim as f64).sqrt();
        let weights = (0..dim * out_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Self {
            mode: LossMode::Contrastive { temperature },
            input_dim: dim,
            output_dim: out_dim,
            weights,
            bias: vec![0.0; out_dim],
            normalization: Normalization::LayerNorm { eps: LN_EPS },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.output_dim == 0 || self.input_dim == 0 {
            return Err(Error::invalid("projector dimensions must be >= 1"));
        }
        if self.weights.len() != self.input_dim * self.output_dim || self.bias.len() != self.output_dim {
            return Err(Error::invalid("projector parameter shapes do not match its dimensions"));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::invalid("projector has non-finite parameters"));
        }
        Ok(())
    }

    /// Linear part only, on an already-normalized input.
    fn project(&self, x: &[f64]) -> Vec<f64> {
        let k = self.output_dim;
        let mut out = self.bias.clone();
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * k..(i + 1) * k];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
        out
    }

    /// Normalization followed by projection.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.project(&self.normalization.apply(x))
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: len,
            });
        }
        Ok(())
    }

    /// Per-class logits or per-option cosine scores (over temperature).
    pub fn scores_labeled(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x)
    }

    pub fn scores_options(&self, ex: &OptionExample) -> Vec<f64> {
        let temperature = match self.mode {
            LossMode::Contrastive { temperature } => temperature,
            LossMode::CrossEntropy => 1.0,
        };
        let u = self.forward(&ex.anchor);
        ex.options
            .iter()
            .map(|o| cosine(&u, &self.forward(o)) / temperature)
            .collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt().max(NORM_FLOOR)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a) * norm(b))
}

/// Softmax probabilities and `-log p[target]`, computed stably.
fn softmax_xent(scores: &[f64], target: usize) -> (Vec<f64>, f64) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let probs = exps.iter().map(|e| e / z).collect();
    let loss = z.ln() - (scores[target] - max);
    (probs, loss)
}

fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Gradient of the mean loss with respect to weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradient {
    fn zeros(model: &ProjectorModel) -> Self {
        Self {
            weights: vec![0.0; model.weights.len()],
            bias: vec![0.0; model.bias.len()],
        }
    }

    fn scale(&mut self, s: f64) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|g| *g *= s);
    }

    /// Accumulates the outer product `x (x) delta` and `delta` into the bias.
    fn add_outer(&mut self, x: &[f64], delta: &[f64]) {
        let k = delta.len();
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            for (g, d) in self.weights[i * k..(i + 1) * k].iter_mut().zip(delta) {
                *g += xi * d;
            }
        }
        for (g, d) in self.bias.iter_mut().zip(delta) {
            *g += d;
        }
    }
}

/// Mean softmax cross-entropy over `batch` and its analytic gradient.
pub fn cross_entropy_loss_grad<'a>(
    model: &ProjectorModel,
    batch: impl IntoIterator<Item = &'a LabeledExample>,
) -> (f64, Gradient) {
    let mut grad = Gradient::zeros(model);
    let mut total = 0.0;
    let mut n = 0usize;
    for ex in batch {
        let x = model.normalization.apply(&ex.vector);
        let logits = model.project(&x);
        let (mut probs, loss) = softmax_xent(&logits, ex.label);
        total += loss;
        probs[ex.label] -= 1.0;
        grad.add_outer(&x, &probs);
        n += 1;
    }
    if n > 0 {
        grad.scale(1.0 / n as f64);
        total /= n as f64;
    }
    (total, grad)
}

/// d cos(u, v) / du.
fn cosine_grad(u: &[f64], v: &[f64]) -> Vec<f64> {
    let (nu, nv) = (norm(u), norm(v));
    let c = dot(u, v) / (nu * nv);
    u.iter()
        .zip(v)
        .map(|(ui, vi)| vi / (nu * nv) - c * ui / (nu * nu))
        .collect()
}

/// Mean contrastive loss over `batch` and its analytic gradient.
pub fn contrastive_loss_grad<'a>(
    model: &ProjectorModel,
    batch: impl IntoIterator<Item = &'a OptionExample>,
) -> (f64, Gradient) {
    let temperature = match model.mode {
        LossMode::Contrastive { temperature } => temperature,
        LossMode::CrossEntropy => 1.0,
    };
    let mut grad = Gradient::zeros(model);
    let mut total = 0.0;
    let mut n = 0usize;
    for ex in batch {
        let a = model.normalization.apply(&ex.anchor);
        let u = model.project(&a);
        let opts: Vec<Vec<f64>> = ex.options.iter().map(|o| model.normalization.apply(o)).collect();
        let vs: Vec<Vec<f64>> = opts.iter().map(|o| model.project(o)).collect();
        let scores: Vec<f64> = vs.iter().map(|v| cosine(&u, v) / temperature).collect();
        let (probs, loss) = softmax_xent(&scores, ex.correct);
        total += loss;

        let mut du = vec![0.0; u.len()];
        for (j, (v, o)) in vs.iter().zip(&opts).enumerate() {
            let coef = (probs[j] - if j == ex.correct { 1.0 } else { 0.0 }) / temperature;
            if coef == 0.0 {
                continue;
            }
            for (d, g) in du.iter_mut().zip(cosine_grad(&u, v)) {
                *d += coef * g;
            }
            let dv: Vec<f64> = cosine_grad(v, &u).into_iter().map(|g| coef * g).collect();
            grad.add_outer(o, &dv);
        }
        grad.add_outer(&a, &du);
        n += 1;
    }
    if n > 0 {
        grad.scale(1.0 / n as f64);
        total /= n as f64;
    }
    (total, grad)
}

/// SGD settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub temperature: f64,
    pub seed: u64,
    /// Record the full training-set loss after every step.
    #[serde(default)]
    pub record_full_loss: bool,
}

impl TrainConfig {
    /// Contrastive defaults: lr 1e-6, batch 8, 300 iterations, temperature 0.07.
    pub fn contrastive() -> Self {
        Self {
            learning_rate: 1e-6,
            batch_size: 8,
            max_iterations: 300,
            temperature: 0.07,
            seed: 0,
            record_full_loss: false,
        }
    }

    /// Cross-entropy defaults. Zero-initialized linear softmax is convex, so
    /// a much larger step than the contrastive default is stable.
    pub fn cross_entropy() -> Self {
        Self {
            learning_rate: 0.1,
            ..Self::contrastive()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("temperature must be > 0"));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::contrastive()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub batch_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heldout_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub initial_loss: f64,
    pub records: Vec<IterationRecord>,
    /// Iteration whose parameters were returned (0 = initialization).
    pub selected_iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedProjector {
    pub model: ProjectorModel,
    pub curve: TrainingCurve,
}

/// Shared SGD loop. Batches come from a per-epoch shuffle driven by the
/// config seed, so identical inputs give bitwise-identical weights.
fn run_sgd<E>(
    mut model: ProjectorModel,
    train: &[E],
    heldout: Option<&Dataset>,
    cfg: &TrainConfig,
    loss_grad: impl Fn(&ProjectorModel, &mut dyn Iterator<Item = &E>) -> (f64, Gradient),
) -> Result<TrainedProjector> {
    let full_loss = |m: &ProjectorModel| loss_grad(m, &mut train.iter()).0;
    let initial_loss = full_loss(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();
    let mut records = Vec::with_capacity(cfg.max_iterations);

    let mut best: Option<(f64, usize, ProjectorModel)> = match heldout {
        Some(h) => Some((projector_accuracy(&model, h)?, 0, model.clone())),
        None => None,
    };

    for iteration in 1..=cfg.max_iterations {
        if cursor >= order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(order.len());
        let batch = &order[cursor..end];
        cursor = end;

        let (batch_loss, grad) = loss_grad(&model, &mut batch.iter().map(|&i| &train[i]));
        for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
            *w -= cfg.learning_rate * g;
        }
        for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
            *b -= cfg.learning_rate * g;
        }

        let heldout_accuracy = match heldout {
            Some(h) => Some(projector_accuracy(&model, h)?),
            None => None,
        };
        if let (Some(acc), Some(best)) = (heldout_accuracy, best.as_mut()) {
            if acc > best.0 {
                *best = (acc, iteration, model.clone());
            }
        }
        records.push(IterationRecord {
            iteration,
            batch_loss,
            full_loss: cfg.record_full_loss.then(|| full_loss(&model)),
            heldout_accuracy,
        });
    }

    let (model, selected_iteration) = match best {
        Some((_, it, m)) => (m, it),
        None => (model, cfg.max_iterations),
    };
    model.validate()?;
    Ok(TrainedProjector {
        model,
        curve: TrainingCurve {
            initial_loss,
            records,
            selected_iteration,
        },
    })
}

/// Trains a zero-initialized linear softmax classifier.
///
/// When `heldout` is given, the snapshot with the best held-out accuracy
/// is returned (earliest on ties); otherwise the final iterate.
pub fn train_projector_ce(
    examples: &[LabeledExample],
    heldout: Option<&[LabeledExample]>,
    cfg: &TrainConfig,
) -> Result<TrainedProjector> {
    cfg.validate()?;
    let data = Dataset::Labeled(examples.to_vec());
    let dim = data.dim()?;
    let classes = examples.iter().map(|e| e.label).max().unwrap_or(0) + 1;
    let first = examples[0].label;
    if examples.iter().all(|e| e.label == first) {
        return Err(Error::invalid("cross-entropy training needs at least two distinct labels"));
    }
    let heldout = match heldout {
        Some(h) => {
            let ds = Dataset::Labeled(h.to_vec());
            if ds.dim()? != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: ds.dim()? });
            }
            Some(ds)
        }
        None => None,
    };
    let model = ProjectorModel::zeros_ce(dim, classes);
    run_sgd(model, examples, heldout.as_ref(), cfg, |m, batch| {
        cross_entropy_loss_grad(m, batch)
    })
}

fn check_option_examples(examples: &[OptionExample]) -> Result<()> {
    let ln = Normalization::LayerNorm { eps: LN_EPS };
    for (i, ex) in examples.iter().enumerate() {
        if ex.options.len() < 2 {
            return Err(Error::invalid(format!("example {i} has fewer than two options")));
        }
        if ex.correct >= ex.options.len() {
            return Err(Error::invalid(format!(
                "example {i}: correct index {} out of {} options",
                ex.correct,
                ex.options.len()
            )));
        }
        if ln.apply(&ex.anchor).iter().all(|v| *v == 0.0) {
            return Err(Error::invalid(format!(
                "example {i}: anchor normalizes to the zero vector, cosine is undefined"
            )));
        }
    }
    Ok(())
}

/// Trains a layer-norm + linear projector with the temperature-scaled
/// cosine objective, returning the best held-out snapshot when `heldout`
/// is given.
pub fn train_projector_contrastive(
    examples: &[OptionExample],
    heldout: Option<&[OptionExample]>,
    cfg: &TrainConfig,
) -> Result<TrainedProjector> {
    cfg.validate()?;
    let data = Dataset::Options(examples.to_vec());
    let dim = data.dim()?;
    check_option_examples(examples)?;
    let heldout = match heldout {
        Some(h) => {
            check_option_examples(h)?;
            let ds = Dataset::Options(h.to_vec());
            if ds.dim()? != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: ds.dim()? });
            }
            Some(ds)
        }
        None => None,
    };
    let model = ProjectorModel::random_contrastive(dim, dim, cfg.temperature, cfg.seed);
    run_sgd(model, examples, heldout.as_ref(), cfg, |m, batch| {
        contrastive_loss_grad(m, batch)
    })
}

/// Fraction of examples whose highest score hits the label / correct
/// option. Ties go to the lowest index.
pub fn projector_accuracy(model: &ProjectorModel, examples: &Dataset) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty("examples"));
    }
    let hits = match (model.mode, examples) {
        (LossMode::CrossEntropy, Dataset::Labeled(v)) => {
            let mut hits = 0usize;
            for ex in v {
                model.check_dim(ex.vector.len())?;
                if argmax_lowest(&model.scores_labeled(&ex.vector)) == ex.label {
                    hits += 1;
                }
            }
            hits
        }
        (LossMode::Contrastive { .. }, Dataset::Options(v)) => {
            let mut hits = 0usize;
            for ex in v {
                model.check_dim(ex.anchor.len())?;
                if argmax_lowest(&model.scores_options(ex)) == ex.correct {
                    hits += 1;
                }
            }
            hits
        }
        (mode, data) => {
            return Err(Error::ModeMismatch {
                model: mode.name(),
                examples: data.mode_name(),
            })
        }
    };
    Ok(hits as f64 / examples.len() as f64)
}

/// Outcome of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub coordinates: usize,
    pub max_relative_error: f64,
}

/// Compares the analytic gradient to central differences at `n_coords`
/// randomly chosen parameters. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(
    model: &ProjectorModel,
    data: &Dataset,
    n_coords: usize,
    step: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let loss_grad = |m: &ProjectorModel| -> Result<(f64, Gradient)> {
        match (m.mode, data) {
            (LossMode::CrossEntropy, Dataset::Labeled(v)) => Ok(cross_entropy_loss_grad(m, v)),
            (LossMode::Contrastive { .. }, Dataset::Options(v)) => Ok(contrastive_loss_grad(m, v)),
            (mode, d) => Err(Error::ModeMismatch {
                model: mode.name(),
                examples: d.mode_name(),
            }),
        }
    };
    let (_, grad) = loss_grad(model)?;
    let total = model.weights.len() + model.bias.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel: f64 = 0.0;
    for _ in 0..n_coords {
        let idx = rng.gen_range(0..total);
        let bump = |delta: f64| {
            let mut m = model.clone();
            if idx < m.weights.len() {
                m.weights[idx] += delta;
            } else {
                m.bias[idx - model.weights.len()] += delta;
            }
            m
        };
        let numeric = (loss_grad(&bump(step))?.0 - loss_grad(&bump(-step))?.0) / (2.0 * step);
        let analytic = if idx < grad.weights.len() {
            grad.weights[idx]
        } else {
            grad.bias[idx - grad.weights.len()]
        };
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        max_rel = max_rel.max(rel);
    }
    Ok(GradCheckReport {
        coordinates: n_coords,
        max_relative_error: max_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_two_class(seed: u64, n: usize) -> Vec<LabeledExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 2;
                let sign = if label == 0 { -1.0 } else { 1.0 };
                LabeledExample {
                    vector: vec![sign + rng.gen_range(-0.09..0.09), rng.gen_range(-0.09..0.09)],
                    label,
                }
            })
            .collect()
    }

    fn random_options(seed: u64, n: usize, dim: usize, k: usize) -> Vec<OptionExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vec = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        (0..n)
            .map(|_| OptionExample {
                anchor: vec(&mut rng),
                options: (0..k).map(|_| vec(&mut rng)).collect(),
                correct: rng.gen_range(0..k),
            })
            .collect()
    }

    #[test]
    fn zero_weights_give_ln_k() {
        let data: Vec<LabeledExample> = (0..12)
            .map(|i| LabeledExample { vector: vec![i as f64, 1.0, -2.0], label: i % 4 })
            .collect();
        let model = ProjectorModel::zeros_ce(3, 4);
        let (loss, _) = cross_entropy_loss_grad(&model, &data);
        assert!((loss - 4f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        // x = 0 separates the classes: every class-1 point has x0 > 0.9.
        let data = toy_two_class(5, 40);
        assert!(data.iter().all(|e| (e.vector[0] > 0.0) == (e.label == 1)));
        let cfg = TrainConfig { max_iterations: 200, ..TrainConfig::cross_entropy() };
        let trained = train_projector_ce(&data, None, &cfg).unwrap();
        let acc = projector_accuracy(&trained.model, &Dataset::Labeled(data)).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn full_batch_loss_nonincreasing() {
        let data = toy_two_class(6, 20);
        let cfg = TrainConfig {
            batch_size: 20,
            max_iterations: 50,
            record_full_loss: true,
            ..TrainConfig::cross_entropy()
        };
        let trained = train_projector_ce(&data, None, &cfg).unwrap();
        let mut prev = trained.curve.initial_loss;
        for r in &trained.curve.records {
            let cur = r.full_loss.unwrap();
            assert!(cur <= prev + 1e-12, "{cur} > {prev}");
            prev = cur;
        }
    }

    #[test]
    fn ce_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<LabeledExample> = (0..15)
            .map(|i| LabeledExample {
                vector: (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                label: i % 3,
            })
            .collect();
        let mut model = ProjectorModel::zeros_ce(5, 3);
        model.weights.iter_mut().for_each(|w| *w = rng.gen_range(-0.5..0.5));
        model.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        let report = gradient_check(&model, &Dataset::Labeled(data), 10, 1e-5, 1).unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn contrastive_gradient_matches_finite_differences() {
        let data = random_options(4, 6, 6, 4);
        let mut model = ProjectorModel::random_contrastive(6, 5, 0.07, 2);
        model.bias.iter_mut().enumerate().for_each(|(i, b)| *b = 0.05 * i as f64);
        let report = gradient_check(&model, &Dataset::Options(data), 10, 1e-5, 3).unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn identical_option_scores_highest() {
        let anchor = vec![1.0, -1.0, 0.0, 0.0];
        let ortho = vec![0.0, 0.0, 1.0, -1.0];
        let ex = OptionExample {
            anchor: anchor.clone(),
            options: vec![ortho.clone(), anchor.clone(), ortho],
            correct: 1,
        };
        let model = ProjectorModel::identity_contrastive(4, 0.07);
        let scores = model.scores_options(&ex);
        assert!(scores[1] > scores[0] && scores[1] > scores[2]);
        assert_eq!(projector_accuracy(&model, &Dataset::Options(vec![ex])).unwrap(), 1.0);
    }

    #[test]
    fn equidistant_options_give_ln_options() {
        let ex = OptionExample {
            anchor: vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
            options: vec![
                vec![0.0, 0.0, 1.0, -1.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.0, 0.0, 1.0, -1.0],
                vec![0.0, 0.0, 1.0, 1.0, -1.0, -1.0],
            ],
            correct: 2,
        };
        let model = ProjectorModel::identity_contrastive(6, 0.07);
        let (loss, _) = contrastive_loss_grad(&model, [&ex]);
        assert!((loss - 3f64.ln()).abs() < 1e-9, "{loss}");
    }

    #[test]
    fn contrastive_rejects_bad_examples() {
        let cfg = TrainConfig::contrastive();
        let one_option = OptionExample { anchor: vec![1.0, 0.0], options: vec![vec![0.0, 1.0]], correct: 0 };
        assert!(train_projector_contrastive(&[one_option], None, &cfg).is_err());
        let zero_anchor =
            OptionExample { anchor: vec![0.0, 0.0], options: vec![vec![0.0, 1.0], vec![1.0, 0.0]], correct: 0 };
        assert!(train_projector_contrastive(&[zero_anchor], None, &cfg).is_err());
        let bad_idx =
            OptionExample { anchor: vec![1.0, 0.0], options: vec![vec![0.0, 1.0], vec![1.0, 0.0]], correct: 2 };
        assert!(train_projector_contrastive(&[bad_idx], None, &cfg).is_err());
    }

    #[test]
    fn ce_rejects_single_class_and_dim_mismatch() {
        let cfg = TrainConfig::cross_entropy();
        let one = vec![
            LabeledExample { vector: vec![1.0], label: 0 },
            LabeledExample { vector: vec![2.0], label: 0 },
        ];
        assert!(train_projector_ce(&one, None, &cfg).is_err());
        let mixed = vec![
            LabeledExample { vector: vec![1.0], label: 0 },
            LabeledExample { vector: vec![2.0, 1.0], label: 1 },
        ];
        assert!(matches!(
            train_projector_ce(&mixed, None, &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn accuracy_errors() {
        let model = ProjectorModel::zeros_ce(2, 2);
        assert!(matches!(
            projector_accuracy(&model, &Dataset::Labeled(vec![])),
            Err(Error::Empty(_))
        ));
        let opts = Dataset::Options(random_options(1, 2, 2, 2));
        assert!(matches!(projector_accuracy(&model, &opts), Err(Error::ModeMismatch { .. })));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let model = ProjectorModel::zeros_ce(2, 3);
        let data = Dataset::Labeled(vec![
            LabeledExample { vector: vec![1.0, 1.0], label: 0 },
            LabeledExample { vector: vec![1.0, 1.0], label: 2 },
        ]);
        assert_eq!(projector_accuracy(&model, &data).unwrap(), 0.5);
    }

    #[test]
    fn random_model_near_chance() {
        let data = random_options(21, 10_000, 8, 4);
        let model = ProjectorModel::random_contrastive(8, 8, 0.07, 99);
        let acc = projector_accuracy(&model, &Dataset::Options(data)).unwrap();
        assert!((0.22..=0.28).contains(&acc), "{acc}");
    }

    #[test]
    fn accuracy_invariant_under_monotone_score_transform() {
        // Scaling every weight and bias by a positive constant scales all
        // logits, which is strictly monotone.
        let data = toy_two_class(8, 30);
        let cfg = TrainConfig { max_iterations: 5, ..TrainConfig::cross_entropy() };
        let model = train_projector_ce(&data, None, &cfg).unwrap().model;
        let mut scaled = model.clone();
        scaled.weights.iter_mut().chain(scaled.bias.iter_mut()).for_each(|w| *w *= 3.7);
        let ds = Dataset::Labeled(data);
        assert_eq!(projector_accuracy(&model, &ds).unwrap(), projector_accuracy(&scaled, &ds).unwrap());
    }

    #[test]
    fn training_is_deterministic() {
        let data = random_options(2, 24, 6, 3);
        let cfg = TrainConfig { max_iterations: 20, learning_rate: 1e-2, ..TrainConfig::contrastive() };
        let a = train_projector_contrastive(&data, None, &cfg).unwrap();
        let b = train_projector_contrastive(&data, None, &cfg).unwrap();
        let bits = |m: &ProjectorModel| m.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.model), bits(&b.model));
    }

    #[test]
    fn heldout_selects_best_snapshot() {
        let train = toy_two_class(10, 40);
        let held = toy_two_class(11, 20);
        let cfg = TrainConfig { max_iterations: 30, ..TrainConfig::cross_entropy() };
        let trained = train_projector_ce(&train, Some(&held), &cfg).unwrap();
        let best = trained
            .curve
            .records
            .iter()
            .filter_map(|r| r.heldout_accuracy)
            .fold(0.0, f64::max);
        let got = projector_accuracy(&trained.model, &Dataset::Labeled(held)).unwrap();
        assert_eq!(got, best);
        assert!(trained.curve.selected_iteration >= 1);
    }

    #[test]
    fn zero_iterations_rejected() {
        let cfg = TrainConfig { max_iterations: 0, ..TrainConfig::cross_entropy() };
        assert!(train_projector_ce(&toy_two_class(1, 4), None, &cfg).is_err());
    }
}
