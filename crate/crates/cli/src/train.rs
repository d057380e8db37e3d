use std::path::{Path, PathBuf};

use adaptsel::ft_predictor::embeddings::read_embeddings;
use adaptsel::ft_predictor::{
    gradient_check, projector_accuracy, train_projector_ce, train_projector_contrastive,
    CalibrationParams, Dataset, GradCheckReport, ProjectorModel, TrainConfig, TrainedProjector,
    TrainingCurve,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CliError, CliResult, EXIT_SELF_CHECK};
use crate::files::{emit, read_bytes, to_json};
use crate::predict::{ProxyEntry, ProxyPredictor};

/// Largest relative analytic/numeric gradient gap accepted by --self-check.
const SELF_CHECK_TOL: f64 = 1e-4;
const SELF_CHECK_COORDS: usize = 20;
const SELF_CHECK_EXAMPLES: usize = 32;
const SELF_CHECK_STEP: f64 = 1e-5;

#[derive(Debug, clap::Args)]
pub struct TrainProxyArgs {
    /// Embedding file (see docs/embedding-format.md).
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Held-out embeddings; the best held-out snapshot is kept.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    /// SGD iterations (default 300).
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Step size (default 1e-6 contrastive, 0.1 cross-entropy).
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Contrastive temperature (default 0.07).
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training-set fractions to train on, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0f64])]
    pub portions: Vec<f64>,
    /// Verify analytic gradients against finite differences first.
    #[arg(long)]
    pub self_check: bool,
    /// Proxy-score JSON (usable as `predict --qlora-proxy`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Model JSON for the largest portion.
    #[arg(long)]
    pub out_model: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ModelFile<'a> {
    data_portion: f64,
    model: &'a ProjectorModel,
    curve: &'a TrainingCurve,
}

fn load(path: &Path) -> CliResult<Dataset> {
    let raw = read_bytes(path)?;
    read_embeddings(raw.as_slice()).map_err(|e| CliError::from(e).in_file(path))
}

fn config(args: &TrainProxyArgs, data: &Dataset) -> TrainConfig {
    let base = match data {
        Dataset::Labeled(_) => TrainConfig::cross_entropy(),
        Dataset::Options(_) => TrainConfig::contrastive(),
    };
    TrainConfig {
        learning_rate: args.learning_rate.unwrap_or(base.learning_rate),
        batch_size: args.batch_size.unwrap_or(base.batch_size),
        max_iterations: args.iterations.unwrap_or(base.max_iterations),
        temperature: args.temperature.unwrap_or(base.temperature),
        seed: args.seed,
        record_full_loss: false,
    }
}

fn self_check(data: &Dataset, cfg: &TrainConfig) -> CliResult<GradCheckReport> {
    let sample = data.prefix(SELF_CHECK_EXAMPLES);
    let dim = sample.dim()?;
    let model = match &sample {
        Dataset::Labeled(v) => {
            // Zero weights sit at a symmetric point; check away from it.
            let classes = v.iter().map(|e| e.label).max().unwrap_or(0) + 1;
            let mut m = ProjectorModel::zeros_ce(dim, classes);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            m.weights.iter_mut().chain(m.bias.iter_mut()).for_each(|w| *w = rng.gen_range(-0.5..0.5));
            m
        }
        Dataset::Options(_) => ProjectorModel::random_contrastive(dim, dim, cfg.temperature, cfg.seed),
    };
    Ok(gradient_check(&model, &sample, SELF_CHECK_COORDS, SELF_CHECK_STEP, cfg.seed)?)
}

fn verdict(report: &GradCheckReport) -> CliResult<()> {
    if report.max_relative_error < SELF_CHECK_TOL {
        return Ok(());
    }
    Err(CliError::new(
        EXIT_SELF_CHECK,
        format!(
            "gradient check failed: max relative error {:.3e} over {} coordinates (limit {SELF_CHECK_TOL:e})",
            report.max_relative_error, report.coordinates
        ),
    ))
}

fn train(data: &Dataset, heldout: Option<&Dataset>, cfg: &TrainConfig) -> CliResult<TrainedProjector> {
    let trained = match (data, heldout) {
        (Dataset::Labeled(v), None) => train_projector_ce(v, None, cfg)?,
        (Dataset::Labeled(v), Some(Dataset::Labeled(h))) => train_projector_ce(v, Some(h), cfg)?,
        (Dataset::Options(v), None) => train_projector_contrastive(v, None, cfg)?,
        (Dataset::Options(v), Some(Dataset::Options(h))) => train_projector_contrastive(v, Some(h), cfg)?,
        (d, Some(h)) => {
            return Err(CliError::parse(format!(
                "held-out file is {} but training file is {}",
                h.mode_name(),
                d.mode_name()
            )))
        }
    };
    Ok(trained)
}

pub fn run(args: &TrainProxyArgs) -> CliResult<()> {
    let data = load(&args.embeddings)?;
    if data.is_empty() {
        return Err(CliError::precondition("embedding file has no examples"));
    }
    let heldout = args.heldout.as_deref().map(load).transpose()?;
    let cfg = config(args, &data);
    cfg.validate()?;
    if args.portions.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(CliError::precondition("portions must lie in (0, 1]"));
    }

    if args.self_check {
        let report = self_check(&data, &cfg)?;
        verdict(&report)?;
        eprintln!(
            "gradient check passed: max relative error {:.3e} over {} coordinates",
            report.max_relative_error, report.coordinates
        );
    }

    let mut portions = args.portions.clone();
    portions.sort_by(f64::total_cmp);
    portions.dedup();
    let mut entries = Vec::new();
    let mut last: Option<(f64, TrainedProjector)> = None;
    for &p in &portions {
        let n = ((p * data.len() as f64).ceil() as usize).clamp(1, data.len());
        let subset = data.prefix(n);
        let trained = train(&subset, heldout.as_ref(), &cfg)?;
        let train_acc = projector_accuracy(&trained.model, &subset)?;
        let held_acc = heldout
            .as_ref()
            .map(|h| projector_accuracy(&trained.model, h))
            .transpose()?;
        eprintln!(
            "portion {p}: {n} examples, train accuracy {train_acc:.4}{}",
            held_acc.map_or(String::new(), |a| format!(", held-out accuracy {a:.4}"))
        );
        entries.push(ProxyEntry {
            data_portion: p,
            iterations: None,
            score: held_acc.unwrap_or(train_acc),
            train_accuracy: Some(train_acc),
            heldout_accuracy: held_acc,
        });
        last = Some((p, trained));
    }

    let scores = ProxyPredictor {
        mode: Some(data.mode_name().to_string()),
        proxy: entries,
        calibration: CalibrationParams::default(),
        calibration_by_iterations: Default::default(),
    };
    emit(args.out.as_ref(), &to_json(&scores)?)?;
    if let (Some(path), Some((p, trained))) = (&args.out_model, &last) {
        let file = ModelFile { data_portion: *p, model: &trained.model, curve: &trained.curve };
        emit(Some(path), &to_json(&file)?)?;
    }
    Ok(())
}
