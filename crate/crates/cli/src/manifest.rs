use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use adaptsel::cost_model::{ComputeProfile, TokenPricing};
use adaptsel::ModelSpec;
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::files::{emit, read_bytes, read_json, read_text, to_json};
use crate::fit::{FitIclArgs, FitOutput, Pi0Flag};
use crate::predict::{PackingFlag, PredictArgs, ProxyPredictor, Workload};
use crate::select::SelectArgs;
use crate::train::TrainProxyArgs;
use crate::{fit, predict, select, train};

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Run manifest JSON.
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    TrainProxy,
    FitIcl,
    Predict,
    Select,
}

/// Named input files. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFiles {
    pub measurements: Option<PathBuf>,
    pub grid: Option<PathBuf>,
    pub workload: Option<PathBuf>,
    pub pricing: Option<PathBuf>,
    pub compute: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub qlora_proxy: Option<PathBuf>,
    pub icl_fit: Option<PathBuf>,
    pub actuals: Option<PathBuf>,
    pub estimates: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub task: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub files: ManifestFiles,
    pub pipeline: Vec<Stage>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_bands")]
    pub bands: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_bands() -> usize {
    3
}

fn default_epsilon() -> f64 {
    1e-6
}

fn resolve(base: &Path, p: &Option<PathBuf>) -> Option<PathBuf> {
    p.as_ref().map(|p| if p.is_absolute() { p.clone() } else { base.join(p) })
}

fn need(path: Option<PathBuf>, stage: &str, what: &str) -> CliResult<PathBuf> {
    path.ok_or_else(|| CliError::precondition(format!("stage {stage} needs files.{what}")))
}

struct Resolved {
    measurements: Option<PathBuf>,
    grid: Option<PathBuf>,
    workload: Option<PathBuf>,
    pricing: Option<PathBuf>,
    compute: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    qlora_proxy: Option<PathBuf>,
    icl_fit: Option<PathBuf>,
    actuals: Option<PathBuf>,
    estimates: Option<PathBuf>,
}

impl Resolved {
    fn new(base: &Path, f: &ManifestFiles) -> Self {
        Self {
            measurements: resolve(base, &f.measurements),
            grid: resolve(base, &f.grid),
            workload: resolve(base, &f.workload),
            pricing: resolve(base, &f.pricing),
            compute: resolve(base, &f.compute),
            embeddings: resolve(base, &f.embeddings),
            qlora_proxy: resolve(base, &f.qlora_proxy),
            icl_fit: resolve(base, &f.icl_fit),
            actuals: resolve(base, &f.actuals),
            estimates: resolve(base, &f.estimates),
        }
    }

    // Every named file must exist and parse before any stage runs.
    fn validate(&self) -> CliResult<()> {
        fn in_file(p: &Path) -> impl Fn(adaptsel::Error) -> CliError + '_ {
            move |e| CliError::from(e).in_file(p)
        }
        if let Some(p) = &self.measurements {
            adaptsel::io::read_measurements(read_bytes(p)?.as_slice()).map_err(in_file(p))?;
        }
        if let Some(p) = &self.grid {
            let doc: serde_json::Value = read_json(p)?;
            predict::expand_grid(&doc).map_err(|e| e.in_file(p))?;
        }
        if let Some(p) = &self.workload {
            read_json::<Workload>(p)?;
        }
        if let Some(p) = &self.pricing {
            TokenPricing::from_json(&read_text(p)?).map_err(in_file(p))?;
        }
        if let Some(p) = &self.compute {
            ComputeProfile::from_json(&read_text(p)?).map_err(in_file(p))?;
        }
        if let Some(p) = &self.embeddings {
            let raw = read_bytes(p)?;
            adaptsel::ft_predictor::embeddings::read_embeddings(raw.as_slice()).map_err(in_file(p))?;
        }
        if let Some(p) = &self.qlora_proxy {
            read_json::<ProxyPredictor>(p)?;
        }
        if let Some(p) = &self.icl_fit {
            read_json::<FitOutput>(p)?;
        }
        if let Some(p) = &self.actuals {
            adaptsel::io::read_measurements(read_bytes(p)?.as_slice()).map_err(in_file(p))?;
        }
        if let Some(p) = &self.estimates {
            adaptsel::io::read_estimates(read_bytes(p)?.as_slice()).map_err(in_file(p))?;
        }
        Ok(())
    }
}

pub fn run(args: &RunArgs) -> CliResult<()> {
    let manifest: RunManifest = read_json(&args.manifest)?;
    manifest.model.validate().map_err(|e| CliError::from(e).in_file(&args.manifest))?;
    if manifest.pipeline.is_empty() {
        return Err(CliError::precondition("pipeline is empty"));
    }
    let base = args.manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut files = Resolved::new(&base, &manifest.files);
    files.validate()?;

    let out_dir = if manifest.output_dir.is_absolute() {
        manifest.output_dir.clone()
    } else {
        base.join(&manifest.output_dir)
    };
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::precondition(format!("{}: {e}", out_dir.display())))?;

    // Model prices stand in for a missing pricing file.
    if files.pricing.is_none() {
        let pricing = TokenPricing {
            in_per_mtok: manifest.model.price_in_per_mtok,
            out_per_mtok: manifest.model.price_out_per_mtok,
            ..TokenPricing::default()
        };
        let path = out_dir.join("pricing.json");
        emit(Some(&path), &to_json(&pricing)?)?;
        files.pricing = Some(path);
    }

    let mut produced: BTreeMap<&str, PathBuf> = BTreeMap::new();
    for stage in &manifest.pipeline {
        match stage {
            Stage::TrainProxy => {
                let out = out_dir.join("proxy_scores.json");
                train::run(&TrainProxyArgs {
                    embeddings: need(files.embeddings.clone(), "train-proxy", "embeddings")?,
                    heldout: None,
                    iterations: None,
                    learning_rate: None,
                    batch_size: None,
                    temperature: None,
                    seed: manifest.seed,
                    portions: vec![1.0],
                    self_check: false,
                    out: Some(out.clone()),
                    out_model: Some(out_dir.join("proxy_model.json")),
                })?;
                produced.insert("proxy", out);
            }
            Stage::FitIcl => {
                let out = out_dir.join("icl_fit.json");
                fit::run(&FitIclArgs {
                    measurements: need(files.measurements.clone(), "fit-icl", "measurements")?,
                    pi0: Pi0Flag::Auto,
                    strategy: adaptsel::config::ICL.to_string(),
                    shots: vec![1, 2, 4, 8, 16],
                    no_aggregate: false,
                    out: Some(out.clone()),
                })?;
                produced.insert("icl_fit", out);
            }
            Stage::Predict => {
                let out = out_dir.join("estimates.json");
                predict::run(&PredictArgs {
                    grid: need(files.grid.clone(), "predict", "grid")?,
                    workload: files.workload.clone(),
                    icl_fit: produced.get("icl_fit").cloned().or_else(|| files.icl_fit.clone()),
                    qlora_proxy: files.qlora_proxy.clone().or_else(|| produced.get("proxy").cloned()),
                    pricing: files.pricing.clone(),
                    compute: files.compute.clone(),
                    packing: PackingFlag::Concat,
                    actuals: files.actuals.clone(),
                    task: Some(manifest.task.clone()),
                    out: Some(out.clone()),
                })?;
                produced.insert("estimates", out);
            }
            Stage::Select => {
                select::run(&SelectArgs {
                    estimates: need(
                        produced.get("estimates").cloned().or_else(|| files.estimates.clone()),
                        "select",
                        "estimates",
                    )?,
                    bands: manifest.bands,
                    epsilon: manifest.epsilon,
                    band_basis: Default::default(),
                    ours_cost: None,
                    out: Some(out_dir.join("report.json")),
                })?;
            }
        }
    }
    Ok(())
}
