use std::path::PathBuf;
use std::str::FromStr;

use adaptsel::config::{aggregate_seeds, SHOTS};
use adaptsel::scaling_law::{fit_saturation, two_point_fit, Pi0Mode, SaturationParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files::{emit, read_bytes, to_json};
use crate::render::{color_enabled, Table};

/// `--pi0` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pi0Flag {
    /// Lower of zero-shot and 1-shot when a zero-shot row exists, else free.
    Auto,
    Free,
    Fixed(f64),
}

impl FromStr for Pi0Flag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Pi0Flag::Auto),
            "free" => Ok(Pi0Flag::Free),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Pi0Flag::Fixed)
                .ok_or_else(|| format!("expected auto, free or a number, got `{v}`")),
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct FitIclArgs {
    /// Measurement CSV with ICL rows (`param:shots`).
    #[arg(long)]
    pub measurements: PathBuf,
    /// Baseline handling: auto, free, or a fixed value.
    #[arg(long, default_value = "auto")]
    pub pi0: Pi0Flag,
    /// Strategy id of the rows to fit.
    #[arg(long, default_value = "icl")]
    pub strategy: String,
    /// Shot counts for the printed curve.
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 4, 8, 16])]
    pub shots: Vec<u32>,
    /// Keep repeated seeds as separate points instead of averaging them.
    #[arg(long)]
    pub no_aggregate: bool,
    /// Where to write the parameter JSON (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub shots: u32,
    pub perf: f64,
}

/// Output of `fit-icl`, also the ICL predictor input of `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOutput {
    pub params: SaturationParams,
    pub residual: f64,
    #[serde(default)]
    pub pi0_mode: Option<Pi0Mode>,
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default)]
    pub points: Vec<(f64, f64)>,
    #[serde(default)]
    pub curve: Vec<CurvePoint>,
}

pub fn run(args: &FitIclArgs) -> CliResult<()> {
    let raw = read_bytes(&args.measurements)?;
    let measurements = adaptsel::io::read_measurements(raw.as_slice())
        .map_err(|e| CliError::from(e).in_file(&args.measurements))?;
    let measurements = if args.no_aggregate {
        measurements
    } else {
        aggregate_seeds(&measurements)
    };
    let mut points: Vec<(f64, f64)> = Vec::new();
    for m in measurements.iter().filter(|m| m.config.strategy_id == args.strategy) {
        let shots = m.config.param(SHOTS).ok_or_else(|| {
            CliError::precondition(format!("{} row {} has no shots parameter", args.strategy, m.config))
        })?;
        points.push((shots, m.performance));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    if points.is_empty() {
        return Err(CliError::precondition(format!(
            "no `{}` rows in {}",
            args.strategy,
            args.measurements.display()
        )));
    }

    let mode = match args.pi0 {
        Pi0Flag::Free => Pi0Mode::Free,
        Pi0Flag::Fixed(v) => Pi0Mode::Fixed(v),
        Pi0Flag::Auto => {
            let at = |d: f64| points.iter().find(|p| p.0 == d).map(|p| p.1);
            Pi0Mode::from_baselines(at(0.0), at(1.0))
        }
    };
    // Zero-shot rows only fix the baseline; the curve is fitted on d >= 1.
    let fit_points: Vec<(f64, f64)> = match mode {
        Pi0Mode::Fixed(_) if points.iter().any(|p| p.0 == 0.0) => {
            points.iter().copied().filter(|p| p.0 > 0.0).collect()
        }
        _ => points.clone(),
    };

    let (params, residual, method) = match mode {
        Pi0Mode::Fixed(pi0) if fit_points.len() == 2 => {
            let p = two_point_fit(fit_points[0], fit_points[1], pi0)?;
            let residual = fit_points.iter().map(|&(d, y)| (p.predict_raw(d) - y).powi(2)).sum();
            (p, residual, "two_point")
        }
        _ => {
            let fit = fit_saturation(&fit_points, mode)?;
            (fit.params, fit.residual, "least_squares")
        }
    };
    let curve: Vec<CurvePoint> = args
        .shots
        .iter()
        .map(|&d| CurvePoint { shots: d, perf: params.predict(f64::from(d)) })
        .collect();
    let output = FitOutput {
        params,
        residual,
        pi0_mode: Some(mode),
        method: Some(method.to_string()),
        points: fit_points.clone(),
        curve: curve.clone(),
    };

    let mut table = Table::new(&["shots", "predicted", "measured"], 0);
    for c in &curve {
        let measured = fit_points
            .iter()
            .find(|p| p.0 == f64::from(c.shots))
            .map_or("-".to_string(), |p| format!("{:.3}", p.1));
        table.push(vec![c.shots.to_string(), format!("{:.3}", c.perf), measured]);
    }
    let summary = format!(
        "{method}: pi0={:.6} alpha={:.6} beta={:.6} residual={:.3e}\n",
        params.pi0, params.alpha, params.beta, residual
    );
    let rendered = format!("{summary}{}", table.render(color_enabled()));
    emit(args.out.as_ref(), &to_json(&output)?)?;
    if args.out.is_some() {
        print!("{rendered}");
    } else {
        eprint!("{rendered}");
    }
    Ok(())
}
