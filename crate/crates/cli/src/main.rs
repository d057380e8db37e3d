//! `adaptsel`: fit predictors, estimate a configuration grid, and pick the
//! best predicted strategy per cost band.
//!
//! Exit codes: 0 success, 2 parse/format error, 3 failed precondition,
//! 4 unknown strategy kind, 5 gradient self-check failure.

mod error;
mod files;
mod fit;
mod manifest;
mod pareto;
mod predict;
mod render;
mod select;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use adaptsel::ft_predictor::calibrate;
use adaptsel::selector::summarize_cells;
use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};
use crate::files::{emit, read_bytes, to_json};
use crate::render::{color_enabled, Table};

#[derive(Debug, Parser)]
#[command(name = "adaptsel", version, about = "Cost-aware selection of LLM adaptation strategies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the shot-count saturation curve to ICL measurements.
    FitIcl(fit::FitIclArgs),
    /// Estimate performance and cost for every configuration in a grid.
    Predict(predict::PredictArgs),
    /// Pick the best predicted configuration in each cost band.
    Select(select::SelectArgs),
    /// Pareto frontier of (cost, perf) points, and the gain between two.
    Pareto(pareto::ParetoArgs),
    /// Train the embedding proxy and report its accuracy per data portion.
    TrainProxy(train::TrainProxyArgs),
    /// Fit the affine map from proxy scores to fine-tuned accuracy.
    Calibrate(CalibrateArgs),
    /// Grand means of published per-band result cells.
    Summarize(SummarizeArgs),
    /// Run a pipeline of stages described by a manifest file.
    Run(manifest::RunArgs),
}

#[derive(Debug, clap::Args)]
struct CalibrateArgs {
    /// CSV with `proxy,actual` columns.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct SummarizeArgs {
    /// Cell CSV: task, level, pred_acc, act_acc, mae_reported,
    /// act_total_cost, ours_total_cost, crr_reported.
    #[arg(long)]
    cells: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_calibrate(args: &CalibrateArgs) -> CliResult<()> {
    let text = String::from_utf8(read_bytes(&args.pairs)?)
        .map_err(|e| CliError::parse(format!("{}: {e}", args.pairs.display())))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == "proxy,actual" => {}
        _ => return Err(CliError::parse(format!("{}: line 1: expected header `proxy,actual`", args.pairs.display()))),
    }
    let mut pairs = Vec::new();
    for (i, line) in lines {
        let bad = || CliError::parse(format!("{}: line {}: expected two numbers", args.pairs.display(), i + 1));
        let (x, y) = line.split_once(',').ok_or_else(bad)?;
        let x: f64 = x.trim().parse().map_err(|_| bad())?;
        let y: f64 = y.trim().parse().map_err(|_| bad())?;
        pairs.push((x, y));
    }
    let params = calibrate(&pairs)?;
    eprintln!("a={:.6} b={:.6} from {} pairs", params.a, params.b, pairs.len());
    emit(args.out.as_ref(), &to_json(&params)?)
}

fn run_summarize(args: &SummarizeArgs) -> CliResult<()> {
    let raw = read_bytes(&args.cells)?;
    let cells = adaptsel::io::read_cells(raw.as_slice()).map_err(|e| CliError::from(e).in_file(&args.cells))?;
    let summary = summarize_cells(&cells)?;
    let mut table = Table::new(&["metric", "value"], 1);
    table.push(vec!["cells".into(), summary.cells.to_string()]);
    table.push(vec!["mean MAE (%)".into(), format!("{:.4}", summary.mean_regret)]);
    if let Some(v) = summary.mean_crr_reported {
        table.push(vec!["mean CRR, table cells (%)".into(), format!("{:.4}", v)]);
    }
    table.push(vec!["mean CRR, from costs (%)".into(), format!("{:.4}", summary.mean_crr_recomputed)]);
    let rendered = table.render(color_enabled());
    let json = to_json(&summary)?;
    match &args.out {
        Some(_) => {
            emit(args.out.as_ref(), &json)?;
            print!("{rendered}");
        }
        None => {
            print!("{json}");
            eprint!("{rendered}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::FitIcl(a) => fit::run(a),
        Command::Predict(a) => predict::run(a),
        Command::Select(a) => select::run(a),
        Command::Pareto(a) => pareto::run(a),
        Command::TrainProxy(a) => train::run(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Summarize(a) => run_summarize(a),
        Command::Run(a) => manifest::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
