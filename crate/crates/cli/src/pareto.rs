use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use adaptsel::selector::{adaptation_gain, gain_series, pareto_indices, ParetoPoint};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::files::{emit, read_bytes, to_json};

#[derive(Debug, clap::Args)]
pub struct ParetoArgs {
    /// Points CSV with `cost,perf[,label]` columns.
    #[arg(long)]
    pub points: PathBuf,
    /// Second point set (e.g. with adaptation strategies) to compare against.
    #[arg(long)]
    pub against: Option<PathBuf>,
    /// Cost range for the gain integral, `lo,hi`. Defaults to the span
    /// covered by both frontiers.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub range: Option<Vec<f64>>,
    /// Frontier JSON output (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Step-function CSV for plotting.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct FrontierPoint {
    cost: f64,
    perf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Debug, Serialize)]
struct ParetoOutput {
    frontier: Vec<FrontierPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    new_frontier: Option<Vec<FrontierPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    range: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gain: Option<f64>,
}

fn load(path: &Path) -> CliResult<Vec<(ParetoPoint, Option<String>)>> {
    let raw = read_bytes(path)?;
    let points = adaptsel::io::read_points(raw.as_slice()).map_err(|e| CliError::from(e).in_file(path))?;
    if points.is_empty() {
        return Err(CliError::precondition(format!("{}: no points", path.display())));
    }
    Ok(points)
}

fn frontier(points: &[(ParetoPoint, Option<String>)]) -> Vec<FrontierPoint> {
    let bare: Vec<ParetoPoint> = points.iter().map(|p| p.0).collect();
    pareto_indices(&bare)
        .into_iter()
        .map(|i| FrontierPoint {
            cost: points[i].0.cost,
            perf: points[i].0.perf,
            label: points[i].1.clone(),
        })
        .collect()
}

fn bare(f: &[FrontierPoint]) -> Vec<ParetoPoint> {
    f.iter().map(|p| ParetoPoint::new(p.cost, p.perf)).collect()
}

pub fn run(args: &ParetoArgs) -> CliResult<()> {
    let base = frontier(&load(&args.points)?);
    let mut output = ParetoOutput { frontier: base, new_frontier: None, range: None, gain: None };
    let mut plot = String::new();

    if let Some(path) = &args.against {
        let new = frontier(&load(path)?);
        let (old_pts, new_pts) = (bare(&output.frontier), bare(&new));
        let range = match &args.range {
            Some(r) => (r[0], r[1]),
            None => {
                let lo = old_pts[0].cost.max(new_pts[0].cost);
                let hi = old_pts.last().map_or(lo, |p| p.cost).max(new_pts.last().map_or(lo, |p| p.cost));
                (lo, hi)
            }
        };
        let gain = adaptation_gain(&old_pts, &new_pts, range)?;
        writeln!(plot, "cost_lo,cost_hi,old_perf,new_perf,gain").ok();
        for s in gain_series(&old_pts, &new_pts, range)? {
            writeln!(plot, "{},{},{},{},{}", s.cost_lo, s.cost_hi, s.old_perf, s.new_perf, s.gain).ok();
        }
        eprintln!("adaptation gain over [{}, {}]: {gain:.6}", range.0, range.1);
        output.new_frontier = Some(new);
        output.range = Some(range);
        output.gain = Some(gain);
    } else {
        writeln!(plot, "cost,perf").ok();
        for p in &output.frontier {
            writeln!(plot, "{},{}", p.cost, p.perf).ok();
        }
    }

    emit(args.out.as_ref(), &to_json(&output)?)?;
    if let Some(path) = &args.plot {
        emit(Some(path), &plot)?;
    }
    Ok(())
}
