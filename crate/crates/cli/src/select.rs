use std::path::PathBuf;

use adaptsel::selector::{build_report, CostBasis, ReportOptions, ScorePolicy, SelectionReport};

use crate::error::{CliError, CliResult};
use crate::files::{emit, read_bytes, to_json};
use crate::render::{color_enabled, opt, pct, usd, Table};

#[derive(Debug, clap::Args)]
pub struct SelectArgs {
    /// Estimate table JSON from `predict`.
    #[arg(long)]
    pub estimates: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub bands: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    /// Cost column that places rows in bands: pred or act.
    #[arg(long, default_value = "pred")]
    pub band_basis: CostBasis,
    /// Prediction cost per band in USD, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub ours_cost: Option<Vec<f64>>,
    /// Where to write report.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const LEVEL_NAMES: [&str; 3] = ["low", "medium", "high"];

fn band_name(index: usize, k: usize) -> String {
    if k == 3 {
        LEVEL_NAMES[index].to_string()
    } else {
        format!("band {index}")
    }
}

pub fn render(report: &SelectionReport) -> String {
    let k = report.bands.len();
    let with_actuals = report.mae_selection.is_some();
    let mut table = if with_actuals {
        Table::new(
            &["Band", "Chosen", "Pred. Acc (%)", "Act. Acc (%)", "MAE (%)", "Act. Cost ($)", "Ours Cost ($)", "CRR (%)"],
            2,
        )
    } else {
        Table::new(&["Band", "Chosen", "Pred. Perf (%)", "Pred. Cost ($)", "Range ($)"], 2)
    };
    for b in &report.bands {
        let chosen = opt(b.chosen.as_ref(), |c| c.to_string());
        let row = if with_actuals {
            vec![
                band_name(b.band.index, k),
                chosen,
                opt(b.act_perf_of_chosen, pct),
                opt(b.act_optimum.as_ref().map(|o| o.perf), pct),
                opt(b.regret, pct),
                usd(b.c_full),
                opt(b.c_ours, usd),
                opt(b.crr, |v| format!("{:.2}", adaptsel::selector::round_half_even(v, 2))),
            ]
        } else {
            vec![
                band_name(b.band.index, k),
                chosen,
                opt(b.pred_perf, pct),
                opt(b.pred_cost, usd),
                format!("{}-{}", usd(b.band.lo), usd(b.band.hi)),
            ]
        };
        table.push(row);
    }
    let mut out = table.render(color_enabled());
    if let Some(m) = report.mae_selection {
        out.push_str(&format!("mean MAE (%): {}\n", pct(m)));
    }
    if let Some(c) = report.crr {
        out.push_str(&format!("overall CRR (%): {:.2}\n", adaptsel::selector::round_half_even(c, 2)));
    }
    out
}

pub fn run(args: &SelectArgs) -> CliResult<()> {
    let raw = read_bytes(&args.estimates)?;
    let table = adaptsel::io::read_estimates(raw.as_slice())
        .map_err(|e| CliError::from(e).in_file(&args.estimates))?;
    if table.is_empty() {
        return Err(CliError::precondition(format!("{}: estimate table is empty", args.estimates.display())));
    }
    let opts = ReportOptions {
        bands: args.bands,
        policy: ScorePolicy::new(args.epsilon)?,
        basis: args.band_basis,
        ours_cost: args.ours_cost.clone(),
    };
    let report = build_report(&table, &opts)?;
    let json = to_json(&report)?;
    match &args.out {
        Some(_) => {
            emit(args.out.as_ref(), &json)?;
            print!("{}", render(&report));
        }
        None => {
            print!("{json}");
            eprint!("{}", render(&report));
        }
    }
    Ok(())
}
