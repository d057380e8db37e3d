//! File formats: measurement CSVs and JSON estimate tables.
//!
//! A measurement file has a header row naming `strategy_id`, `kind`, zero
//! or more `param:<name>` columns, `seed`, `performance` and `cost_usd`.
//! Column order is free. Empty parameter cells mean the parameter does not
//! apply to that row; an empty seed means the row is unseeded.

use std::io::{Read, Write};

use crate::config::{EstimateTable, MeasurementPoint, StrategyConfig, StrategyKind};
use crate::error::{Error, Result};
use crate::selector::{ParetoPoint, TableCell};

const PARAM_PREFIX: &str = "param:";

struct Columns {
    strategy_id: usize,
    kind: usize,
    seed: Option<usize>,
    performance: usize,
    cost: usize,
    params: Vec<(usize, String)>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h == name);
        let need = |name: &str| find(name).ok_or_else(|| Error::parse(1, format!("missing column `{name}`")));
        let mut params = Vec::new();
        for (i, h) in header.iter().enumerate() {
            if let Some(name) = h.strip_prefix(PARAM_PREFIX) {
                if name.is_empty() {
                    return Err(Error::parse(1, "empty parameter name"));
                }
                params.push((i, name.to_string()));
            } else if !matches!(h, "strategy_id" | "kind" | "seed" | "performance" | "cost_usd") {
                return Err(Error::parse(1, format!("unknown column `{h}`")));
            }
        }
        Ok(Self {
            strategy_id: need("strategy_id")?,
            kind: need("kind")?,
            seed: find("seed"),
            performance: need("performance")?,
            cost: need("cost_usd")?,
            params,
        })
    }
}

fn number(field: &str, name: &str, line: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(line, format!("{name}: `{field}` is not a number")))
}

/// Reads a measurement CSV. Errors carry the 1-based line number.
pub fn read_measurements(input: impl Read) -> Result<Vec<MeasurementPoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    if header.is_empty() {
        return Err(Error::parse(1, "missing header row"));
    }
    let cols = Columns::from_header(&header)?;
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = &record[cols.strategy_id];
        if id.is_empty() {
            return Err(Error::parse(line, "empty strategy_id"));
        }
        let kind: StrategyKind = record[cols.kind]
            .parse()
            .map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let mut config = StrategyConfig::new(id, kind);
        for (i, name) in &cols.params {
            let field = &record[*i];
            if !field.is_empty() {
                config = config.with_param(name.clone(), number(field, name, line)?);
            }
        }
        let seed = match cols.seed.map(|i| &record[i]) {
            None | Some("") => None,
            Some(s) => Some(
                s.parse::<i64>()
                    .map_err(|_| Error::parse(line, format!("seed: `{s}` is not an integer")))?,
            ),
        };
        let point = MeasurementPoint {
            config,
            performance: number(&record[cols.performance], "performance", line)?,
            cost_usd: number(&record[cols.cost], "cost_usd", line)?,
            seed,
        };
        point
            .validate()
            .map_err(|e| Error::parse(line, e.to_string()))?;
        points.push(point);
    }
    Ok(points)
}

/// Writes measurements with one `param:` column per parameter name seen.
pub fn write_measurements(out: impl Write, points: &[MeasurementPoint]) -> Result<()> {
    let mut names: Vec<&str> = points
        .iter()
        .flat_map(|p| p.config.params.keys().map(String::as_str))
        .collect();
    names.sort_unstable();
    names.dedup();
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["strategy_id".to_string(), "kind".to_string()];
    header.extend(names.iter().map(|n| format!("{PARAM_PREFIX}{n}")));
    header.extend(["seed", "performance", "cost_usd"].map(String::from));
    writer.write_record(&header).map_err(csv_io)?;
    for p in points {
        let mut row = vec![p.config.strategy_id.clone(), p.config.kind.as_str().to_string()];
        row.extend(names.iter().map(|n| p.config.param(n).map_or(String::new(), |v| v.to_string())));
        row.push(p.seed.map_or(String::new(), |s| s.to_string()));
        row.push(p.performance.to_string());
        row.push(p.cost_usd.to_string());
        writer.write_record(&row).map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Reads `cost,perf[,label]` rows for frontier computations.
pub fn read_points(input: impl Read) -> Result<Vec<(ParetoPoint, Option<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let header = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(1, format!("missing column `{name}`")))
    };
    let (cost_col, perf_col) = (find("cost")?, find("perf")?);
    let label_col = header.iter().position(|h| h == "label");
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let point = ParetoPoint::new(
            number(&record[cost_col], "cost", line)?,
            number(&record[perf_col], "perf", line)?,
        );
        let label = label_col.map(|i| record[i].to_string()).filter(|l| !l.is_empty());
        points.push((point, label));
    }
    Ok(points)
}

/// Reads published per-band result cells; see [`TableCell`] for columns.
pub fn read_cells(input: impl Read) -> Result<Vec<TableCell>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut cells = Vec::new();
    for record in reader.deserialize::<TableCell>() {
        let cell = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        cells.push(cell);
    }
    Ok(cells)
}

pub fn read_estimates(input: impl Read) -> Result<EstimateTable> {
    let table: EstimateTable = serde_json::from_reader(input)?;
    table.validate()?;
    Ok(table)
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
