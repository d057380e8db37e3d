//! Reader and writer for embedding files.
//!
//! A file starts with one ASCII header line of `key=value` fields after the
//! magic word, e.g.
//!
//! ```text
//! adaptsel-embeddings mode=ce dim=4 count=3 encoding=csv layout=pooled
//! ```
//!
//! followed by the payload in the declared encoding. See
//! `docs/embedding-format.md` for the full layout.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use super::{mean_pool, Dataset, LabeledExample, OptionExample};
use crate::error::{Error, Result};

pub const MAGIC: &str = "adaptsel-embeddings";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Csv,
    F32Le,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Pooled,
    Tokens,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub contrastive: bool,
    pub dim: usize,
    pub count: usize,
    pub encoding: Encoding,
    pub layout: Layout,
}

impl Header {
    pub fn parse(line: &str) -> Result<Self> {
        let mut words = line.split_whitespace();
        if words.next() != Some(MAGIC) {
            return Err(Error::parse(1, format!("header must start with `{MAGIC}`")));
        }
        let mut fields = BTreeMap::new();
        for word in words {
            let (k, v) = word
                .split_once('=')
                .ok_or_else(|| Error::parse(1, format!("malformed header field `{word}`")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::parse(1, format!("header is missing `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::parse(1, format!("header field `{k}` must be an integer")))
        };
        let contrastive = match get("mode")? {
            "ce" => false,
            "contrastive" => true,
            other => return Err(Error::parse(1, format!("unknown mode `{other}`"))),
        };
        let encoding = match fields.get("encoding").copied().unwrap_or("csv") {
            "csv" => Encoding::Csv,
            "f32le" => Encoding::F32Le,
            other => return Err(Error::parse(1, format!("unknown encoding `{other}`"))),
        };
        let layout = match fields.get("layout").copied().unwrap_or("pooled") {
            "pooled" => Layout::Pooled,
            "tokens" => Layout::Tokens,
            other => return Err(Error::parse(1, format!("unknown layout `{other}`"))),
        };
        if contrastive && layout == Layout::Tokens {
            return Err(Error::parse(1, "contrastive files must use layout=pooled"));
        }
        let dim = num("dim")?;
        if dim == 0 {
            return Err(Error::parse(1, "dim must be >= 1"));
        }
        for key in fields.keys() {
            if !["mode", "dim", "count", "encoding", "layout"].contains(key) {
                return Err(Error::parse(1, format!("unknown header field `{key}`")));
            }
        }
        Ok(Self {
            contrastive,
            dim,
            count: num("count")?,
            encoding,
            layout,
        })
    }

    fn render(&self) -> String {
        format!(
            "{MAGIC} mode={} dim={} count={} encoding={} layout={}",
            if self.contrastive { "contrastive" } else { "ce" },
            self.dim,
            self.count,
            match self.encoding {
                Encoding::Csv => "csv",
                Encoding::F32Le => "f32le",
            },
            match self.layout {
                Layout::Pooled => "pooled",
                Layout::Tokens => "tokens",
            }
        )
    }
}

/// Reads a whole embedding file. Token layouts are mean-pooled on load.
pub fn read_embeddings(mut reader: impl BufRead) -> Result<Dataset> {
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let header = Header::parse(first.trim_end())?;
    let data = match header.encoding {
        Encoding::Csv => read_csv(reader, &header)?,
        Encoding::F32Le => read_binary(reader, &header)?,
    };
    if data.len() != header.count {
        return Err(Error::parse(
            1,
            format!("header declares {} examples, found {}", header.count, data.len()),
        ));
    }
    Ok(data)
}

fn parse_vector(fields: &[&str], dim: usize, line: usize) -> Result<Vec<f64>> {
    if fields.len() != dim {
        return Err(Error::parse(line, format!("expected {dim} vector components, found {}", fields.len())));
    }
    fields
        .iter()
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(line, format!("`{}` is not a finite number", f.trim())))
        })
        .collect()
}

fn parse_index(field: &str, what: &str, line: usize) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("{what} `{}` is not a non-negative integer", field.trim())))
}

fn read_csv(reader: impl BufRead, header: &Header) -> Result<Dataset> {
    let mut labeled = Vec::new();
    let mut options: Vec<OptionExample> = Vec::new();
    // (example id, label, tokens) for the token layout
    let mut pending: Option<(String, usize, Vec<Vec<f64>>)> = None;
    // (example id, anchor, options, correct) for contrastive files
    let mut group: Option<(String, Option<Vec<f64>>, Vec<Vec<f64>>, Option<usize>, usize)> = None;

    let finish_group = |g: (String, Option<Vec<f64>>, Vec<Vec<f64>>, Option<usize>, usize),
                        out: &mut Vec<OptionExample>|
     -> Result<()> {
        let (id, anchor, opts, correct, line) = g;
        let anchor = anchor.ok_or_else(|| Error::parse(line, format!("example `{id}` has no anchor row")))?;
        let correct =
            correct.ok_or_else(|| Error::parse(line, format!("example `{id}` has no `correct` option")))?;
        out.push(OptionExample { anchor, options: opts, correct });
        Ok(())
    };

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 2;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if header.contrastive {
            if fields.len() < 2 {
                return Err(Error::parse(lineno, "expected `example,role,values...`"));
            }
            let id = fields[0].trim().to_string();
            let vector = parse_vector(&fields[2..], header.dim, lineno)?;
            if group.as_ref().is_some_and(|g| g.0 != id) {
                finish_group(group.take().unwrap(), &mut options)?;
            }
            let g = group.get_or_insert_with(|| (id.clone(), None, Vec::new(), None, lineno));
            match fields[1].trim() {
                "anchor" => {
                    if g.1.is_some() {
                        return Err(Error::parse(lineno, format!("example `{id}` has two anchors")));
                    }
                    g.1 = Some(vector);
                }
                "option" => g.2.push(vector),
                "correct" => {
                    if g.3.is_some() {
                        return Err(Error::parse(lineno, format!("example `{id}` has two correct options")));
                    }
                    g.3 = Some(g.2.len());
                    g.2.push(vector);
                }
                other => return Err(Error::parse(lineno, format!("unknown role `{other}`"))),
            }
        } else if header.layout == Layout::Pooled {
            if fields.is_empty() {
                return Err(Error::parse(lineno, "expected `label,values...`"));
            }
            let label = parse_index(fields[0], "label", lineno)?;
            let vector = parse_vector(&fields[1..], header.dim, lineno)?;
            labeled.push(LabeledExample { vector, label });
        } else {
            if fields.len() < 2 {
                return Err(Error::parse(lineno, "expected `example,label,values...`"));
            }
            let id = fields[0].trim().to_string();
            let label = parse_index(fields[1], "label", lineno)?;
            let vector = parse_vector(&fields[2..], header.dim, lineno)?;
            match pending.as_mut() {
                Some(p) if p.0 == id => {
                    if p.1 != label {
                        return Err(Error::parse(lineno, format!("example `{id}` changes label mid-sequence")));
                    }
                    p.2.push(vector);
                }
                _ => {
                    if let Some((_, label, tokens)) = pending.take() {
                        labeled.push(LabeledExample { vector: mean_pool(&tokens)?, label });
                    }
                    pending = Some((id, label, vec![vector]));
                }
            }
        }
    }
    if let Some((_, label, tokens)) = pending {
        labeled.push(LabeledExample { vector: mean_pool(&tokens)?, label });
    }
    if let Some(g) = group {
        finish_group(g, &mut options)?;
    }
    Ok(if header.contrastive {
        Dataset::Options(options)
    } else {
        Dataset::Labeled(labeled)
    })
}

fn read_u32(reader: &mut impl Read, record: usize) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader
        .read_exact(&mut buf)
        .map_err(|_| Error::parse(record, "binary payload truncated"))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32_vector(reader: &mut impl Read, dim: usize, record: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; dim * 4];
    reader
        .read_exact(&mut buf)
        .map_err(|_| Error::parse(record, "binary payload truncated"))?;
    let v: Vec<f64> = buf
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::parse(record, "non-finite vector component"));
    }
    Ok(v)
}

// Binary errors report the 1-based record number in place of a line.
fn read_binary(mut reader: impl Read, header: &Header) -> Result<Dataset> {
    let dim = header.dim;
    let data = if header.contrastive {
        let mut out = Vec::with_capacity(header.count);
        for r in 1..=header.count {
            let n = read_u32(&mut reader, r)? as usize;
            let correct = read_u32(&mut reader, r)? as usize;
            let anchor = read_f32_vector(&mut reader, dim, r)?;
            let options = (0..n)
                .map(|_| read_f32_vector(&mut reader, dim, r))
                .collect::<Result<Vec<_>>>()?;
            out.push(OptionExample { anchor, options, correct });
        }
        Dataset::Options(out)
    } else {
        let mut out = Vec::with_capacity(header.count);
        for r in 1..=header.count {
            let label = read_u32(&mut reader, r)? as usize;
            let vector = match header.layout {
                Layout::Pooled => read_f32_vector(&mut reader, dim, r)?,
                Layout::Tokens => {
                    let n = read_u32(&mut reader, r)? as usize;
                    let tokens = (0..n)
                        .map(|_| read_f32_vector(&mut reader, dim, r))
                        .collect::<Result<Vec<_>>>()?;
                    mean_pool(&tokens).map_err(|_| Error::parse(r, "record has no tokens"))?
                }
            };
            out.push(LabeledExample { vector, label });
        }
        Dataset::Labeled(out)
    };
    let mut rest = [0u8; 1];
    if reader.read(&mut rest)? != 0 {
        return Err(Error::parse(header.count + 1, "trailing bytes after the declared records"));
    }
    Ok(data)
}

/// Writes a pooled dataset. Binary output stores `f32`, so values are
/// rounded to single precision.
pub fn write_embeddings(mut out: impl Write, data: &Dataset, encoding: Encoding) -> Result<()> {
    let header = Header {
        contrastive: matches!(data, Dataset::Options(_)),
        dim: data.dim()?,
        count: data.len(),
        encoding,
        layout: Layout::Pooled,
    };
    writeln!(out, "{}", header.render())?;
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let put_vec = |out: &mut dyn Write, v: &[f64]| -> std::io::Result<()> {
        for x in v {
            out.write_all(&(*x as f32).to_le_bytes())?;
        }
        Ok(())
    };
    match (data, encoding) {
        (Dataset::Labeled(v), Encoding::Csv) => {
            for ex in v {
                writeln!(out, "{},{}", ex.label, join(&ex.vector))?;
            }
        }
        (Dataset::Options(v), Encoding::Csv) => {
            for (i, ex) in v.iter().enumerate() {
                writeln!(out, "{i},anchor,{}", join(&ex.anchor))?;
                for (j, o) in ex.options.iter().enumerate() {
                    let role = if j == ex.correct { "correct" } else { "option" };
                    writeln!(out, "{i},{role},{}", join(o))?;
                }
            }
        }
        (Dataset::Labeled(v), Encoding::F32Le) => {
            for ex in v {
                out.write_all(&(ex.label as u32).to_le_bytes())?;
                put_vec(&mut out, &ex.vector)?;
            }
        }
        (Dataset::Options(v), Encoding::F32Le) => {
            for ex in v {
                out.write_all(&(ex.options.len() as u32).to_le_bytes())?;
                out.write_all(&(ex.correct as u32).to_le_bytes())?;
                put_vec(&mut out, &ex.anchor)?;
                for o in &ex.options {
                    put_vec(&mut out, o)?;
                }
            }
        }
    }
    Ok(())
}
