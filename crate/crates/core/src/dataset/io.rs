//! CSV grammar: header tokens `f<k>`, `tag:<name>`, `truth:<name>`, `outlier`.
//! Lines starting with `#` are comments. Mask sidecars hold one feature index per line.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::AttributedDataset;
use crate::error::{Error, Result};
use crate::fmt::fmt12;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Dataset id; defaults to the file stem.
    pub id: Option<String>,
    /// Optional foreground-mask sidecar.
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
enum Column {
    Feature(usize),
    Tag(String),
    Truth(String),
    Outlier,
}

fn parse_header(header: &csv::StringRecord) -> Result<(Vec<Column>, usize)> {
    let mut cols = Vec::with_capacity(header.len());
    let mut seen = BTreeSet::new();
    for (c, raw) in header.iter().enumerate() {
        let tok = raw.trim();
        let bad = |message: String| Error::Parse {
            line: 1,
            column: tok.to_string(),
            message,
        };
        let col = if tok == "outlier" {
            Column::Outlier
        } else if let Some(name) = tok.strip_prefix("tag:") {
            Column::Tag(name.to_string())
        } else if let Some(name) = tok.strip_prefix("truth:") {
            Column::Truth(name.to_string())
        } else if let Some(k) = tok.strip_prefix('f') {
            let k: usize = k
                .parse()
                .map_err(|_| bad(format!("unrecognised header token in position {c}")))?;
            Column::Feature(k)
        } else {
            return Err(bad(format!("unrecognised header token in position {c}")));
        };
        if matches!(&col, Column::Tag(n) | Column::Truth(n) if n.is_empty()) {
            return Err(bad("empty tag name".into()));
        }
        if !seen.insert(tok.to_string()) {
            return Err(bad("duplicate column".into()));
        }
        cols.push(col);
    }
    let feature_ids: BTreeSet<usize> = cols
        .iter()
        .filter_map(|c| match c {
            Column::Feature(k) => Some(*k),
            _ => None,
        })
        .collect();
    let d = feature_ids.len();
    if d == 0 {
        return Err(Error::Parse {
            line: 1,
            column: String::new(),
            message: "no feature columns".into(),
        });
    }
    if feature_ids.iter().next_back() != Some(&(d - 1)) {
        return Err(Error::Parse {
            line: 1,
            column: String::new(),
            message: format!("feature columns must be f0..f{}", d - 1),
        });
    }
    Ok((cols, d))
}

fn parse_bit(s: &str, line: usize, column: &str) -> Result<bool> {
    match s.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse {
            line,
            column: column.to_string(),
            message: format!("expected 0 or 1, found `{other}`"),
        }),
    }
}

/// Parses a dataset from any reader.
pub fn read_dataset<T: Scalar, R: Read>(reader: R, id: &str) -> Result<AttributedDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            column: String::new(),
            message: e.to_string(),
        })?
        .clone();
    let (cols, d) = parse_header(&header)?;
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();

    let mut features: Vec<T> = Vec::new();
    let mut tags: Vec<Vec<bool>> = vec![Vec::new(); cols.len()];
    let mut n = 0;
    let mut row = vec![T::zero(); d];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: String::new(),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(n + 2, |p| p.line() as usize);
        if rec.len() != cols.len() {
            return Err(Error::Parse {
                line,
                column: String::new(),
                message: format!("expected {} fields, found {}", cols.len(), rec.len()),
            });
        }
        for (c, (col, cell)) in cols.iter().zip(rec.iter()).enumerate() {
            match col {
                Column::Feature(k) => {
                    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                        line,
                        column: names[c].clone(),
                        message: format!("not a number: `{cell}`"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            line,
                            column: names[c].clone(),
                            message: "non-finite value".into(),
                        });
                    }
                    row[*k] = T::of(v);
                }
                _ => tags[c].push(parse_bit(cell, line, &names[c])?),
            }
        }
        features.extend_from_slice(&row);
        n += 1;
    }

    let mut ds = AttributedDataset::new(id, n, d, features)?;
    for (col, values) in cols.into_iter().zip(tags) {
        ds = match col {
            Column::Feature(_) => ds,
            Column::Tag(name) => ds.with_tag(name, values)?,
            Column::Truth(name) => ds.with_truth_tag(name, values)?,
            Column::Outlier => ds.with_outlier_truth(values)?,
        };
    }
    Ok(ds)
}

pub fn load_dataset<T: Scalar>(path: &Path, options: &LoadOptions) -> Result<AttributedDataset<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let id = options.id.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let ds = read_dataset(BufReader::new(file), &id)?;
    match &options.mask {
        Some(mask) => ds.with_foreground_mask(load_mask(mask)?),
        None => Ok(ds),
    }
}

/// Writes the canonical form: features, tags, truth tags, outlier column.
pub fn write_dataset<T: Scalar, W: Write>(ds: &AttributedDataset<T>, mut w: W) -> std::io::Result<()> {
    let mut header: Vec<String> = (0..ds.d()).map(|k| format!("f{k}")).collect();
    header.extend(ds.tags().iter().map(|t| format!("tag:{}", t.name)));
    header.extend(ds.truth_tags().iter().map(|t| format!("truth:{}", t.name)));
    if ds.outlier_truth().is_some() {
        header.push("outlier".into());
    }
    writeln!(w, "{}", header.join(","))?;
    let bit = |b: bool| if b { "1" } else { "0" };
    let mut line = String::new();
    for i in 0..ds.n() {
        line.clear();
        for (k, v) in ds.row(i).iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&fmt12(v.to_f64_lossy()));
        }
        for t in ds.tags().iter().chain(ds.truth_tags()) {
            line.push(',');
            line.push_str(bit(t.values[i]));
        }
        if let Some(y) = ds.outlier_truth() {
            line.push(',');
            line.push_str(bit(y[i]));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn emit_dataset<T: Scalar>(ds: &AttributedDataset<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(ds, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_mask(path: &Path) -> Result<BTreeSet<usize>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let k = t.parse().map_err(|_| Error::Parse {
            line: i + 1,
            column: "mask".into(),
            message: format!("not a feature index: `{t}`"),
        })?;
        out.insert(k);
    }
    Ok(out)
}

pub fn emit_mask(mask: &BTreeSet<usize>, path: &Path) -> Result<()> {
    let body: String = mask.iter().map(|k| format!("{k}\n")).collect();
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}
