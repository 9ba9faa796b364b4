use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fairness::{GroupAuditRecord, REPORT_HEADER};
use crate::fmt::fmt12;
use crate::scalar::Scalar;

/// Short names of the four explanatory properties, in table order.
pub const PROPERTY_LABELS: [&str; 4] = ["RR", "SSB", "SFV", "ALN"];

/// Header of the per-datum squared-error table.
pub const SE_HEADER: [&str; 6] = ["tag", "incompressibility", "SSB", "SFV", "label_noise", "whole_model"];

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyRow<T> {
    pub tag: String,
    pub dir: Option<T>,
    /// RR, SSB, SFV, ALN; `None` marks NA.
    pub props: [Option<T>; 4],
}

/// DIR and the four properties for every tag of one (algorithm, dataset) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyTable<T> {
    pub algorithm: String,
    pub dataset: String,
    pub rows: Vec<PropertyRow<T>>,
}

fn parse_err(line: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

fn cell<T: Scalar>(raw: &str, line: usize, column: &str) -> Result<Option<T>> {
    let raw = raw.trim();
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_err(line, column, format!("`{raw}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, column, "value is not finite"));
    }
    Ok(Some(T::of(v)))
}

fn show<T: Scalar>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| fmt12(x.to_f64_lossy()))
}

/// Reads a six-column CSV with the given header; returns (tag, five cells) per row.
fn read_six<T: Scalar, R: Read>(reader: R, header: &[&str; 6]) -> Result<Vec<(String, [Option<T>; 5])>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let head = rdr.headers().map_err(|e| parse_err(1, "", e.to_string()))?.clone();
    let got: Vec<&str> = head.iter().map(str::trim).collect();
    if got != header[..] {
        return Err(parse_err(1, "", format!("expected header `{}`, found `{}`", header.join(","), got.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), "", e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 6 {
            return Err(parse_err(line, "", format!("expected 6 fields, found {}", rec.len())));
        }
        let mut cells = [None; 5];
        for (k, slot) in cells.iter_mut().enumerate() {
            *slot = cell(&rec[k + 1], line, header[k + 1])?;
        }
        out.push((rec[0].trim().to_string(), cells));
    }
    Ok(out)
}

impl<T: Scalar> PropertyTable<T> {
    pub fn new(algorithm: impl Into<String>, dataset: impl Into<String>, rows: Vec<PropertyRow<T>>) -> Self {
        Self {
            algorithm: algorithm.into(),
            dataset: dataset.into(),
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn read_csv<R: Read>(reader: R, algorithm: &str, dataset: &str) -> Result<Self> {
        let rows = read_six::<T, R>(reader, &REPORT_HEADER)?
            .into_iter()
            .map(|(tag, c)| PropertyRow {
                tag,
                dir: c[0],
                props: [c[1], c[2], c[3], c[4]],
            })
            .collect();
        Ok(Self::new(algorithm, dataset, rows))
    }

    pub fn load(path: &Path, algorithm: &str, dataset: &str) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, algorithm, dataset)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", REPORT_HEADER.join(","))?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.tag,
                show(r.dir),
                show(r.props[0]),
                show(r.props[1]),
                show(r.props[2]),
                show(r.props[3])
            )?;
        }
        Ok(())
    }

    pub fn from_records(records: &[GroupAuditRecord<T>]) -> Self {
        let (algorithm, dataset) = records
            .first()
            .map(|r| (r.detector.clone(), r.dataset.clone()))
            .unwrap_or_default();
        let rows = records
            .iter()
            .map(|r| PropertyRow {
                tag: r.tag.clone(),
                dir: r.dir.value(),
                props: [r.rr.value(), Some(r.ssb), r.sfv.value(), r.aln.value()],
            })
            .collect();
        Self::new(algorithm, dataset, rows)
    }

    /// Concatenation of several tables under one label.
    pub fn pooled(tables: &[&Self], algorithm: &str, dataset: &str) -> Self {
        Self::new(
            algorithm,
            dataset,
            tables.iter().flat_map(|t| t.rows.iter().cloned()).collect(),
        )
    }

    /// Row indices, property values and DIR values where both are present.
    pub fn column(&self, property: usize) -> (Vec<usize>, Vec<T>, Vec<T>) {
        let mut idx = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            if let (Some(p), Some(d)) = (r.props[property], r.dir) {
                idx.push(i);
                x.push(p);
                y.push(d);
            }
        }
        (idx, x, y)
    }

    pub fn dir_values(&self) -> Vec<T> {
        self.rows.iter().filter_map(|r| r.dir).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeRow<T> {
    pub tag: String,
    pub se: [Option<T>; 4],
    pub whole: Option<T>,
}

/// Per-datum squared errors of the four base fits and the stacked fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SeTable<T> {
    pub rows: Vec<SeRow<T>>,
}

impl<T: Scalar> SeTable<T> {
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let rows = read_six::<T, R>(reader, &SE_HEADER)?
            .into_iter()
            .map(|(tag, c)| SeRow {
                tag,
                se: [c[0], c[1], c[2], c[3]],
                whole: c[4],
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", SE_HEADER.join(","))?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.tag,
                show(r.se[0]),
                show(r.se[1]),
                show(r.se[2]),
                show(r.se[3]),
                show(r.whole)
            )?;
        }
        Ok(())
    }
}
