//! Attributed datasets: a feature matrix with binary group tags, optional
//! ground-truth tags, optional outlier labels and an optional foreground mask.

mod group;
mod io;
mod performance;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use group::{group_view, GroupView};
pub use io::{emit_dataset, emit_mask, load_dataset, load_mask, read_dataset, write_dataset, LoadOptions};
pub use performance::{group_performance, ConfusionCounts, GroupPerformance, PerformanceReport};

/// Named binary column.
#[derive(Debug, Clone, PartialEq)]
pub struct Tag {
    pub name: String,
    pub values: Vec<bool>,
}

/// Immutable dataset. Construct with [`AttributedDataset::new`] and the `with_*` builders.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedDataset<T> {
    id: String,
    n: usize,
    d: usize,
    features: Vec<T>,
    tags: Vec<Tag>,
    truth_tags: Vec<Tag>,
    outlier_truth: Option<Vec<bool>>,
    foreground_mask: Option<BTreeSet<usize>>,
    proxy_dims: Option<BTreeSet<usize>>,
}

impl<T: Scalar> AttributedDataset<T> {
    /// `features` is row-major, `n * d` values.
    pub fn new(id: impl Into<String>, n: usize, d: usize, features: Vec<T>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidDataset(format!("need n >= 1 and d >= 1, got n={n}, d={d}")));
        }
        if features.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: features.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature at row {}, column f{}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self {
            id: id.into(),
            n,
            d,
            features,
            tags: Vec::new(),
            truth_tags: Vec::new(),
            outlier_truth: None,
            foreground_mask: None,
            proxy_dims: None,
        })
    }

    pub fn from_rows(id: impl Into<String>, rows: &[Vec<T>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Self::new(id, rows.len(), d, rows.concat())
    }

    pub fn with_tag(mut self, name: impl Into<String>, values: Vec<bool>) -> Result<Self> {
        let name = name.into();
        self.check_column(&name, values.len())?;
        if self.tags.iter().any(|t| t.name == name) {
            return Err(Error::InvalidDataset(format!("duplicate tag `{name}`")));
        }
        self.tags.push(Tag { name, values });
        Ok(self)
    }

    pub fn with_truth_tag(mut self, name: impl Into<String>, values: Vec<bool>) -> Result<Self> {
        let name = name.into();
        self.check_column(&name, values.len())?;
        if self.truth_tags.iter().any(|t| t.name == name) {
            return Err(Error::InvalidDataset(format!("duplicate truth tag `{name}`")));
        }
        self.truth_tags.push(Tag { name, values });
        Ok(self)
    }

    pub fn with_outlier_truth(mut self, values: Vec<bool>) -> Result<Self> {
        self.check_column("outlier", values.len())?;
        self.outlier_truth = Some(values);
        Ok(self)
    }

    pub fn with_foreground_mask(mut self, mask: BTreeSet<usize>) -> Result<Self> {
        self.check_dims("foreground mask", &mask)?;
        self.foreground_mask = Some(mask);
        Ok(self)
    }

    pub fn with_proxy_dims(mut self, dims: BTreeSet<usize>) -> Result<Self> {
        self.check_dims("proxy dims", &dims)?;
        self.proxy_dims = Some(dims);
        Ok(self)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    fn check_column(&self, name: &str, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::InvalidDataset(format!(
                "column `{name}` has length {len}, expected {}",
                self.n
            )));
        }
        Ok(())
    }

    fn check_dims(&self, what: &str, dims: &BTreeSet<usize>) -> Result<()> {
        match dims.iter().next_back() {
            Some(&max) if max >= self.d => Err(Error::InvalidDataset(format!(
                "{what} index {max} out of range for d={}",
                self.d
            ))),
            _ => Ok(()),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.features.chunks_exact(self.d)
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn tag(&self, name: &str) -> Option<&[bool]> {
        self.tags.iter().find(|t| t.name == name).map(|t| t.values.as_slice())
    }

    pub fn truth_tags(&self) -> &[Tag] {
        &self.truth_tags
    }

    pub fn truth_tag(&self, name: &str) -> Option<&[bool]> {
        self.truth_tags
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.values.as_slice())
    }

    pub fn outlier_truth(&self) -> Option<&[bool]> {
        self.outlier_truth.as_deref()
    }

    pub fn foreground_mask(&self) -> Option<&BTreeSet<usize>> {
        self.foreground_mask.as_ref()
    }

    pub fn proxy_dims(&self) -> Option<&BTreeSet<usize>> {
        self.proxy_dims.as_ref()
    }

    /// Fraction of rows labeled as outliers.
    pub fn base_rate(&self) -> Option<f64> {
        self.outlier_truth
            .as_ref()
            .map(|y| y.iter().filter(|&&v| v).count() as f64 / self.n as f64)
    }

    /// New dataset holding the given rows in the given order. Metadata is kept.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::InvalidDataset("row selection is empty".into()));
        }
        let pick = |v: &[bool]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let mut features = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        Ok(Self {
            id: self.id.clone(),
            n: idx.len(),
            d: self.d,
            features,
            tags: self
                .tags
                .iter()
                .map(|t| Tag {
                    name: t.name.clone(),
                    values: pick(&t.values),
                })
                .collect(),
            truth_tags: self
                .truth_tags
                .iter()
                .map(|t| Tag {
                    name: t.name.clone(),
                    values: pick(&t.values),
                })
                .collect(),
            outlier_truth: self.outlier_truth.as_deref().map(pick),
            foreground_mask: self.foreground_mask.clone(),
            proxy_dims: self.proxy_dims.clone(),
        })
    }

    /// Same labels and metadata, replaced feature matrix.
    pub fn with_features(&self, features: Vec<T>) -> Result<Self> {
        let mut out = Self::new(self.id.clone(), self.n, self.d, features)?;
        out.tags = self.tags.clone();
        out.truth_tags = self.truth_tags.clone();
        out.outlier_truth = self.outlier_truth.clone();
        out.foreground_mask = self.foreground_mask.clone();
        out.proxy_dims = self.proxy_dims.clone();
        Ok(out)
    }

    /// Per-feature population standard deviation.
    pub fn feature_std(&self) -> Vec<T> {
        let n = T::of_usize(self.n);
        (0..self.d)
            .map(|j| {
                let mean = self.rows().map(|r| r[j]).sum::<T>() / n;
                let var = self.rows().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<T>() / n;
                var.sqrt()
            })
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> AttributedDataset<U> {
        AttributedDataset {
            id: self.id.clone(),
            n: self.n,
            d: self.d,
            features: self.features.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
            tags: self.tags.clone(),
            truth_tags: self.truth_tags.clone(),
            outlier_truth: self.outlier_truth.clone(),
            foreground_mask: self.foreground_mask.clone(),
            proxy_dims: self.proxy_dims.clone(),
        }
    }
}
