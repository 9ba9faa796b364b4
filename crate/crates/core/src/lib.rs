//! Auditing group unfairness in unsupervised outlier detection.
//!
//! The crate bundles five detectors (reconstruction autoencoder, one-class
//! center distance, cluster distance, local outlier factor, isolation forest),
//! the five group-level audit properties (DIR, reconstruction ratio, sample
//! size bias, spurious feature variance, attribute label noise), synthetic
//! two-group populations with four injectable data biases, and the regression
//! statistics used to explain DIR from the other four properties.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the common `f64` instantiations.

pub mod dataset;
pub mod detectors;
pub mod error;
pub mod fairness;
pub mod fmt;
pub mod measure;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use measure::{Measured, NaReason};
pub use scalar::Scalar;

pub type Dataset = dataset::AttributedDataset<f64>;
pub type Performance = dataset::GroupPerformance<f64>;
pub type Network = nn::DenseNetwork<f64>;
pub type Autoencoder = detectors::Autoencoder<f64>;
pub type OneClassModel = detectors::OneClassModel<f64>;
pub type DetectorOutput = detectors::DetectorOutput<f64>;
pub type AuditRecord = fairness::GroupAuditRecord<f64>;
pub type Fit = stats::RegressionFit<f64>;
pub type Stacked = stats::StackedFit<f64>;
pub type Table = stats::PropertyTable<f64>;
