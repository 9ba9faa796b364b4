//! Two-group synthetic populations with controlled outlier structure, and the
//! bias injectors that distort group `b`.

mod generate;
mod inject;
mod manifest;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use generate::generate;
pub use inject::{
    inject, inject_measurement, inject_obfuscation, inject_sample_size, inject_under_representation,
};
pub use manifest::{DatasetManifest, GroupCounts};

/// Name of the tag column marking group `b`.
pub const GROUP_TAG: &str = "group_b";

/// Depletion-bias ladder used by the bias grid.
pub const DEPLETION_GRID: [f64; 7] = [0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8];
/// Obfuscation ladder used by the bias grid.
pub const OBFUSCATION_GRID: [f64; 6] = [0.05, 0.1, 0.15, 0.2, 0.3, 0.4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierMode {
    /// One tight off-manifold Gaussian per group.
    Clustered,
    /// Uniform in an expanded box, away from both inlier means.
    Scattered,
}

impl std::str::FromStr for OutlierMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clustered" => Ok(Self::Clustered),
            "scattered" => Ok(Self::Scattered),
            other => Err(format!("unknown outlier mode `{other}` (clustered|scattered)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_per_group: usize,
    /// Outlier fraction, identical in both groups.
    pub base_rate: f64,
    pub d: usize,
    pub outlier_mode: OutlierMode,
    /// Features that carry group identity.
    pub proxy_dims: BTreeSet<usize>,
    /// Rank of the inlier manifold in the non-proxy features.
    pub manifold_rank: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_per_group: 1000,
            base_rate: 0.1,
            d: 10,
            outlier_mode: OutlierMode::Clustered,
            proxy_dims: [0, 1].into(),
            manifold_rank: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    SampleSize,
    UnderRepresentation,
    MeasurementVariance,
    MeasurementShift,
    Obfuscation,
}

impl BiasKind {
    pub const ALL: [BiasKind; 5] = [
        BiasKind::SampleSize,
        BiasKind::UnderRepresentation,
        BiasKind::MeasurementVariance,
        BiasKind::MeasurementShift,
        BiasKind::Obfuscation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BiasKind::SampleSize => "sample_size",
            BiasKind::UnderRepresentation => "under_representation",
            BiasKind::MeasurementVariance => "measurement_variance",
            BiasKind::MeasurementShift => "measurement_shift",
            BiasKind::Obfuscation => "obfuscation",
        }
    }

    /// Symbol of the intensity parameter this kind carries.
    pub fn beta_symbol(self) -> &'static str {
        match self {
            BiasKind::SampleSize => "beta_s",
            BiasKind::UnderRepresentation => "beta_u",
            BiasKind::MeasurementVariance => "beta_v",
            BiasKind::MeasurementShift => "beta_m",
            BiasKind::Obfuscation => "beta_g",
        }
    }

    pub fn default_grid(self) -> &'static [f64] {
        match self {
            BiasKind::Obfuscation => &OBFUSCATION_GRID,
            _ => &DEPLETION_GRID,
        }
    }
}

impl std::fmt::Display for BiasKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BiasKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BiasKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = BiasKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown bias kind `{s}` ({})", names.join("|"))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    pub kind: BiasKind,
    pub beta: f64,
    pub seed: u64,
}

/// Number of rows an exact-count injector touches: floor(beta * m).
/// A tiny guard absorbs products such as 0.29 * 100 = 28.999999999999996.
pub fn exact_count(beta: f64, m: usize) -> usize {
    ((beta * m as f64) + 1e-9).floor().min(m as f64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_count_floor_rule() {
        assert_eq!(exact_count(0.4, 1000), 400);
        assert_eq!(exact_count(0.29, 100), 29);
        assert_eq!(exact_count(0.2, 100), 20);
        assert_eq!(exact_count(0.015, 100), 1);
        assert_eq!(exact_count(1.0, 7), 7);
        assert_eq!(exact_count(0.0, 7), 0);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in BiasKind::ALL {
            assert_eq!(k.name().parse::<BiasKind>().unwrap(), k);
        }
        assert!("nope".parse::<BiasKind>().is_err());
    }
}
