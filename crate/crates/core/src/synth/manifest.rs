use serde::{Deserialize, Serialize};

use super::{BiasSpec, SynthSpec, GROUP_TAG};
use crate::dataset::AttributedDataset;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub rows: usize,
    pub outliers: usize,
    pub base_rate: Option<f64>,
}

/// Sidecar written next to every generated or injected dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub spec: Option<SynthSpec>,
    pub bias: Option<BiasSpec>,
    pub proxy_dims: Option<Vec<usize>>,
    pub group_a: GroupCounts,
    pub group_b: GroupCounts,
}

impl DatasetManifest {
    pub fn describe<T: Scalar>(
        ds: &AttributedDataset<T>,
        spec: Option<&SynthSpec>,
        bias: Option<&BiasSpec>,
    ) -> Self {
        let tag = ds.tag(GROUP_TAG);
        let y = ds.outlier_truth();
        let counts = |side: bool| {
            let rows: Vec<usize> = (0..ds.n())
                .filter(|&i| tag.map_or(!side, |t| t[i] == side))
                .collect();
            let outliers = y.map_or(0, |y| rows.iter().filter(|&&i| y[i]).count());
            GroupCounts {
                rows: rows.len(),
                outliers,
                base_rate: (y.is_some() && !rows.is_empty())
                    .then(|| outliers as f64 / rows.len() as f64),
            }
        };
        Self {
            dataset_id: ds.id().to_string(),
            spec: spec.cloned(),
            bias: bias.copied(),
            proxy_dims: ds.proxy_dims().map(|p| p.iter().copied().collect()),
            group_a: counts(false),
            group_b: counts(true),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises") + "\n"
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, inject_under_representation, BiasKind};

    #[test]
    fn counts_and_round_trip() {
        let spec = SynthSpec::default();
        let ds: AttributedDataset<f64> = generate(&spec).unwrap();
        let biased = inject_under_representation(&ds, 0.2, 1).unwrap();
        let bias = BiasSpec {
            kind: BiasKind::UnderRepresentation,
            beta: 0.2,
            seed: 1,
        };
        let m = DatasetManifest::describe(&biased, Some(&spec), Some(&bias));
        assert_eq!(m.group_b.outliers, 80);
        assert_eq!(m.group_a.rows, 1000);
        assert_eq!(m.proxy_dims, Some(vec![0, 1]));
        assert_eq!(DatasetManifest::from_json(&m.to_json()).unwrap(), m);
    }
}
