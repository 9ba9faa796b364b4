//! Published property tables shipped with the tool, verified by checksum.

use std::collections::BTreeMap;
use std::path::Path;

use adfair_core::stats::{PropertyTable, SeTable};
use anyhow::{bail, Context, Result};

use crate::output::sha256_hex;

pub const SE_TABLE: &str = "se_table";

/// Property-table fixtures as (id, algorithm, dataset).
pub const TABLES: [(&str, &str, &str); 4] = [
    ("celeba_ae", "ae", "celeba"),
    ("lfw_ae", "ae", "lfw"),
    ("celeba_svdd", "svdd", "celeba"),
    ("lfw_svdd", "svdd", "lfw"),
];

const EMBEDDED: [(&str, &str); 5] = [
    ("celeba_ae", include_str!("../fixtures/celeba_ae.csv")),
    ("lfw_ae", include_str!("../fixtures/lfw_ae.csv")),
    ("celeba_svdd", include_str!("../fixtures/celeba_svdd.csv")),
    ("lfw_svdd", include_str!("../fixtures/lfw_svdd.csv")),
    ("se_table", include_str!("../fixtures/se_table.csv")),
];

const EMBEDDED_SUMS: &str = include_str!("../fixtures/SHA256SUMS");

pub fn ids() -> impl Iterator<Item = &'static str> {
    EMBEDDED.iter().map(|(id, _)| *id)
}

/// Raw CSV text of every fixture, checked against the checksum list.
#[derive(Debug, Clone)]
pub struct FixtureSet {
    texts: BTreeMap<String, String>,
}

fn parse_sums(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let mut parts = line.split_whitespace();
        let (Some(sum), Some(name)) = (parts.next(), parts.next()) else {
            bail!("malformed checksum line `{line}`");
        };
        out.insert(name.trim_start_matches('*').to_string(), sum.to_lowercase());
    }
    Ok(out)
}

impl FixtureSet {
    /// The copies compiled into the binary.
    pub fn embedded() -> Result<Self> {
        let texts = EMBEDDED.iter().map(|(id, t)| (id.to_string(), t.to_string())).collect();
        Self::verified(texts, EMBEDDED_SUMS)
    }

    /// Loads `<id>.csv` for every fixture from `dir`, which must hold a `SHA256SUMS`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let sums = std::fs::read_to_string(dir.join("SHA256SUMS"))
            .with_context(|| format!("missing SHA256SUMS in {}", dir.display()))?;
        let mut texts = BTreeMap::new();
        for id in ids() {
            let path = dir.join(format!("{id}.csv"));
            let text = std::fs::read_to_string(&path).with_context(|| format!("missing fixture {}", path.display()))?;
            texts.insert(id.to_string(), text);
        }
        Self::verified(texts, &sums)
    }

    pub fn load(dir: Option<&Path>) -> Result<Self> {
        match dir {
            Some(d) => Self::from_dir(d),
            None => Self::embedded(),
        }
    }

    fn verified(texts: BTreeMap<String, String>, sums: &str) -> Result<Self> {
        let sums = parse_sums(sums)?;
        for (id, text) in &texts {
            let name = format!("{id}.csv");
            let want = sums.get(&name).with_context(|| format!("no checksum listed for {name}"))?;
            let got = sha256_hex(text.as_bytes());
            if &got != want {
                bail!("checksum mismatch for {name}: expected {want}, found {got}");
            }
        }
        Ok(Self { texts })
    }

    pub fn text(&self, id: &str) -> Result<&str> {
        self.texts
            .get(id)
            .map(String::as_str)
            .with_context(|| format!("unknown fixture `{id}`"))
    }

    pub fn table(&self, id: &str) -> Result<PropertyTable<f64>> {
        let (_, alg, ds) = TABLES
            .iter()
            .find(|(i, _, _)| *i == id)
            .with_context(|| format!("`{id}` is not a property-table fixture"))?;
        Ok(PropertyTable::read_csv(self.text(id)?.as_bytes(), alg, ds)?)
    }

    pub fn tables(&self) -> Result<Vec<PropertyTable<f64>>> {
        TABLES.iter().map(|(id, _, _)| self.table(id)).collect()
    }

    pub fn se_table(&self) -> Result<SeTable<f64>> {
        Ok(SeTable::read_csv(self.text(SE_TABLE)?.as_bytes())?)
    }

    /// Digest over all fixture contents, for config hashing.
    pub fn digest(&self) -> String {
        let joined: Vec<u8> = self
            .texts
            .iter()
            .flat_map(|(k, v)| [k.as_bytes(), v.as_bytes()].concat())
            .collect();
        sha256_hex(&joined)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_fixtures_verify_and_parse() {
        let f = FixtureSet::embedded().unwrap();
        let rows: Vec<usize> = f.tables().unwrap().iter().map(|t| t.len()).collect();
        assert_eq!(rows, [40, 70, 40, 70]);
        assert_eq!(f.se_table().unwrap().rows.len(), 40);
    }

    #[test]
    fn tampered_fixture_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for (id, text) in EMBEDDED {
            std::fs::write(dir.path().join(format!("{id}.csv")), text).unwrap();
        }
        std::fs::write(dir.path().join("SHA256SUMS"), EMBEDDED_SUMS).unwrap();
        assert!(FixtureSet::from_dir(dir.path()).is_ok());
        std::fs::write(dir.path().join("lfw_ae.csv"), "tag,DIR,reconstruction_ratio,SSB,SFV,label_noise\n").unwrap();
        let err = FixtureSet::from_dir(dir.path()).unwrap_err().to_string();
        assert!(err.contains("checksum mismatch"), "{err}");
        std::fs::remove_file(dir.path().join("se_table.csv")).unwrap();
        assert!(FixtureSet::from_dir(dir.path()).is_err());
    }
}
