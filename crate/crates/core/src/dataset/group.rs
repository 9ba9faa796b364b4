use super::AttributedDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Split of the sample indices into tag = 1 (`members`) and tag = 0 (`complement`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupView {
    pub tag_name: String,
    pub members: Vec<usize>,
    pub complement: Vec<usize>,
}

impl GroupView {
    pub fn from_mask(tag_name: impl Into<String>, mask: &[bool]) -> Self {
        let (members, complement) = (0..mask.len()).partition(|&i| mask[i]);
        Self {
            tag_name: tag_name.into(),
            members,
            complement,
        }
    }

    pub fn n(&self) -> usize {
        self.members.len() + self.complement.len()
    }

    /// The same split with the roles of tag and negation exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            tag_name: format!("not_{}", self.tag_name),
            members: self.complement.clone(),
            complement: self.members.clone(),
        }
    }

    /// Membership as a boolean vector of length `n`.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n()];
        for &i in &self.members {
            m[i] = true;
        }
        m
    }
}

pub fn group_view<T: Scalar>(ds: &AttributedDataset<T>, tag_name: &str) -> Result<GroupView> {
    let mask = ds
        .tag(tag_name)
        .ok_or_else(|| Error::UnknownTag(tag_name.to_string()))?;
    Ok(GroupView::from_mask(tag_name, mask))
}
