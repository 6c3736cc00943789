use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a partition was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    HacComplete,
    HacAverage,
    Naive,
    /// Labels planted by the synthetic generator.
    Planted,
    /// Labels supplied from elsewhere.
    External,
}

/// Assignment of `M` flows to clusters labelled `1..=k`; every cluster is
/// nonempty, clusters are disjoint and cover all flows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr")]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
    method: PartitionMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct PartitionRepr {
    labels: Vec<usize>,
    k: Option<usize>,
    method: PartitionMethod,
    seed: Option<u64>,
}

impl TryFrom<PartitionRepr> for Partition {
    type Error = Error;

    fn try_from(r: PartitionRepr) -> Result<Self> {
        let p = Partition::new(r.labels, r.method, r.seed)?;
        if let Some(k) = r.k {
            if k != p.k {
                return Err(Error::Validation(format!("declared k = {k} but labels use {}", p.k)));
            }
        }
        Ok(p)
    }
}

impl Partition {
    /// Validates labels: `k` is the largest label and every label in
    /// `1..=k` occurs.
    pub fn new(labels: Vec<usize>, method: PartitionMethod, seed: Option<u64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Validation("partition over zero flows".into()));
        }
        if labels.contains(&0) {
            return Err(Error::Validation("cluster labels are 1-based".into()));
        }
        let k = *labels.iter().max().expect("nonempty");
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l - 1] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!("cluster {} is empty", empty + 1)));
        }
        Ok(Self { labels, k, method, seed })
    }

    /// Relabels arbitrary cluster ids to `1..=k` in order of each cluster's
    /// smallest member index.
    pub fn from_groups(ids: &[usize], method: PartitionMethod, seed: Option<u64>) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        let labels = ids
            .iter()
            .map(|id| {
                let next = map.len() + 1;
                *map.entry(*id).or_insert(next)
            })
            .collect();
        Self::new(labels, method, seed)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_items(&self) -> usize {
        self.labels.len()
    }

    pub fn method(&self) -> PartitionMethod {
        self.method
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Member flow indices of each cluster, in label order; members ascend.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (m, &l) in self.labels.iter().enumerate() {
            out[l - 1].push(m);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for &l in &self.labels {
            out[l - 1] += 1;
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
