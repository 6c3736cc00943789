use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Partition, PartitionMethod};
use crate::error::{Error, Result};
use crate::repr::{DissimilarityMatrix, ReprKind};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    /// Maximum pairwise member distance.
    Complete,
    /// Mean over all cross-cluster member pairs.
    Average,
}

impl Linkage {
    /// Linkage used with each representation: complete for histograms,
    /// average for ACF and PSD features.
    pub fn for_repr(kind: ReprKind) -> Self {
        match kind {
            ReprKind::Histogram => Linkage::Complete,
            ReprKind::Acf | ReprKind::Psd => Linkage::Average,
        }
    }

    pub fn partition_method(self) -> PartitionMethod {
        match self {
            Linkage::Complete => PartitionMethod::HacComplete,
            Linkage::Average => PartitionMethod::HacAverage,
        }
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "complete" => Ok(Self::Complete),
            "average" => Ok(Self::Average),
            other => Err(Error::Config(format!("unknown linkage `{other}`"))),
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Complete => "complete",
            Linkage::Average => "average",
        })
    }
}

/// One agglomeration step. Leaves have ids `0..M`; the cluster formed at
/// step `s` gets id `M + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Merge<T> {
    pub a: usize,
    pub b: usize,
    pub height: T,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dendrogram<T> {
    leaves: usize,
    linkage: Linkage,
    merges: Vec<Merge<T>>,
}

impl<T: Scalar> Dendrogram<T> {
    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn linkage(&self) -> Linkage {
        self.linkage
    }

    pub fn merges(&self) -> &[Merge<T>] {
        &self.merges
    }

    /// Members of the two clusters joined at each step, each sorted.
    pub fn merge_sets(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut members: Vec<Vec<usize>> = (0..self.leaves).map(|i| vec![i]).collect();
        let mut out = Vec::with_capacity(self.merges.len());
        for mg in &self.merges {
            let (a, b) = (members[mg.a].clone(), members[mg.b].clone());
            let mut joined = [a.clone(), b.clone()].concat();
            joined.sort_unstable();
            members.push(joined);
            out.push((a, b));
        }
        out
    }

    /// `step,a,b,height,size` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,a,b,height,size")?;
        for (s, m) in self.merges.iter().enumerate() {
            writeln!(out, "{s},{},{},{},{}", m.a, m.b, m.height, m.size)?;
        }
        Ok(())
    }
}

/// Agglomerative clustering from singletons, merging the closest pair of
/// clusters at each step. Distances to a merged cluster use the
/// Lance–Williams update for the chosen linkage, which reproduces the
/// definitional max / size-weighted mean over member pairs.
///
/// Ties go to the pair with the lexicographically smallest
/// `(min member, min member)` key: each active cluster lives in the slot of
/// its smallest member, and the scan only replaces on a strictly smaller
/// distance.
pub fn hac<T: Scalar>(d: &DissimilarityMatrix<T>, linkage: Linkage) -> Result<Dendrogram<T>> {
    let n = d.len();
    if n < 2 {
        return Err(Error::InvalidArgument("clustering needs at least two items".into()));
    }
    let mut dist = d.as_slice().to_vec();
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(usize, usize, T)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if !active[j] {
                    continue;
                }
                let v = dist[i * n + j];
                if best.is_none_or(|(_, _, b)| v < b) {
                    best = Some((i, j, v));
                }
            }
        }
        let (i, j, height) = best.expect("at least two active clusters");
        let (ni, nj) = (T::from_usize_lossy(size[i]), T::from_usize_lossy(size[j]));
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let (dik, djk) = (dist[i * n + k], dist[j * n + k]);
            let v = match linkage {
                Linkage::Complete => dik.max(djk),
                Linkage::Average => (ni * dik + nj * djk) / (ni + nj),
            };
            dist[i * n + k] = v;
            dist[k * n + i] = v;
        }
        active[j] = false;
        size[i] += size[j];
        merges.push(Merge { a: id[i], b: id[j], height, size: size[i] });
        id[i] = n + step;
    }
    Ok(Dendrogram { leaves: n, linkage, merges })
}

/// Undoes the last `k − 1` merges. Clusters are labelled `1..=k` in order of
/// their smallest member.
pub fn cut<T: Scalar>(dendrogram: &Dendrogram<T>, k: usize) -> Result<Partition> {
    let n = dendrogram.leaves;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    // Union-find over node ids (leaves and merged clusters).
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (s, m) in dendrogram.merges.iter().take(n - k).enumerate() {
        parent[m.a] = n + s;
        parent[m.b] = n + s;
    }
    let roots: Vec<usize> = (0..n).map(|leaf| find(&mut parent, leaf)).collect();
    Partition::from_groups(&roots, dendrogram.linkage.partition_method(), None)
}
