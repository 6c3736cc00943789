use serde::{Deserialize, Serialize};

use crate::cluster::Partition;
use crate::error::{Error, Result};

/// Label co-occurrence counts `n[i][j]` with row and column sums.
struct Contingency {
    n: usize,
    cells: Vec<Vec<u64>>,
    rows: Vec<u64>,
    cols: Vec<u64>,
}

impl Contingency {
    fn new(a: &Partition, b: &Partition) -> Result<Self> {
        if a.n_items() != b.n_items() {
            return Err(Error::Shape(format!(
                "partitions over {} and {} items",
                a.n_items(),
                b.n_items()
            )));
        }
        let mut cells = vec![vec![0u64; b.k()]; a.k()];
        for (&la, &lb) in a.labels().iter().zip(b.labels()) {
            cells[la - 1][lb - 1] += 1;
        }
        let rows = cells.iter().map(|r| r.iter().sum()).collect();
        let cols = (0..b.k()).map(|j| cells.iter().map(|r| r[j]).sum()).collect();
        Ok(Self { n: a.n_items(), cells, rows, cols })
    }
}

fn pairs(x: u64) -> f64 {
    (x * x.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index `(index − expected) / (max − expected)` over pair
/// counts. When `max == expected` (both partitions trivial in the same way)
/// the value is 1 if the partitions agree on every pair and 0 otherwise.
pub fn ari(a: &Partition, b: &Partition) -> Result<f64> {
    let c = Contingency::new(a, b)?;
    let index: f64 = c.cells.iter().flatten().map(|&x| pairs(x)).sum();
    let sum_a: f64 = c.rows.iter().map(|&x| pairs(x)).sum();
    let sum_b: f64 = c.cols.iter().map(|&x| pairs(x)).sum();
    let total = pairs(c.n as u64);
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(if index == max { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information divided by the arithmetic mean of the two label
/// entropies. Defined as 0 when either partition has zero entropy.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    let c = Contingency::new(a, b)?;
    let n = c.n as f64;
    let (ha, hb) = (entropy(&c.rows, n), entropy(&c.cols, n));
    if ha <= 0.0 || hb <= 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in c.cells.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (c.rows[i] as f64 * c.cols[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

pub const NMI_NORMALIZATION: &str = "arithmetic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub k: usize,
    pub min_size: usize,
    pub mean_size: f64,
    pub max_size: usize,
    pub n_singletons: usize,
    pub singleton_pct: f64,
}

pub fn cluster_stats(p: &Partition) -> ClusterStats {
    let sizes = p.sizes();
    let n_singletons = sizes.iter().filter(|&&s| s == 1).count();
    ClusterStats {
        k: p.k(),
        min_size: *sizes.iter().min().expect("partitions are nonempty"),
        mean_size: p.n_items() as f64 / p.k() as f64,
        max_size: *sizes.iter().max().expect("partitions are nonempty"),
        n_singletons,
        singleton_pct: 100.0 * n_singletons as f64 / p.k() as f64,
    }
}
