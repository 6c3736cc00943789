use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::histogram::jsd_pmf;
use super::{ReprKind, ReprMatrix};
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Jsd,
    Euclidean,
}

impl Metric {
    pub fn compatible_with(self, kind: ReprKind) -> bool {
        match self {
            Metric::Jsd => kind == ReprKind::Histogram,
            Metric::Euclidean => true,
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsd" => Ok(Self::Jsd),
            "euclidean" => Ok(Self::Euclidean),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Jsd => "jsd",
            Metric::Euclidean => "euclidean",
        })
    }
}

/// Symmetric, nonnegative `M × M` matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix<T> {
    n: usize,
    data: Vec<T>,
    metric: Metric,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl<T: Scalar> DissimilarityMatrix<T> {
    /// Validates and wraps a row-major square matrix.
    pub fn new(n: usize, data: Vec<T>, metric: Metric) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!("{} entries for a {n}x{n} matrix", data.len())));
        }
        for i in 0..n {
            if data[i * n + i] != T::zero() {
                return Err(Error::Validation(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = data[i * n + j];
                if !v.is_finite() || v < T::zero() {
                    return Err(Error::Validation(format!("entry ({i}, {j}) = {v} is not a nonnegative number")));
                }
                if metric == Metric::Jsd && v > T::one() {
                    return Err(Error::Validation(format!("jsd entry ({i}, {j}) = {v} exceeds 1")));
                }
                if (v - data[j * n + i]).abs().as_f64() > SYMMETRY_TOL {
                    return Err(Error::Validation(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, data, metric })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Matrix with rows and columns reordered so that new index `a` is old
    /// index `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut data = vec![T::zero(); n * n];
        for a in 0..n {
            for b in 0..n {
                data[a * n + b] = self.get(perm[a], perm[b]);
            }
        }
        Self { n, data, metric: self.metric }
    }

    /// CSV without header; the metric is carried by the caller (metadata
    /// sidecar or CLI flag).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, metric: Metric, source: &str) -> Result<Self> {
        let mut data = Vec::new();
        let mut n = None;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|c| {
                    c.trim().parse::<f64>().map(T::lit).map_err(|_| Error::Parse {
                        path: source.to_string(),
                        line: idx + 1,
                        msg: format!("`{}` is not a number", c.trim()),
                    })
                })
                .collect::<Result<Vec<T>>>()?;
            match n {
                None => n = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Parse {
                        path: source.to_string(),
                        line: idx + 1,
                        msg: format!("expected {w} columns, found {}", row.len()),
                    })
                }
                _ => {}
            }
            data.extend(row);
        }
        let n = n.unwrap_or(0);
        if data.len() != n * n {
            return Err(Error::Shape(format!("dissimilarity CSV is not square ({} values, {n} columns)", data.len())));
        }
        Self::new(n, data, metric)
    }
}

fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// Fills `d[i][j] = metric(rep_i, rep_j)` for `i < j` and mirrors it. Rows
/// are computed in parallel; each entry is independent, so the result does
/// not depend on the thread count.
pub fn pairwise_dissimilarity<T: Scalar>(
    reps: &ReprMatrix<T>,
    metric: Metric,
) -> Result<DissimilarityMatrix<T>> {
    if !metric.compatible_with(reps.kind) {
        return Err(Error::Config(format!(
            "metric {metric} cannot be used with {} features",
            reps.kind
        )));
    }
    let n = reps.features.len();
    if let Some(first) = reps.features.first() {
        if reps.features.iter().any(|f| f.len() != first.len()) {
            return Err(Error::Shape("feature vectors have unequal lengths".into()));
        }
    }
    let upper: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    let (a, b) = (&reps.features[i], &reps.features[j]);
                    match metric {
                        Metric::Jsd => jsd_pmf(a, b).expect("lengths checked"),
                        Metric::Euclidean => euclidean(a, b),
                    }
                })
                .collect()
        })
        .collect();
    let mut data = vec![T::zero(); n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    DissimilarityMatrix::new(n, data, metric)
}
