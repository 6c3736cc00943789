use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

pub const DEFAULT_BINS: usize = 50;

/// Empirical probability mass of a normalized flow over equal-width bins on
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HistogramRep<T> {
    pub pmf: Vec<T>,
    pub bin_edges: Vec<T>,
}

/// Bin index for `x` on `[0, 1]` split into `bins` half-open bins
/// `[lo, hi)`, the top bin closed. Out-of-range values land in the edge bins.
#[inline]
fn bin_of<T: Scalar>(x: T, bins: usize) -> usize {
    if x <= T::zero() {
        return 0;
    }
    let b = (x * T::from_usize_lossy(bins)).floor().to_usize().unwrap_or(bins);
    b.min(bins - 1)
}

pub fn histogram_rep<T: Scalar>(flow: &[T], bins: usize) -> Result<HistogramRep<T>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    if flow.is_empty() {
        return Err(Error::InvalidArgument("histogram of an empty series".into()));
    }
    let mut counts = vec![0usize; bins];
    for &x in flow {
        counts[bin_of(x, bins)] += 1;
    }
    let total = T::from_usize_lossy(flow.len());
    let width = T::one() / T::from_usize_lossy(bins);
    Ok(HistogramRep {
        pmf: counts.into_iter().map(|c| T::from_usize_lossy(c) / total).collect(),
        bin_edges: (0..=bins).map(|k| T::from_usize_lossy(k) * width).collect(),
    })
}

/// `p·log₂(p/q)` with the `0·log(0/·) = 0` convention.
#[inline]
fn kl_term<T: Scalar>(p: T, q: T) -> T {
    if p > T::zero() {
        p * (p / q).log2()
    } else {
        T::zero()
    }
}

/// Jensen–Shannon divergence (base-2 logarithm) between two pmfs on the same
/// support. The result lies in `[0, 1]`.
pub fn jsd_pmf<T: Scalar>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("bin count mismatch: {} vs {}", p.len(), q.len())));
    }
    let half = T::lit(0.5);
    let (mut kl_p, mut kl_q) = (T::zero(), T::zero());
    for (&a, &b) in p.iter().zip(q) {
        let m = half * (a + b);
        kl_p += kl_term(a, m);
        kl_q += kl_term(b, m);
    }
    let d = half * kl_p + half * kl_q;
    Ok(d.max(T::zero()).min(T::one()))
}

pub fn jsd<T: Scalar>(p: &HistogramRep<T>, q: &HistogramRep<T>) -> Result<T> {
    jsd_pmf(&p.pmf, &q.pmf)
}
