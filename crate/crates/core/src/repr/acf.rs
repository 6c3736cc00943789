use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Sample autocorrelations of a flow at a fixed set of lags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AcfRep<T> {
    pub rho: Vec<T>,
    pub lags: Vec<usize>,
    /// Set for constant flows, whose correlation is undefined; `rho` is then
    /// all zeros.
    pub degenerate: bool,
}

/// Lag schedule for a sampling interval: every step up to two hours, hourly
/// lags from three to six hours, then twelve hours and one day.
pub fn default_lags(interval_seconds: u32) -> Result<Vec<usize>> {
    if interval_seconds == 0 || 3600 % interval_seconds != 0 {
        return Err(Error::InvalidArgument(format!(
            "interval of {interval_seconds} s does not divide one hour"
        )));
    }
    let per_hour = (3600 / interval_seconds) as usize;
    let mut lags: Vec<usize> = (1..=2 * per_hour).collect();
    lags.extend((3..=6).map(|h| h * per_hour));
    lags.extend([12 * per_hour, 24 * per_hour]);
    Ok(lags)
}

/// Pearson correlation, or `None` when either side has zero variance.
pub(crate) fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Option<T> {
    debug_assert_eq!(a.len(), b.len());
    if a.len() < 2 {
        return None;
    }
    let n = T::from_usize_lossy(a.len());
    let ma = a.iter().copied().sum::<T>() / n;
    let mb = b.iter().copied().sum::<T>() / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= T::zero() || sbb <= T::zero() {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).max(-T::one()).min(T::one()))
}

/// Correlation between `x(t)` and `x(t − ℓ)` over their overlap, per lag.
/// A lag whose overlap is constant on either side contributes 0.
pub fn acf_rep<T: Scalar>(flow: &[T], lags: &[usize]) -> Result<AcfRep<T>> {
    if lags.is_empty() {
        return Err(Error::InvalidArgument("empty lag set".into()));
    }
    if lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("lags must be strictly increasing".into()));
    }
    let max_lag = *lags.last().expect("nonempty");
    if max_lag >= flow.len() {
        return Err(Error::InvalidArgument(format!(
            "maximum lag {max_lag} needs a series longer than {}",
            flow.len()
        )));
    }
    let first = flow[0];
    if flow.iter().all(|&v| v == first) {
        return Ok(AcfRep { rho: vec![T::zero(); lags.len()], lags: lags.to_vec(), degenerate: true });
    }
    let rho = lags
        .iter()
        .map(|&lag| {
            if lag == 0 {
                T::one()
            } else {
                pearson(&flow[lag..], &flow[..flow.len() - lag]).unwrap_or_else(T::zero)
            }
        })
        .collect();
    Ok(AcfRep { rho, lags: lags.to_vec(), degenerate: false })
}
