use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::TmSeries;
use crate::error::{Error, Result};
use crate::repr::pearson;
use crate::Scalar;

fn check_same_shape<T: Scalar>(truth: &TmSeries<T>, pred: &TmSeries<T>) -> Result<()> {
    if truth.n_nodes() != pred.n_nodes() || truth.len() != pred.len() {
        return Err(Error::Shape(format!(
            "truth is {} steps of {}x{}, prediction is {} steps of {}x{}",
            truth.len(),
            truth.n_nodes(),
            truth.n_nodes(),
            pred.len(),
            pred.n_nodes(),
            pred.n_nodes()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("RMSE over an empty segment".into()));
    }
    Ok(())
}

/// Root of the mean squared error pooled over every step and every entry.
pub fn rmse<T: Scalar>(truth: &TmSeries<T>, pred: &TmSeries<T>) -> Result<T> {
    check_same_shape(truth, pred)?;
    rmse_slices(truth.values(), pred.values())
}

pub fn rmse_slices<T: Scalar>(truth: &[T], pred: &[T]) -> Result<T> {
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!("{} truth values, {} predictions", truth.len(), pred.len())));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("RMSE over no values".into()));
    }
    let sse: T = truth.iter().zip(pred).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((sse / T::from_usize_lossy(truth.len())).sqrt())
}

/// Pooled RMSE over per-flow series (`flows[m][step]`).
pub fn rmse_flows<T: Scalar>(truth: &[Vec<T>], pred: &[Vec<T>]) -> Result<T> {
    if truth.len() != pred.len() || truth.iter().zip(pred).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::Shape("truth and prediction flow sets differ in shape".into()));
    }
    let n: usize = truth.iter().map(Vec::len).sum();
    if n == 0 {
        return Err(Error::InvalidArgument("RMSE over no values".into()));
    }
    let sse: T = truth
        .iter()
        .zip(pred)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)))
        .sum();
    Ok((sse / T::from_usize_lossy(n)).sqrt())
}

/// RMSE of each flow over the test steps. With equal step counts, the
/// pooled RMSE is the root mean of the squares of these values.
pub fn per_flow_rmse<T: Scalar>(truth: &TmSeries<T>, pred: &TmSeries<T>) -> Result<Vec<T>> {
    check_same_shape(truth, pred)?;
    let m = truth.n_flows();
    let mut sse = vec![T::zero(); m];
    for t in 0..truth.len() {
        for ((s, &a), &b) in sse.iter_mut().zip(truth.matrix(t)).zip(pred.matrix(t)) {
            *s += (a - b) * (a - b);
        }
    }
    let steps = T::from_usize_lossy(truth.len());
    Ok(sse.into_iter().map(|s| (s / steps).sqrt()).collect())
}

/// What trace values measure, for conversion of errors to Mbps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// Bytes transferred per measurement interval (the public archives).
    #[default]
    BytesPerInterval,
    /// Already in megabits per second.
    Mbps,
    /// Not known; physical RMSE cannot be reported.
    Unknown,
}

impl FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bytes_per_interval" | "bytes" => Ok(Self::BytesPerInterval),
            "mbps" => Ok(Self::Mbps),
            "unknown" => Ok(Self::Unknown),
            other => Err(Error::Config(format!("unknown units `{other}`"))),
        }
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::BytesPerInterval => "bytes_per_interval",
            Units::Mbps => "mbps",
            Units::Unknown => "unknown",
        })
    }
}

impl Units {
    /// Multiplier taking one trace unit to Mbps.
    pub fn to_mbps(self, interval_seconds: u32) -> Result<f64> {
        match self {
            Units::BytesPerInterval => {
                if interval_seconds == 0 {
                    return Err(Error::InvalidArgument("interval of zero seconds".into()));
                }
                Ok(8.0 / (f64::from(interval_seconds) * 1e6))
            }
            Units::Mbps => Ok(1.0),
            Units::Unknown => Err(Error::Config("trace units unknown; physical RMSE unavailable".into())),
        }
    }
}

/// RMSE with every error converted to Mbps before squaring.
pub fn rmse_physical<T: Scalar>(truth: &TmSeries<T>, pred: &TmSeries<T>, units: Units) -> Result<f64> {
    check_same_shape(truth, pred)?;
    let factor = units.to_mbps(truth.interval_seconds())?;
    let sse: f64 = truth
        .values()
        .iter()
        .zip(pred.values())
        .map(|(&a, &b)| {
            let e = (a - b).as_f64() * factor;
            e * e
        })
        .sum();
    Ok((sse / truth.values().len() as f64).sqrt())
}

/// Sample Pearson correlation of two per-flow error vectors. `None` when
/// either vector has zero variance.
pub fn error_correlation<T: Scalar>(e_a: &[T], e_b: &[T]) -> Result<Option<f64>> {
    if e_a.len() != e_b.len() {
        return Err(Error::Shape(format!("error vectors of length {} and {}", e_a.len(), e_b.len())));
    }
    if e_a.len() < 2 {
        return Err(Error::InvalidArgument("correlation needs at least two values".into()));
    }
    Ok(pearson(e_a, e_b).map(Scalar::as_f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize, interval: u32, values: Vec<f64>) -> TmSeries<f64> {
        TmSeries::new_signed(n, interval, values, None).unwrap()
    }

    #[test]
    fn rmse_cases() {
        let t = series(1, 300, vec![0.0, 0.0]);
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
        let p = series(1, 300, vec![3.0, 4.0]);
        assert!((rmse(&t, &p).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        let c = series(1, 300, vec![-2.5, -2.5]);
        assert_eq!(rmse(&t, &c).unwrap(), 2.5);
        let wrong = series(1, 300, vec![0.0; 3]);
        assert!(matches!(rmse(&t, &wrong), Err(Error::Shape(_))));
    }

    #[test]
    fn per_flow_aggregates_to_pooled() {
        let t = series(2, 300, (0..12).map(|v| v as f64).collect());
        let p = series(2, 300, (0..12).map(|v| (v * v) as f64 * 0.1).collect());
        let per = per_flow_rmse(&t, &p).unwrap();
        let pooled = (per.iter().map(|r| r * r).sum::<f64>() / 4.0).sqrt();
        assert!((pooled - rmse(&t, &p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn physical_units() {
        let t = series(1, 300, vec![0.0]);
        let p = series(1, 300, vec![1.25e6]);
        let v = rmse_physical(&t, &p, Units::BytesPerInterval).unwrap();
        assert!((v - 1.25e6 * 8.0 / 300e6).abs() < 1e-15);
        assert!((v - 0.0333).abs() < 1e-4);
        assert_eq!(rmse_physical(&t, &t, Units::BytesPerInterval).unwrap(), 0.0);
        let p900 = series(1, 900, vec![1.25e6]);
        let t900 = series(1, 900, vec![0.0]);
        let ratio = v / rmse_physical(&t900, &p900, Units::BytesPerInterval).unwrap();
        assert!((ratio - 3.0).abs() < 1e-12);
        assert!(matches!(rmse_physical(&t, &p, Units::Unknown), Err(Error::Config(_))));
        assert_eq!(rmse_physical(&t, &p, Units::Mbps).unwrap(), 1.25e6);
    }

    #[test]
    fn correlation_cases() {
        let a = [1.0, 2.0, 3.0];
        let r = error_correlation(&a, &[1.0, 2.0, 4.0]).unwrap().unwrap();
        assert!((r - 0.9819805060619657).abs() < 1e-12);
        assert!((error_correlation(&a, &[2.0, 4.0, 6.0]).unwrap().unwrap() - 1.0).abs() < 1e-12);
        assert!((error_correlation(&a, &[4.0, 3.0, 2.0]).unwrap().unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(error_correlation(&a, &[1.0, 1.0, 1.0]).unwrap(), None);
        assert!(error_correlation(&a, &[1.0]).is_err());
        assert!(error_correlation(&[1.0], &[1.0]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rmse_permutation_invariant(
                pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 4),
                rot in 0usize..4,
            ) {
                let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
                let r = rmse_slices(&a, &b).unwrap();
                prop_assert_eq!(rmse_slices(&a, &a).unwrap(), 0.0);
                let (mut ar, mut br) = (a.clone(), b.clone());
                ar.rotate_left(rot);
                br.rotate_left(rot);
                prop_assert!((rmse_slices(&ar, &br).unwrap() - r).abs() < 1e-12);
            }
        }
    }
}
