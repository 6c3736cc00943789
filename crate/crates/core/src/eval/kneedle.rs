use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const KNEEDLE_SENSITIVITY: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knee {
    pub k: usize,
    /// Position of `k` in the input grid.
    pub index: usize,
    /// False when no knee was confirmed and `k` is the arg-min of the curve.
    pub found: bool,
    pub difference: Vec<f64>,
}

fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi > lo).then(|| v.iter().map(|&x| (x - lo) / (hi - lo)).collect())
}

fn argmin(y: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in y.iter().enumerate() {
        if v < y[best] {
            best = i;
        }
    }
    best
}

/// Knee of a decreasing error-versus-K curve.
///
/// Both axes are scaled to `[0, 1]`, the curve is flipped to the increasing
/// form `1 − y`, and the difference curve `(1 − y) − x` is scanned for
/// interior local maxima. A maximum at `i` counts once some later point drops
/// below `d[i] − S·mean(Δx)`. The confirmed maximum with the largest
/// difference wins; with none, the lowest point of the curve is returned and
/// `found` is false.
pub fn kneedle(k_values: &[usize], y: &[f64]) -> Result<Knee> {
    if k_values.len() != y.len() {
        return Err(Error::Shape(format!("{} K values, {} curve values", k_values.len(), y.len())));
    }
    if y.len() < 3 {
        return Err(Error::InvalidArgument("knee detection needs at least three points".into()));
    }
    if k_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("K values must be strictly increasing".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite value in curve".into()));
    }
    let fallback = |difference| {
        let i = argmin(y);
        Knee { k: k_values[i], index: i, found: false, difference }
    };
    let x: Vec<f64> = k_values.iter().map(|&k| k as f64).collect();
    let (Some(xn), Some(yn)) = (normalize(&x), normalize(y)) else {
        return Ok(fallback(vec![0.0; y.len()]));
    };
    if y[y.len() - 1] >= y[0] {
        return Ok(fallback(vec![0.0; y.len()]));
    }
    let d: Vec<f64> = xn.iter().zip(&yn).map(|(&a, &b)| (1.0 - b) - a).collect();
    let step = xn.windows(2).map(|w| w[1] - w[0]).sum::<f64>() / (xn.len() - 1) as f64;

    let mut best: Option<usize> = None;
    for i in 1..d.len() - 1 {
        if !(d[i] > d[i - 1] && d[i] >= d[i + 1]) {
            continue;
        }
        let threshold = d[i] - KNEEDLE_SENSITIVITY * step;
        if d[i + 1..].iter().any(|&v| v < threshold) && best.is_none_or(|b| d[i] > d[b]) {
            best = Some(i);
        }
    }
    Ok(match best {
        Some(i) => Knee { k: k_values[i], index: i, found: true, difference: d },
        None => fallback(d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_curve() {
        let k: Vec<usize> = (1..=10).collect();
        let y: Vec<f64> = k.iter().map(|&k| 1.0 / k as f64).collect();
        let knee = kneedle(&k, &y).unwrap();
        assert!(knee.found);
        // Difference curve: 0, 4/9, 14/27, 1/2, ... peaks at the third point.
        assert!((knee.difference[1] - 4.0 / 9.0).abs() < 1e-12);
        assert!((knee.difference[2] - 14.0 / 27.0).abs() < 1e-12);
        assert_eq!(knee.k, 3);
    }

    #[test]
    fn steep_drop_then_flat() {
        let knee = kneedle(&[1, 2, 3, 4, 5], &[10.0, 2.0, 1.9, 1.8, 1.7]).unwrap();
        assert!(knee.found);
        assert_eq!(knee.k, 2);
    }

    #[test]
    fn linear_has_no_knee() {
        let k: Vec<usize> = (1..=8).collect();
        let y: Vec<f64> = k.iter().map(|&k| 10.0 - k as f64).collect();
        let knee = kneedle(&k, &y).unwrap();
        assert!(!knee.found);
        assert_eq!(knee.k, 8);
    }

    #[test]
    fn flat_or_rising_curves_fall_back() {
        assert!(!kneedle(&[1, 2, 3], &[1.0, 1.0, 1.0]).unwrap().found);
        let rising = kneedle(&[1, 2, 3], &[1.0, 2.0, 3.0]).unwrap();
        assert!(!rising.found);
        assert_eq!(rising.k, 1);
    }

    #[test]
    fn bad_input() {
        assert!(kneedle(&[1, 2], &[2.0, 1.0]).is_err());
        assert!(kneedle(&[1, 3, 2], &[3.0, 2.0, 1.0]).is_err());
        assert!(kneedle(&[1, 2, 3], &[3.0, 2.0]).is_err());
    }
}
