use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Welch estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchParams {
    /// Upper bound on the segment length; the effective length is
    /// `min(segment_len, T)`.
    pub segment_len: usize,
    /// Fraction of a segment shared with the next one.
    pub overlap: f64,
}

impl Default for WelchParams {
    fn default() -> Self {
        Self { segment_len: 256, overlap: 0.5 }
    }
}

impl WelchParams {
    /// Descriptive tags recorded alongside computed spectra.
    pub const WINDOW: &'static str = "hann_periodic";
    pub const DETREND: &'static str = "constant";
    pub const SCALING: &'static str = "density_one_sided";
}

/// One-sided power spectral density estimate of a flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PsdRep<T> {
    pub power: Vec<T>,
    /// Bin frequencies in cycles per hour when `fs` is samples per hour.
    pub freqs: Vec<T>,
    pub fs: T,
}

fn hann<T: Scalar>(n: usize) -> Vec<T> {
    let nf = T::from_usize_lossy(n);
    (0..n)
        .map(|k| {
            let phase = T::TAU() * T::from_usize_lossy(k) / nf;
            T::lit(0.5) - T::lit(0.5) * phase.cos()
        })
        .collect()
}

/// Welch's averaged periodogram: Hann-windowed segments with the segment mean
/// removed, density scaling `1/(fs·Σw²)`, folded to one side.
pub fn psd_rep<T: Scalar>(flow: &[T], fs: T, params: &WelchParams) -> Result<PsdRep<T>> {
    let mut planner = FftPlanner::new();
    psd_with_planner(flow, fs, params, &mut planner)
}

pub(crate) fn psd_with_planner<T: Scalar>(
    flow: &[T],
    fs: T,
    params: &WelchParams,
    planner: &mut FftPlanner<T>,
) -> Result<PsdRep<T>> {
    if !(fs > T::zero() && fs.is_finite()) {
        return Err(Error::InvalidArgument(format!("sampling frequency {fs} must be positive")));
    }
    if !(0.0..1.0).contains(&params.overlap) {
        return Err(Error::InvalidArgument(format!("overlap {} outside [0, 1)", params.overlap)));
    }
    let nperseg = params.segment_len.min(flow.len());
    if nperseg < 2 {
        return Err(Error::InvalidArgument(format!(
            "series of length {} is shorter than one Welch segment",
            flow.len()
        )));
    }
    let noverlap = (params.overlap * nperseg as f64).floor() as usize;
    let step = nperseg - noverlap;
    let window: Vec<T> = hann(nperseg);
    let win_power: T = window.iter().map(|&w| w * w).sum();
    let fft = planner.plan_fft_forward(nperseg);

    let n_bins = nperseg / 2 + 1;
    let mut acc = vec![T::zero(); n_bins];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); nperseg];
    let mut segments = 0usize;
    let mut start = 0;
    while start + nperseg <= flow.len() {
        let seg = &flow[start..start + nperseg];
        let mean = seg.iter().copied().sum::<T>() / T::from_usize_lossy(nperseg);
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((x - mean) * w, T::zero());
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        segments += 1;
        start += step;
    }

    let scale = T::one() / (fs * win_power * T::from_usize_lossy(segments));
    let two = T::lit(2.0);
    let has_nyquist = nperseg.is_multiple_of(2);
    let power = acc
        .into_iter()
        .enumerate()
        .map(|(k, a)| {
            let interior = k != 0 && !(has_nyquist && k == n_bins - 1);
            if interior {
                a * scale * two
            } else {
                a * scale
            }
        })
        .collect();
    let df = fs / T::from_usize_lossy(nperseg);
    let freqs = (0..n_bins).map(|k| T::from_usize_lossy(k) * df).collect();
    Ok(PsdRep { power, freqs, fs })
}

/// Rescales a spectrum to unit total mass; an all-zero spectrum is returned
/// unchanged.
pub fn unit_mass<T: Scalar>(power: &[T]) -> Vec<T> {
    let total: T = power.iter().copied().sum();
    if total > T::zero() {
        power.iter().map(|&p| p / total).collect()
    } else {
        power.to_vec()
    }
}
