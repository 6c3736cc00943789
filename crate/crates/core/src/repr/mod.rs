//! Flow representations and pairwise dissimilarities.
//!
//! Three feature maps are provided: the value histogram of a normalized flow
//! (compared with Jensen–Shannon divergence), its autocorrelation profile and
//! its Welch power spectrum (both compared with Euclidean distance).

mod acf;
mod dissimilarity;
mod histogram;
mod psd;

use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use acf::{acf_rep, default_lags, AcfRep};
pub use dissimilarity::{pairwise_dissimilarity, DissimilarityMatrix, Metric};
pub use histogram::{histogram_rep, jsd, jsd_pmf, HistogramRep, DEFAULT_BINS};
pub use psd::{psd_rep, unit_mass, PsdRep, WelchParams};

pub(crate) use acf::pearson;

use crate::dataset::FlowSet;
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReprKind {
    Histogram,
    Acf,
    Psd,
}

impl ReprKind {
    pub fn default_metric(self) -> Metric {
        match self {
            ReprKind::Histogram => Metric::Jsd,
            ReprKind::Acf | ReprKind::Psd => Metric::Euclidean,
        }
    }
}

impl FromStr for ReprKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "histogram" | "hist" => Ok(Self::Histogram),
            "acf" => Ok(Self::Acf),
            "psd" => Ok(Self::Psd),
            other => Err(Error::Config(format!("unknown representation `{other}`"))),
        }
    }
}

impl fmt::Display for ReprKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReprKind::Histogram => "histogram",
            ReprKind::Acf => "acf",
            ReprKind::Psd => "psd",
        })
    }
}

/// One feature vector per flow plus the representation tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ReprMatrix<T> {
    pub kind: ReprKind,
    pub features: Vec<Vec<T>>,
    /// Flows flagged as degenerate (constant flows under ACF).
    pub degenerate: Vec<usize>,
}

impl<T: Scalar> ReprMatrix<T> {
    pub fn new(kind: ReprKind, features: Vec<Vec<T>>, degenerate: Vec<usize>) -> Self {
        Self { kind, features, degenerate }
    }

    pub fn n_flows(&self) -> usize {
        self.features.len()
    }

    /// Header-less CSV, one flow per row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for f in &self.features {
            let row: Vec<String> = f.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Feature-extraction settings for all representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReprConfig {
    pub bins: usize,
    /// Explicit ACF lags; derived from the sampling interval when absent.
    pub lags: Option<Vec<usize>>,
    /// Samples per hour; derived from the sampling interval when absent.
    pub fs: Option<f64>,
    pub welch: WelchParams,
    /// Scale each spectrum to unit mass before distances are taken.
    pub psd_normalize: bool,
}

impl Default for ReprConfig {
    fn default() -> Self {
        Self { bins: DEFAULT_BINS, lags: None, fs: None, welch: WelchParams::default(), psd_normalize: true }
    }
}

impl ReprConfig {
    pub fn resolved_lags(&self, interval_seconds: u32) -> Result<Vec<usize>> {
        match &self.lags {
            Some(l) => Ok(l.clone()),
            None => default_lags(interval_seconds),
        }
    }

    pub fn resolved_fs(&self, interval_seconds: u32) -> f64 {
        self.fs.unwrap_or(3600.0 / f64::from(interval_seconds))
    }

    /// Fully resolved settings, written next to feature matrices.
    pub fn metadata(&self, kind: ReprKind, interval_seconds: u32, range: &Range<usize>) -> Result<ReprMetadata> {
        Ok(ReprMetadata {
            representation: kind,
            metric: kind.default_metric(),
            fit_range: [range.start, range.end],
            bins: (kind == ReprKind::Histogram).then_some(self.bins),
            lags: (kind == ReprKind::Acf).then(|| self.resolved_lags(interval_seconds)).transpose()?,
            fs: (kind == ReprKind::Psd).then(|| self.resolved_fs(interval_seconds)),
            welch: (kind == ReprKind::Psd).then(|| WelchMetadata {
                segment_len: self.welch.segment_len,
                overlap: self.welch.overlap,
                window: WelchParams::WINDOW.into(),
                detrend: WelchParams::DETREND.into(),
                scaling: WelchParams::SCALING.into(),
                unit_mass: self.psd_normalize,
            }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchMetadata {
    pub segment_len: usize,
    pub overlap: f64,
    pub window: String,
    pub detrend: String,
    pub scaling: String,
    pub unit_mass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprMetadata {
    pub representation: ReprKind,
    pub metric: Metric,
    pub fit_range: [usize; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub welch: Option<WelchMetadata>,
}

/// Computes the chosen representation for every flow over `range` (the
/// training region of normalized flows in the pipeline).
pub fn represent<T: Scalar>(
    flows: &FlowSet<T>,
    range: Range<usize>,
    kind: ReprKind,
    cfg: &ReprConfig,
) -> Result<ReprMatrix<T>> {
    if range.is_empty() || range.end > flows.len() {
        return Err(Error::InvalidArgument(format!(
            "representation range {range:?} invalid for series of length {}",
            flows.len()
        )));
    }
    let interval = flows.interval_seconds();
    let slices: Vec<&[T]> = flows.flows().iter().map(|f| &f[range.clone()]).collect();
    match kind {
        ReprKind::Histogram => {
            let features = slices
                .par_iter()
                .map(|s| histogram_rep(s, cfg.bins).map(|h| h.pmf))
                .collect::<Result<Vec<_>>>()?;
            Ok(ReprMatrix::new(kind, features, Vec::new()))
        }
        ReprKind::Acf => {
            let lags = cfg.resolved_lags(interval)?;
            let reps = slices.par_iter().map(|s| acf_rep(s, &lags)).collect::<Result<Vec<_>>>()?;
            let degenerate = reps.iter().enumerate().filter(|(_, r)| r.degenerate).map(|(m, _)| m).collect();
            Ok(ReprMatrix::new(kind, reps.into_iter().map(|r| r.rho).collect(), degenerate))
        }
        ReprKind::Psd => {
            let fs = T::lit(cfg.resolved_fs(interval));
            let features = slices
                .par_iter()
                .map_init(FftPlanner::new, |planner, s| {
                    psd::psd_with_planner(s, fs, &cfg.welch, planner)
                        .map(|p| if cfg.psd_normalize { unit_mass(&p.power) } else { p.power })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ReprMatrix::new(kind, features, Vec::new()))
        }
    }
}
