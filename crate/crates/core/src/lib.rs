//! Clustering-based traffic matrix prediction.
//!
//! Flows are extracted from a traffic-matrix trace, mapped to a feature
//! representation (value histogram, autocorrelation profile or Welch power
//! spectrum), grouped by hierarchical agglomerative clustering (or a random
//! baseline partition), and forecast one step ahead by one gated recurrent
//! model per cluster. The [`eval`] module carries the metrics used to compare
//! partitions and predictions.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the pipeline uses.

pub mod cluster;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod predict;
pub mod repr;
pub mod scalar;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type TmSeries64 = dataset::TmSeries<f64>;
pub type FlowSet64 = dataset::FlowSet<f64>;
pub type ScaleParams64 = dataset::ScaleParams<f64>;
pub type WindowedDataset64 = dataset::WindowedDataset<f64>;
pub type DissimilarityMatrix64 = repr::DissimilarityMatrix<f64>;
pub type ReprMatrix64 = repr::ReprMatrix<f64>;
pub type Dendrogram64 = cluster::Dendrogram<f64>;
pub type GruModel64 = predict::GruModel<f64>;

pub type TmSeries32 = dataset::TmSeries<f32>;
pub type FlowSet32 = dataset::FlowSet<f32>;
pub type GruModel32 = predict::GruModel<f32>;
