//! Prediction error metrics, partition agreement, cluster statistics, K
//! sweeps and knee selection.

mod agreement;
mod kneedle;
mod metrics;
mod sweep;

use serde::{Deserialize, Serialize};

pub use agreement::{ari, cluster_stats, nmi, ClusterStats, NMI_NORMALIZATION};
pub use kneedle::{kneedle, Knee, KNEEDLE_SENSITIVITY};
pub use metrics::{
    error_correlation, per_flow_rmse, rmse, rmse_flows, rmse_physical, rmse_slices, Units,
};
pub use sweep::{k_sweep, ForecastOutcome, ForecastSetup, Grouping, SweepCurve};

use crate::cluster::PartitionMethod;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub method: PartitionMethod,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub stats: ClusterStats,
    /// Agreement with planted labels, when the trace has them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari_vs_truth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmi_vs_truth: Option<f64>,
}

/// Test-set scores of one pipeline run. Contains nothing time- or
/// location-dependent, so equal inputs give byte-identical JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse_normalized: f64,
    /// In Mbps; absent when trace units are unknown.
    pub rmse_physical: Option<f64>,
    pub units: Units,
    pub test_steps: usize,
    /// RMSE per flow on normalized data; the pooled RMSE is the root mean
    /// of their squares.
    pub per_flow_rmse: Vec<f64>,
    pub per_flow_rmse_mbps: Option<Vec<f64>>,
    pub partition: PartitionSummary,
    pub nmi_normalization: String,
    pub config: serde_json::Value,
}
