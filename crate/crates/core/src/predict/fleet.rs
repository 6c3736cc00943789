use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gru::{GruModel, Tape};
use super::train::{train, GruConfig, TrainReport};
use crate::cluster::Partition;
use crate::dataset::{make_windows, FlowSet, ScaleParams, SplitRanges, TmSeries, WindowedDataset};
use crate::error::{Error, Result};
use crate::Scalar;

/// Trained predictor for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClusterModel<T> {
    /// 1-based cluster label.
    pub cluster: usize,
    /// Member flows in ascending order; model input `j` is flow `flows[j]`.
    pub flows: Vec<usize>,
    pub model: GruModel<T>,
    pub report: TrainReport,
}

/// Seed for cluster `c`'s model, mixed so neighbouring clusters and
/// neighbouring base seeds do not share initializations.
pub fn cluster_seed(seed: u64, cluster: usize) -> u64 {
    let mut z = seed ^ (cluster as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_partition<T: Scalar>(partition: &Partition, flows: &FlowSet<T>) -> Result<()> {
    if partition.n_items() != flows.n_flows() {
        return Err(Error::Shape(format!(
            "partition covers {} flows, trace has {}",
            partition.n_items(),
            flows.n_flows()
        )));
    }
    Ok(())
}

/// Windows of every cluster's flows over `range`, in cluster-label order.
pub fn cluster_windows<T: Scalar>(
    partition: &Partition,
    flows: &FlowSet<T>,
    range: Range<usize>,
    window_length: usize,
) -> Result<Vec<WindowedDataset<T>>> {
    check_partition(partition, flows)?;
    partition
        .clusters()
        .iter()
        .map(|members| make_windows(flows, members, range.clone(), window_length))
        .collect()
}

/// Trains one model per cluster on normalized `flows`. Clusters train in
/// parallel on the current rayon pool; each model trains single-threaded,
/// so results do not depend on the worker count. Output is in label order.
pub fn train_partitioned<T: Scalar>(
    partition: &Partition,
    flows: &FlowSet<T>,
    config: &GruConfig,
    splits: &SplitRanges,
    window_length: usize,
) -> Result<Vec<ClusterModel<T>>> {
    check_partition(partition, flows)?;
    config.validate()?;
    let clusters = partition.clusters();
    // Largest clusters first so long jobs start early; order is restored below.
    let mut jobs: Vec<usize> = (0..clusters.len()).collect();
    jobs.sort_by_key(|&c| std::cmp::Reverse(clusters[c].len()));
    let mut trained = jobs
        .into_par_iter()
        .map(|c| {
            let members = &clusters[c];
            let tr = make_windows(flows, members, splits.train.clone(), window_length)?;
            let va = make_windows(flows, members, splits.val.clone(), window_length)?;
            let cfg = GruConfig { seed: cluster_seed(config.seed, c + 1), ..config.clone() };
            let (model, report) = train(&cfg, &tr, &va)?;
            Ok(ClusterModel { cluster: c + 1, flows: members.clone(), model, report })
        })
        .collect::<Result<Vec<_>>>()?;
    trained.sort_by_key(|m| m.cluster);
    Ok(trained)
}

/// One-step predictions in normalized units, scattered back to flow order:
/// flow `m` of the result holds the predictions for every window of its
/// cluster's dataset. `test[c]` is the dataset of cluster label `c + 1`.
pub fn predict_flows<T: Scalar>(
    models: &[ClusterModel<T>],
    partition: &Partition,
    test: &[WindowedDataset<T>],
) -> Result<Vec<Vec<T>>> {
    if test.len() != partition.k() {
        return Err(Error::Shape(format!("{} test sets for {} clusters", test.len(), partition.k())));
    }
    let steps = test[0].n_samples();
    if test.iter().any(|t| t.n_samples() != steps) {
        return Err(Error::Shape("cluster test sets differ in sample count".into()));
    }
    let clusters = partition.clusters();
    let mut out = vec![vec![T::zero(); steps]; partition.n_items()];
    let mut covered = vec![false; partition.n_items()];
    for (c, members) in clusters.iter().enumerate() {
        let cm = models
            .iter()
            .find(|m| m.cluster == c + 1)
            .ok_or_else(|| Error::InvalidArgument(format!("no model for cluster {}", c + 1)))?;
        if &cm.flows != members {
            return Err(Error::Shape(format!("model for cluster {} was trained on other flows", c + 1)));
        }
        let ds = &test[c];
        if ds.width() != members.len() || cm.model.input_size() != members.len() {
            return Err(Error::Shape(format!("cluster {} has width {}, model expects {}", c + 1, ds.width(), cm.model.input_size())));
        }
        let mut tape = Tape::new(ds.history(), cm.model.hidden_size(), cm.model.output_size());
        for s in 0..steps {
            cm.model.forward_into(ds.input(s), &mut tape);
            for (&m, &y) in members.iter().zip(tape.output()) {
                out[m][s] = y;
            }
        }
        for &m in members {
            covered[m] = true;
        }
    }
    debug_assert!(covered.iter().all(|&c| c));
    Ok(out)
}

/// Predicted traffic matrices over the test windows, in original units.
pub fn predict_tm<T: Scalar>(
    models: &[ClusterModel<T>],
    partition: &Partition,
    test: &[WindowedDataset<T>],
    scale: &ScaleParams<T>,
    n_nodes: usize,
    interval_seconds: u32,
) -> Result<TmSeries<T>> {
    let normalized = predict_flows(models, partition, test)?;
    if scale.n_flows() != normalized.len() {
        return Err(Error::Shape("scale parameters do not match the partition".into()));
    }
    let physical = normalized
        .into_iter()
        .enumerate()
        .map(|(m, f)| f.into_iter().map(|y| scale.unscale_value(m, y)).collect())
        .collect();
    FlowSet::new(n_nodes, interval_seconds, physical)?.reassemble(None)
}
