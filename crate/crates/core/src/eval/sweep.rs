use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kneedle::{kneedle, Knee};
use super::metrics::rmse_flows;
use crate::cluster::{cut, naive_partition, Dendrogram, Partition};
use crate::dataset::{FlowSet, SplitRanges};
use crate::error::{Error, Result};
use crate::predict::{cluster_windows, predict_flows, train_partitioned, ClusterModel, GruConfig};
use crate::Scalar;

/// Normalized flows and training settings shared by every forecast.
#[derive(Debug, Clone, Copy)]
pub struct ForecastSetup<'a, T> {
    pub normalized: &'a FlowSet<T>,
    pub splits: &'a SplitRanges,
    pub window_length: usize,
    pub gru: &'a GruConfig,
}

#[derive(Debug, Clone)]
pub struct ForecastOutcome<T> {
    pub models: Vec<ClusterModel<T>>,
    /// Normalized one-step predictions, `[flow][test step]`.
    pub predictions: Vec<Vec<T>>,
    /// Normalized targets aligned with `predictions`.
    pub truth: Vec<Vec<T>>,
    pub rmse_normalized: T,
    pub wall_time_seconds: f64,
}

impl<T: Scalar> ForecastSetup<'_, T> {
    /// Observation indices predicted on the test range.
    pub fn test_targets(&self) -> std::ops::Range<usize> {
        self.splits.test.start + self.window_length - 1..self.splits.test.end
    }

    /// Trains per-cluster models with predictor seed `seed` and scores them
    /// on the test range.
    pub fn forecast(&self, partition: &Partition, seed: u64) -> Result<ForecastOutcome<T>> {
        let started = Instant::now();
        let gru = GruConfig { seed, ..self.gru.clone() };
        let models = train_partitioned(partition, self.normalized, &gru, self.splits, self.window_length)?;
        let test = cluster_windows(partition, self.normalized, self.splits.test.clone(), self.window_length)?;
        let predictions = predict_flows(&models, partition, &test)?;
        let targets = self.test_targets();
        let truth: Vec<Vec<T>> = self.normalized.flows().iter().map(|f| f[targets.clone()].to_vec()).collect();
        let rmse_normalized = rmse_flows(&truth, &predictions)?;
        Ok(ForecastOutcome {
            models,
            predictions,
            truth,
            rmse_normalized,
            wall_time_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

/// How flows are grouped at each K of a sweep.
#[derive(Debug, Clone, Copy)]
pub enum Grouping<'a, T> {
    /// Cuts of one dendrogram; only the predictor seed varies between
    /// repetitions.
    Hac(&'a Dendrogram<T>),
    /// Random partitions, re-drawn with seed `seed + r` in repetition `r`.
    Naive { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub k_values: Vec<usize>,
    pub mean_rmse: Vec<f64>,
    pub rmse_std: Vec<f64>,
    pub mean_runtime_seconds: Vec<f64>,
    pub repetitions: usize,
    /// `rmse_runs[i][r]`: RMSE at `k_values[i]` in repetition `r`.
    pub rmse_runs: Vec<Vec<f64>>,
}

impl SweepCurve {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,mean_rmse,rmse_std,mean_runtime_s")?;
        for i in 0..self.k_values.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.k_values[i], self.mean_rmse[i], self.rmse_std[i], self.mean_runtime_seconds[i]
            )?;
        }
        Ok(())
    }

    pub fn knee(&self) -> Result<Knee> {
        kneedle(&self.k_values, &self.mean_rmse)
    }

    pub fn rmse_at(&self, k: usize) -> Option<f64> {
        self.k_values.iter().position(|&v| v == k).map(|i| self.mean_rmse[i])
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Normalized test RMSE across a grid of cluster counts. Every
/// `(K, repetition)` job runs independently in parallel; repetition `r`
/// trains with predictor seed `gru.seed + r`.
pub fn k_sweep<T: Scalar>(
    setup: &ForecastSetup<'_, T>,
    grouping: Grouping<'_, T>,
    k_grid: &[usize],
    repetitions: usize,
) -> Result<SweepCurve> {
    let m = setup.normalized.n_flows();
    if repetitions == 0 {
        return Err(Error::InvalidArgument("at least one repetition required".into()));
    }
    if k_grid.is_empty() || k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("K grid must be nonempty and strictly increasing".into()));
    }
    if let Some(&bad) = k_grid.iter().find(|&&k| k == 0 || k > m) {
        return Err(Error::InvalidArgument(format!("K = {bad} outside 1..={m}")));
    }
    let jobs: Vec<(usize, usize)> = (0..k_grid.len()).flat_map(|i| (0..repetitions).map(move |r| (i, r))).collect();
    let results = jobs
        .par_iter()
        .map(|&(i, r)| {
            let k = k_grid[i];
            let partition = match grouping {
                Grouping::Hac(d) => cut(d, k)?,
                Grouping::Naive { seed } => naive_partition(m, k, seed.wrapping_add(r as u64))?,
            };
            let out = setup.forecast(&partition, setup.gru.seed.wrapping_add(r as u64))?;
            Ok((out.rmse_normalized.as_f64(), out.wall_time_seconds))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut curve = SweepCurve {
        k_values: k_grid.to_vec(),
        mean_rmse: Vec::new(),
        rmse_std: Vec::new(),
        mean_runtime_seconds: Vec::new(),
        repetitions,
        rmse_runs: Vec::new(),
    };
    for chunk in results.chunks(repetitions) {
        let rmse: Vec<f64> = chunk.iter().map(|r| r.0).collect();
        let (mean, std) = mean_std(&rmse);
        curve.mean_rmse.push(mean);
        curve.rmse_std.push(std);
        curve.mean_runtime_seconds.push(chunk.iter().map(|r| r.1).sum::<f64>() / repetitions as f64);
        curve.rmse_runs.push(rmse);
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{hac, Linkage};
    use crate::dataset::SplitConfig;
    use crate::repr::{pairwise_dissimilarity, represent, ReprConfig, ReprKind};

    fn flows() -> FlowSet<f64> {
        let f = (0..4)
            .map(|k| (0..240).map(|t| 0.5 + 0.4 * ((t * (k % 2 + 1)) as f64 * 0.5).sin()).collect())
            .collect();
        FlowSet::new(2, 3600, f).unwrap()
    }

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    #[test]
    fn single_k_grid_is_the_whole_matrix_point() {
        let fs = flows();
        let splits = SplitRanges::for_length(fs.len(), &SplitConfig::default()).unwrap();
        let gru = GruConfig { hidden_size: 3, epochs: 2, ..GruConfig::desk(4) };
        let setup = ForecastSetup { normalized: &fs, splits: &splits, window_length: 11, gru: &gru };
        let curve = k_sweep(&setup, Grouping::Naive { seed: 1 }, &[1], 2).unwrap();
        assert_eq!(curve.k_values, vec![1]);
        let em = Partition::new(vec![1; 4], crate::cluster::PartitionMethod::External, None).unwrap();
        let direct = setup.forecast(&em, 4).unwrap().rmse_normalized;
        assert_eq!(curve.rmse_runs[0][0], direct);
    }

    #[test]
    fn hac_sweep_shape_and_csv() {
        let fs = flows();
        let splits = SplitRanges::for_length(fs.len(), &SplitConfig::default()).unwrap();
        let reps = represent(&fs, splits.train.clone(), ReprKind::Acf, &ReprConfig::default()).unwrap();
        let d = pairwise_dissimilarity(&reps, reps.kind.default_metric()).unwrap();
        let dendro = hac(&d, Linkage::Average).unwrap();
        let gru = GruConfig { hidden_size: 3, epochs: 2, ..GruConfig::desk(4) };
        let setup = ForecastSetup { normalized: &fs, splits: &splits, window_length: 11, gru: &gru };
        let curve = k_sweep(&setup, Grouping::Hac(&dendro), &[1, 2, 4], 2).unwrap();
        assert_eq!(curve.mean_rmse.len(), 3);
        assert!(curve.rmse_std.iter().all(|&s| s >= 0.0));
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,mean_rmse,rmse_std,mean_runtime_s\n1,"));
        assert_eq!(text.lines().count(), 4);
        assert!(k_sweep(&setup, Grouping::Hac(&dendro), &[0, 2], 1).is_err());
        assert!(k_sweep(&setup, Grouping::Hac(&dendro), &[2, 1], 1).is_err());
        assert!(k_sweep(&setup, Grouping::Hac(&dendro), &[5], 1).is_err());
    }
}
