use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::cluster::Partition;
use crate::dataset::{
    extract_flows, load_tm_series, normalize, split, FlowSet, ScaleParams, SplitConfig, SplitRanges, TmSeries,
};
use crate::error::{Error, Result};
use crate::eval::{
    ari, cluster_stats, nmi, rmse_flows, EvalReport, ForecastSetup, PartitionSummary, Units, NMI_NORMALIZATION,
};
use crate::predict::{load_model, predict_flows, cluster_windows, save_model, ClusterModel, GruConfig, Profile, TrainReport};
use crate::synth::generate;

use super::config::DataSource;

/// Loads or generates the trace. Generated traces come with their planted
/// partition.
pub fn load_source(src: &DataSource) -> Result<(TmSeries<f64>, Option<Partition>)> {
    match (src, src.synth_spec()) {
        (_, Some(spec)) => {
            let (tm, truth) = generate(&spec)?;
            Ok((tm, Some(truth)))
        }
        (DataSource::File { path, format, .. }, None) => Ok((load_tm_series(path, *format, &src.load_options())?, None)),
        (_, None) => unreachable!("non-file sources are synthetic"),
    }
}

/// A trace split into flows, with scaling fitted on the training region.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub trace: TmSeries<f64>,
    pub flows: FlowSet<f64>,
    pub splits: SplitRanges,
    pub scale: ScaleParams<f64>,
    pub normalized: FlowSet<f64>,
    pub window_length: usize,
}

impl Prepared {
    pub fn new(trace: TmSeries<f64>, cfg: &SplitConfig) -> Result<Self> {
        let flows = extract_flows(&trace);
        let splits = split(&flows, cfg)?;
        let scale = ScaleParams::fit(&flows, splits.fit_region())?;
        let normalized = normalize(&flows, &scale)?;
        Ok(Self { trace, flows, splits, scale, normalized, window_length: cfg.window_length })
    }

    pub fn setup<'a>(&'a self, gru: &'a GruConfig) -> ForecastSetup<'a, f64> {
        ForecastSetup { normalized: &self.normalized, splits: &self.splits, window_length: self.window_length, gru }
    }

    /// Observation indices that receive a prediction.
    pub fn test_targets(&self) -> std::ops::Range<usize> {
        self.splits.test.start + self.window_length - 1..self.splits.test.end
    }

    fn target_timestamps(&self) -> Option<Vec<i64>> {
        self.trace.timestamps().map(|ts| ts[self.test_targets()].to_vec())
    }

    /// Flow-major series to a matrix sequence at the test targets.
    pub fn to_test_tm(&self, flows: Vec<Vec<f64>>) -> Result<TmSeries<f64>> {
        FlowSet::new(self.flows.n_nodes(), self.flows.interval_seconds(), flows)?.reassemble(self.target_timestamps())
    }
}

pub fn model_file(dir: &Path, cluster: usize) -> PathBuf {
    dir.join(format!("cluster_{cluster:04}.gru"))
}

/// Writes one model file per cluster plus `train_reports.json`.
pub fn save_models(dir: &Path, models: &[ClusterModel<f64>], profile: Profile) -> Result<()> {
    fs::create_dir_all(dir)?;
    for cm in models {
        save_model(&model_file(dir, cm.cluster), cm, profile)?;
    }
    let reports: Vec<(usize, &TrainReport)> = models.iter().map(|m| (m.cluster, &m.report)).collect();
    fs::write(dir.join("train_reports.json"), serde_json::to_string_pretty(&reports)? + "\n")?;
    Ok(())
}

pub fn load_models(dir: &Path) -> Result<Vec<ClusterModel<f64>>> {
    let reports: Vec<(usize, TrainReport)> = serde_json::from_slice(&fs::read(dir.join("train_reports.json"))?)?;
    reports
        .into_iter()
        .map(|(cluster, report)| {
            let cm = load_model(&model_file(dir, cluster), report)?;
            if cm.cluster != cluster {
                return Err(Error::Validation(format!("model file for cluster {cluster} names cluster {}", cm.cluster)));
            }
            Ok(cm)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    /// Predicted matrices at the test targets, in trace units.
    pub predicted: TmSeries<f64>,
    pub truth: TmSeries<f64>,
}

fn per_flow(truth: &[Vec<f64>], pred: &[Vec<f64>], factor: f64) -> Vec<f64> {
    truth
        .iter()
        .zip(pred)
        .map(|(t, p)| {
            let sse: f64 = t.iter().zip(p).map(|(a, b)| ((a - b) * factor).powi(2)).sum();
            (sse / t.len() as f64).sqrt()
        })
        .collect()
}

/// Scores trained models on the test range.
pub fn evaluate_models(
    prep: &Prepared,
    partition: &Partition,
    models: &[ClusterModel<f64>],
    units: Units,
    ground_truth: Option<&Partition>,
    config: serde_json::Value,
) -> Result<Evaluation> {
    let test = cluster_windows(partition, &prep.normalized, prep.splits.test.clone(), prep.window_length)?;
    let pred_norm = predict_flows(models, partition, &test)?;
    let targets = prep.test_targets();
    let truth_norm: Vec<Vec<f64>> = prep.normalized.flows().iter().map(|f| f[targets.clone()].to_vec()).collect();
    let truth_raw: Vec<Vec<f64>> = prep.flows.flows().iter().map(|f| f[targets.clone()].to_vec()).collect();
    let pred_raw: Vec<Vec<f64>> = pred_norm
        .iter()
        .enumerate()
        .map(|(m, f)| f.iter().map(|&y| prep.scale.unscale_value(m, y)).collect())
        .collect();

    let factor = units.to_mbps(prep.trace.interval_seconds()).ok();
    let rmse_physical = factor.map(|c| rmse_flows(&truth_raw, &pred_raw).map(|r| r * c)).transpose()?;
    let (ari_vs_truth, nmi_vs_truth) = match ground_truth {
        Some(gt) => (Some(ari(partition, gt)?), Some(nmi(partition, gt)?)),
        None => (None, None),
    };
    let report = EvalReport {
        rmse_normalized: rmse_flows(&truth_norm, &pred_norm)?,
        rmse_physical,
        units,
        test_steps: targets.len(),
        per_flow_rmse: per_flow(&truth_norm, &pred_norm, 1.0),
        per_flow_rmse_mbps: factor.map(|c| per_flow(&truth_raw, &pred_raw, c)),
        partition: PartitionSummary {
            method: partition.method(),
            k: partition.k(),
            seed: partition.seed(),
            stats: cluster_stats(partition),
            ari_vs_truth,
            nmi_vs_truth,
        },
        nmi_normalization: NMI_NORMALIZATION.into(),
        config,
    };
    Ok(Evaluation { report, predicted: prep.to_test_tm(pred_raw)?, truth: prep.to_test_tm(truth_raw)? })
}

pub fn write_per_flow_csv<W: Write>(report: &EvalReport, n_nodes: usize, mut out: W) -> Result<()> {
    writeln!(out, "flow,src,dst,rmse_normalized,rmse_mbps")?;
    for (m, r) in report.per_flow_rmse.iter().enumerate() {
        let mbps = report.per_flow_rmse_mbps.as_ref().map_or(String::new(), |v| v[m].to_string());
        writeln!(out, "{m},{},{},{r},{mbps}", m / n_nodes, m % n_nodes)?;
    }
    Ok(())
}

pub fn write_json<V: serde::Serialize>(path: &Path, value: &V) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
