use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::cache::{content_key, stage_key, StageCache};
use super::config::{has_errors, validate_config, DataSource, Finding, RunConfig};
use super::stages::{evaluate_models, load_source, save_models, write_json, write_per_flow_csv, Prepared};
use crate::cluster::{cut, hac, naive_partition, Dendrogram, Partition};
use crate::dataset::save_canonical_csv;
use crate::error::{Error, Result};
use crate::eval::{k_sweep, EvalReport, Grouping, Knee, SweepCurve};
use crate::predict::{train_partitioned, ClusterModel};
use crate::repr::{pairwise_dissimilarity, represent, ReprMatrix};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "eval_report.json";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Reuse cached stage outputs whose inputs are unchanged.
    pub resume: bool,
    /// Worker threads; all cores when absent.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    pub reused: bool,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub predictor: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub naive: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<u64>,
}

/// Written to every run directory. Its `config` reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub seeds: Seeds,
    pub workers: usize,
    pub selected_k: usize,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub report: EvalReport,
    pub k: usize,
    pub knee: Option<Knee>,
    pub sweep: Option<SweepCurve>,
    pub findings: Vec<Finding>,
}

struct Recorder {
    stages: Vec<StageRecord>,
    artifacts: Vec<String>,
}

impl Recorder {
    fn time<V>(
        &mut self,
        name: &'static str,
        key: Option<&str>,
        f: impl FnOnce() -> Result<(V, bool)>,
    ) -> Result<V> {
        let started = Instant::now();
        let (v, reused) = f().map_err(|e| e.in_stage(name))?;
        self.stages.push(StageRecord {
            name: name.into(),
            key: key.map(str::to_string),
            reused,
            wall_time_seconds: started.elapsed().as_secs_f64(),
        });
        Ok(v)
    }

    fn artifact(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        PathBuf::from(name)
    }
}

fn cached<V: Serialize + serde::de::DeserializeOwned>(
    cache: &StageCache,
    stage: &str,
    key: &str,
    compute: impl FnOnce() -> Result<V>,
) -> Result<(V, bool)> {
    if let Some(v) = cache.get(stage, key)? {
        return Ok((v, true));
    }
    let v = compute()?;
    cache.put(stage, key, &v)?;
    Ok((v, false))
}

fn json_bytes<V: Serialize>(v: &V) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec(v)?)
}

/// Runs ingest → extract → normalize → represent → cluster → train →
/// predict → evaluate and writes every intermediate artifact into the
/// output directory, plus `manifest.json`. With a sweep configured, K is
/// the knee of the sweep curve.
pub fn run_pipeline(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let findings = validate_config(cfg);
    if has_errors(&findings) {
        let msgs: Vec<String> = findings.iter().map(ToString::to_string).collect();
        return Err(Error::Config(msgs.join("; ")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(cfg, opts, findings, pool.current_num_threads()))
}

fn run_in_pool(cfg: &RunConfig, opts: &RunOptions, findings: Vec<Finding>, workers: usize) -> Result<RunOutcome> {
    let started = Instant::now();
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let cache = StageCache::new(dir.join("cache"), opts.resume);
    let mut rec = Recorder { stages: Vec::new(), artifacts: Vec::new() };
    let gru = cfg.gru_config();

    let source_key = match (&cfg.data, cfg.data.synth_spec()) {
        (_, Some(spec)) => stage_key("ingest", &[&json_bytes(&spec)?]),
        (DataSource::File { path, .. }, None) => {
            stage_key("ingest", &[&json_bytes(&cfg.data)?, content_key(path)?.as_bytes()])
        }
        (_, None) => unreachable!("non-file sources are synthetic"),
    };
    let (trace, planted) = rec.time("ingest", Some(&source_key), || Ok((load_source(&cfg.data)?, false)))?;
    save_canonical_csv(&trace, &dir.join(rec.artifact("trace.csv")))?;
    let ground_truth = match (&cfg.ground_truth, planted) {
        (Some(path), _) => Some(Partition::load(path)?),
        (None, planted) => planted,
    };
    if let Some(gt) = &ground_truth {
        gt.save(&dir.join(rec.artifact("ground_truth.json")))?;
    }

    let prep = rec.time("normalize", None, || Ok((Prepared::new(trace, &cfg.split)?, false)))?;
    write_json(&dir.join(rec.artifact("splits.json")), &prep.splits)?;
    write_json(&dir.join(rec.artifact("scale.json")), &prep.scale)?;
    let m = prep.flows.n_flows();
    let split_bytes = json_bytes(&cfg.split)?;

    // Representation and dendrogram (representation methods only).
    let mut dendrogram: Option<Dendrogram<f64>> = None;
    let mut upstream = stage_key("naive", &[source_key.as_bytes(), &json_bytes(&cfg.naive_seed)?]);
    if let Some(kind) = cfg.representation.repr_kind() {
        let repr_key = stage_key("represent", &[source_key.as_bytes(), &split_bytes, &json_bytes(&cfg.repr)?, kind.to_string().as_bytes()]);
        let reps: ReprMatrix<f64> = rec.time("represent", Some(&repr_key), || {
            cached(&cache, "represent", &repr_key, || represent(&prep.normalized, prep.splits.train.clone(), kind, &cfg.repr))
        })?;
        reps.write_csv(BufWriter::new(fs::File::create(dir.join(rec.artifact("features.csv")))?))?;
        let meta = cfg.repr.metadata(kind, prep.flows.interval_seconds(), &prep.splits.train)?;
        write_json(&dir.join(rec.artifact("features_meta.json")), &serde_json::json!({"settings": meta, "degenerate_flows": reps.degenerate}))?;

        let metric = cfg.metric().expect("representation methods have a metric");
        let linkage = cfg.linkage().expect("representation methods have a linkage");
        let d = rec.time("dissimilarity", None, || Ok((pairwise_dissimilarity(&reps, metric)?, false)))?;
        d.write_csv(BufWriter::new(fs::File::create(dir.join(rec.artifact("dissimilarity.csv")))?))?;
        let cluster_key = stage_key("cluster", &[repr_key.as_bytes(), &json_bytes(&metric)?, &json_bytes(&linkage)?]);
        let dendro = rec.time("cluster", Some(&cluster_key), || cached(&cache, "cluster", &cluster_key, || hac(&d, linkage)))?;
        dendro.write_csv(BufWriter::new(fs::File::create(dir.join(rec.artifact("dendrogram.csv")))?))?;
        dendrogram = Some(dendro);
        upstream = cluster_key;
    }

    // Choice of K.
    let setup = prep.setup(&gru);
    let (k, knee, sweep) = match (&cfg.sweep, cfg.k) {
        (Some(sw), _) => {
            let sweep_key = stage_key("sweep", &[upstream.as_bytes(), &split_bytes, &json_bytes(sw)?, &json_bytes(&gru)?]);
            let curve: SweepCurve = rec.time("sweep", Some(&sweep_key), || {
                cached(&cache, "sweep", &sweep_key, || {
                    let grouping = match &dendrogram {
                        Some(d) => Grouping::Hac(d),
                        None => Grouping::Naive { seed: cfg.naive_seed.expect("validated") },
                    };
                    k_sweep(&setup, grouping, &sw.k_grid, sw.repetitions)
                })
            })?;
            curve.write_csv(BufWriter::new(fs::File::create(dir.join(rec.artifact("sweep.csv")))?))?;
            let knee = curve.knee()?;
            write_json(&dir.join(rec.artifact("knee.json")), &knee)?;
            (knee.k, Some(knee), Some(curve))
        }
        (None, Some(k)) => (k, None, None),
        (None, None) => unreachable!("validated"),
    };
    if k > m {
        return Err(Error::Config(format!("k = {k} exceeds the {m} flows of the trace")));
    }

    let partition = match &dendrogram {
        Some(d) => cut(d, k)?,
        None => naive_partition(m, k, cfg.naive_seed.expect("validated"))?,
    };
    partition.save(&dir.join(rec.artifact("partition.json")))?;

    let train_key = stage_key("train", &[source_key.as_bytes(), &split_bytes, &json_bytes(&partition)?, &json_bytes(&gru)?]);
    let models: Vec<ClusterModel<f64>> = rec.time("train", Some(&train_key), || {
        cached(&cache, "train", &train_key, || {
            train_partitioned(&partition, &prep.normalized, &gru, &prep.splits, prep.window_length)
        })
    })?;
    save_models(&dir.join(rec.artifact("models")), &models, cfg.profile)?;

    let eval = rec.time("evaluate", None, || {
        Ok((evaluate_models(&prep, &partition, &models, cfg.units, ground_truth.as_ref(), cfg.echo()?)?, false))
    })?;
    save_canonical_csv(&eval.predicted, &dir.join(rec.artifact("predictions.csv")))?;
    write_per_flow_csv(&eval.report, prep.flows.n_nodes(), fs::File::create(dir.join(rec.artifact("per_flow_rmse.csv")))?)?;
    write_json(&dir.join(rec.artifact(REPORT_FILE)), &eval.report)?;

    let manifest = Manifest {
        tool: "tmcf".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        seeds: Seeds {
            predictor: cfg.seed,
            naive: cfg.naive_seed,
            synth: cfg.data.synth_spec().map(|s| s.seed),
        },
        workers,
        selected_k: k,
        stages: rec.stages,
        artifacts: rec.artifacts,
        warnings: findings.iter().map(ToString::to_string).collect(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(RunOutcome { dir, report: eval.report, k, knee, sweep, findings })
}

/// Label used for a run in cross-method tables.
pub fn run_label(manifest: &Manifest) -> String {
    format!("{}_k{}", manifest.config.representation, manifest.selected_k)
}
