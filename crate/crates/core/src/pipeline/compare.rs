use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{Manifest, MANIFEST_FILE, REPORT_FILE};
use crate::cluster::Partition;
use crate::error::{Error, Result};
use crate::eval::{ari, cluster_stats, error_correlation, nmi, ClusterStats, EvalReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub a: String,
    pub b: String,
    pub k_a: usize,
    pub k_b: usize,
    pub ari: f64,
    pub nmi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub a: String,
    pub b: String,
    /// Absent when either error vector is constant.
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub run: String,
    pub stats: ClusterStats,
    pub rmse_normalized: f64,
    pub rmse_physical: Option<f64>,
}

/// Cross-run tables: pairwise partition agreement, correlation of per-flow
/// test errors, and cluster-size statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareTables {
    pub agreement: Vec<AgreementRow>,
    pub error_correlation: Vec<CorrelationRow>,
    pub cluster_stats: Vec<StatsRow>,
}

struct LoadedRun {
    label: String,
    partition: Partition,
    report: EvalReport,
}

fn load_run(dir: &Path) -> Result<LoadedRun> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    let report: EvalReport = serde_json::from_slice(&fs::read(dir.join(REPORT_FILE))?)?;
    let partition = Partition::load(&dir.join("partition.json"))?;
    Ok(LoadedRun { label: super::run::run_label(&manifest), partition, report })
}

pub fn compare_runs(dirs: &[PathBuf]) -> Result<CompareTables> {
    if dirs.len() < 2 {
        return Err(Error::InvalidArgument("compare needs at least two run directories".into()));
    }
    let mut runs = dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>>>()?;
    // Disambiguate repeated labels by position.
    for i in 0..runs.len() {
        if runs.iter().filter(|r| r.label == runs[i].label).count() > 1 {
            runs[i].label = format!("{}#{}", runs[i].label, i + 1);
        }
    }
    let mut tables = CompareTables { agreement: Vec::new(), error_correlation: Vec::new(), cluster_stats: Vec::new() };
    for (i, a) in runs.iter().enumerate() {
        tables.cluster_stats.push(StatsRow {
            run: a.label.clone(),
            stats: cluster_stats(&a.partition),
            rmse_normalized: a.report.rmse_normalized,
            rmse_physical: a.report.rmse_physical,
        });
        for b in &runs[i + 1..] {
            tables.agreement.push(AgreementRow {
                a: a.label.clone(),
                b: b.label.clone(),
                k_a: a.partition.k(),
                k_b: b.partition.k(),
                ari: ari(&a.partition, &b.partition)?,
                nmi: nmi(&a.partition, &b.partition)?,
            });
            tables.error_correlation.push(CorrelationRow {
                a: a.label.clone(),
                b: b.label.clone(),
                pearson: error_correlation(&a.report.per_flow_rmse, &b.report.per_flow_rmse)?,
            });
        }
    }
    Ok(tables)
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

impl CompareTables {
    /// Writes `agreement.csv`, `error_correlation.csv` and
    /// `cluster_stats.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut f = fs::File::create(dir.join("agreement.csv"))?;
        writeln!(f, "a,b,k_a,k_b,matched_k,ari,nmi")?;
        for r in &self.agreement {
            writeln!(f, "{},{},{},{},{},{},{}", r.a, r.b, r.k_a, r.k_b, r.k_a == r.k_b, r.ari, r.nmi)?;
        }
        let mut f = fs::File::create(dir.join("error_correlation.csv"))?;
        writeln!(f, "a,b,pearson")?;
        for r in &self.error_correlation {
            writeln!(f, "{},{},{}", r.a, r.b, opt(r.pearson))?;
        }
        let mut f = fs::File::create(dir.join("cluster_stats.csv"))?;
        writeln!(f, "run,k,min_size,mean_size,max_size,n_singletons,singleton_pct,rmse_normalized,rmse_mbps")?;
        for r in &self.cluster_stats {
            let s = &r.stats;
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{}",
                r.run,
                s.k,
                s.min_size,
                s.mean_size,
                s.max_size,
                s.n_singletons,
                s.singleton_pct,
                r.rmse_normalized,
                opt(r.rmse_physical)
            )?;
        }
        Ok(())
    }
}
