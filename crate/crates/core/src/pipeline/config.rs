use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::Linkage;
use crate::dataset::{LoadOptions, SplitConfig, TraceFormat, DEFAULT_WINDOW_LENGTH};
use crate::error::{Error, Result};
use crate::eval::Units;
use crate::predict::{GruConfig, Profile};
use crate::repr::{Metric, ReprConfig, ReprKind};
use crate::synth::{Preset, SynthSpec};

/// Where the trace comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    File {
        path: PathBuf,
        #[serde(default = "default_format")]
        format: TraceFormat,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval_seconds: Option<u32>,
        #[serde(default)]
        zero_fill_missing: bool,
    },
    /// Generated trace; its planted labels serve as ground truth.
    Synth(SynthSpec),
    /// A named generator setting.
    Preset { preset: Preset, seed: u64 },
}

fn default_format() -> TraceFormat {
    TraceFormat::Csv
}

impl DataSource {
    pub fn load_options(&self) -> LoadOptions {
        match self {
            DataSource::File { interval_seconds, zero_fill_missing, .. } => {
                LoadOptions { interval_seconds: *interval_seconds, zero_fill_missing: *zero_fill_missing }
            }
            DataSource::Synth(_) | DataSource::Preset { .. } => LoadOptions::default(),
        }
    }

    /// Generator settings for synthetic sources.
    pub fn synth_spec(&self) -> Option<SynthSpec> {
        match self {
            DataSource::File { .. } => None,
            DataSource::Synth(spec) => Some(spec.clone()),
            DataSource::Preset { preset, seed } => Some(preset.spec(*seed)),
        }
    }
}

/// Flow grouping used by a run: one of the representations, or the random
/// baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Histogram,
    Acf,
    Psd,
    Naive,
}

impl Method {
    pub fn repr_kind(self) -> Option<ReprKind> {
        match self {
            Method::Histogram => Some(ReprKind::Histogram),
            Method::Acf => Some(ReprKind::Acf),
            Method::Psd => Some(ReprKind::Psd),
            Method::Naive => None,
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(Method::Naive),
            other => Ok(match other.parse::<ReprKind>()? {
                ReprKind::Histogram => Method::Histogram,
                ReprKind::Acf => Method::Acf,
                ReprKind::Psd => Method::Psd,
            }),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.repr_kind() {
            Some(kind) => kind.fmt(f),
            None => f.write_str("naive"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k_grid: Vec<usize>,
    #[serde(default = "one")]
    pub repetitions: usize,
}

fn one() -> usize {
    1
}

/// Per-field overrides applied on top of the chosen profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GruOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_delta: Option<f64>,
}

impl GruOverrides {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    pub representation: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linkage: Option<Linkage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    #[serde(default, skip_serializing_if = "GruOverrides::is_empty")]
    pub gru: GruOverrides,
    /// Predictor seed.
    #[serde(default)]
    pub seed: u64,
    /// Seed of the random baseline partition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub naive_seed: Option<u64>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub repr: ReprConfig,
    #[serde(default)]
    pub units: Units,
    /// Reference labels to score the partition against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    pub output_dir: PathBuf,
}

fn default_profile() -> Profile {
    Profile::Desk
}

impl RunConfig {
    /// Reads a config file, or the config embedded in a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let bad = |e: serde_json::Error| Error::Config(format!("{}: {e}", path.display()));
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
        if value.get("tool").and_then(|t| t.as_str()) == Some("tmcf") {
            value = value["config"].take();
        }
        serde_json::from_value(value).map_err(bad)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn metric(&self) -> Option<Metric> {
        self.metric.or_else(|| self.representation.repr_kind().map(ReprKind::default_metric))
    }

    pub fn linkage(&self) -> Option<Linkage> {
        self.linkage.or_else(|| self.representation.repr_kind().map(Linkage::for_repr))
    }

    pub fn gru_config(&self) -> GruConfig {
        let mut c = GruConfig::for_profile(self.profile, self.seed);
        let o = &self.gru;
        c.hidden_size = o.hidden_size.unwrap_or(c.hidden_size);
        c.learning_rate = o.learning_rate.unwrap_or(c.learning_rate);
        c.epochs = o.epochs.unwrap_or(c.epochs);
        c.batch_size = o.batch_size.unwrap_or(c.batch_size);
        c.patience = o.patience.unwrap_or(c.patience);
        c.min_delta = o.min_delta.unwrap_or(c.min_delta);
        c
    }

    /// The config as echoed into reports: everything except where the run
    /// was written.
    pub fn echo(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Flow count above which the `Paper` profile is flagged as slow.
pub const LARGE_TRACE_FLOWS: usize = 100;

/// Consistency checks on a run configuration. An empty list means the
/// config is valid; warnings do not block a run.
pub fn validate_config(cfg: &RunConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut error = |m: String| out.push(Finding { severity: Severity::Error, message: m });

    let n_flows = match &cfg.data {
        DataSource::File { path, .. } => {
            if !path.exists() {
                error(format!("dataset path {} does not exist", path.display()));
            }
            None
        }
        DataSource::Synth(_) | DataSource::Preset { .. } => {
            let spec = cfg.data.synth_spec().expect("synthetic source");
            if let Err(e) = spec.validate() {
                error(format!("synthetic spec: {e}"));
            }
            Some(spec.n_nodes * spec.n_nodes)
        }
    };
    if let Some(gt) = &cfg.ground_truth {
        if !gt.exists() {
            error(format!("ground-truth partition {} does not exist", gt.display()));
        }
    }
    match cfg.representation.repr_kind() {
        Some(kind) => {
            if let Some(metric) = cfg.metric {
                if !metric.compatible_with(kind) {
                    error(format!("metric {metric} cannot be used with the {kind} representation"));
                }
            }
        }
        None => {
            if cfg.naive_seed.is_none() {
                error("the naive method requires naive_seed".into());
            }
            if cfg.metric.is_some() || cfg.linkage.is_some() {
                error("metric and linkage do not apply to the naive method".into());
            }
        }
    }
    match (cfg.k, &cfg.sweep) {
        (None, None) => error("set either k or sweep".into()),
        (Some(_), Some(_)) => error("k and sweep are mutually exclusive".into()),
        (Some(0), None) => error("k must be at least 1".into()),
        (Some(k), None) => {
            if let Some(m) = n_flows.filter(|&m| k > m) {
                error(format!("k = {k} exceeds the {m} flows of the trace"));
            }
        }
        (None, Some(s)) => {
            if s.repetitions == 0 {
                error("sweep repetitions must be at least 1".into());
            }
            if s.k_grid.len() < 3 {
                error("sweep grid needs at least three K values for knee selection".into());
            }
            if s.k_grid.first() == Some(&0) || s.k_grid.windows(2).any(|w| w[1] <= w[0]) {
                error("sweep grid must be strictly increasing positive integers".into());
            }
            if let (Some(m), Some(&last)) = (n_flows, s.k_grid.last()) {
                if last > m {
                    error(format!("sweep grid reaches {last}, beyond the {m} flows of the trace"));
                }
            }
        }
    }
    let split = &cfg.split;
    if !(split.train_frac > 0.0 && split.train_frac < 1.0) || !(split.val_frac > 0.0 && split.val_frac < 1.0) {
        error("split fractions must lie strictly between 0 and 1".into());
    }
    if split.window_length < 2 {
        error(format!("window length {} is below 2", split.window_length));
    }
    if let Err(e) = cfg.gru_config().validate() {
        error(e.to_string());
    }
    if cfg.repr.bins == 0 {
        error("histogram bin count must be positive".into());
    }

    let mut warn = |m: String| out.push(Finding { severity: Severity::Warning, message: m });
    let desk = GruConfig::desk(0);
    if cfg.profile == Profile::Desk {
        if let Some(h) = cfg.gru.hidden_size.filter(|&h| h > desk.hidden_size) {
            warn(format!("desk profile with hidden_size {h} will not run at desk scale"));
        }
    }
    if cfg.profile == Profile::Paper && n_flows.is_none_or(|m| m >= LARGE_TRACE_FLOWS) {
        warn("profile `paper` on a large trace can take hours".into());
    }
    if split.window_length != DEFAULT_WINDOW_LENGTH {
        warn(format!("window length {} differs from the usual {DEFAULT_WINDOW_LENGTH}", split.window_length));
    }
    out
}

pub fn has_errors(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Error)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig {
            data: DataSource::Synth(SynthSpec::two_group_periodic(1)),
            representation: Method::Acf,
            metric: None,
            linkage: None,
            k: Some(2),
            sweep: None,
            profile: Profile::Desk,
            gru: GruOverrides::default(),
            seed: 0,
            naive_seed: None,
            split: SplitConfig::default(),
            repr: ReprConfig::default(),
            units: Units::default(),
            ground_truth: None,
            output_dir: "out".into(),
        }
    }

    #[test]
    fn valid_config_has_no_findings() {
        assert!(validate_config(&base()).is_empty());
    }

    #[test]
    fn jsd_with_acf_is_an_error() {
        let cfg = RunConfig { metric: Some(Metric::Jsd), ..base() };
        assert!(has_errors(&validate_config(&cfg)));
    }

    #[test]
    fn naive_needs_seed() {
        let cfg = RunConfig { representation: Method::Naive, ..base() };
        assert!(has_errors(&validate_config(&cfg)));
        let cfg = RunConfig { naive_seed: Some(3), ..cfg };
        assert!(validate_config(&cfg).is_empty());
    }

    #[test]
    fn desk_with_large_hidden_warns() {
        let cfg = RunConfig { gru: GruOverrides { hidden_size: Some(200), ..Default::default() }, ..base() };
        let f = validate_config(&cfg);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].severity, Severity::Warning);
    }

    #[test]
    fn k_and_sweep_rules() {
        assert!(has_errors(&validate_config(&RunConfig { k: None, ..base() })));
        assert!(has_errors(&validate_config(&RunConfig { k: Some(17), ..base() })));
        let sweep = SweepConfig { k_grid: vec![1, 2, 4], repetitions: 2 };
        assert!(validate_config(&RunConfig { k: None, sweep: Some(sweep.clone()), ..base() }).is_empty());
        assert!(has_errors(&validate_config(&RunConfig { sweep: Some(sweep), ..base() })));
    }

    #[test]
    fn missing_path_is_an_error() {
        let cfg = RunConfig {
            data: DataSource::File {
                path: "/nonexistent/trace.csv".into(),
                format: TraceFormat::Csv,
                interval_seconds: None,
                zero_fill_missing: false,
            },
            ..base()
        };
        let f = validate_config(&cfg);
        assert!(has_errors(&f));
        assert!(!f.iter().any(|x| x.severity == Severity::Warning));
    }

    #[test]
    fn json_round_trip_and_echo() {
        let cfg = base();
        let back: RunConfig = serde_json::from_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.echo().unwrap().get("output_dir").is_none());
        let text = r#"{"data":{"source":"file","path":"t.csv"},"representation":"naive","k":3,"naive_seed":1,"output_dir":"o"}"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.profile, Profile::Desk);
        assert_eq!(cfg.gru_config().hidden_size, 16);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus":1}"#).is_err());
    }
}
