//! End-to-end runs: configuration, stage orchestration with a
//! content-addressed cache, and cross-run comparison tables.

mod cache;
mod compare;
mod config;
mod run;
mod stages;

pub use cache::{content_key, stage_key, StageCache};
pub use compare::{compare_runs, AgreementRow, CompareTables, CorrelationRow, StatsRow};
pub use config::{
    has_errors, validate_config, DataSource, Finding, GruOverrides, Method, RunConfig, Severity, SweepConfig,
    LARGE_TRACE_FLOWS,
};
pub use run::{run_label, run_pipeline, Manifest, RunOptions, RunOutcome, Seeds, StageRecord, MANIFEST_FILE, REPORT_FILE};
pub use stages::{
    evaluate_models, load_models, load_source, model_file, save_models, write_json, write_per_flow_csv, Evaluation,
    Prepared,
};
