use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tmcf::cluster::{cut, hac, naive_partition, Linkage, Partition};
use tmcf::dataset::{load_tm_series, save_canonical_csv, LoadOptions, SplitConfig, TmSeries, TraceFormat};
use tmcf::eval::{k_sweep, Grouping, Units};
use tmcf::pipeline::{
    compare_runs, evaluate_models, has_errors, load_models, run_pipeline, save_models, validate_config, write_json,
    write_per_flow_csv, Method, Prepared, RunConfig, RunOptions, SweepConfig,
};
use tmcf::predict::{train_partitioned, GruConfig, Profile};
use tmcf::repr::{pairwise_dissimilarity, represent, DissimilarityMatrix, Metric, ReprConfig, ReprKind};
use tmcf::synth::{generate, Preset, SynthSpec};
use tmcf::ErrorKind;

/// Clustering-based traffic matrix prediction experiments.
#[derive(Parser)]
#[command(name = "tmcf", version)]
struct Cli {
    /// Worker threads for parallel stages (all cores when unset).
    #[arg(long, global = true, env = "TMCF_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trace with planted flow groups.
    Synth(SynthArgs),
    /// Convert a raw trace to the canonical CSV layout.
    Ingest(IngestArgs),
    /// Compute flow features and their pairwise dissimilarities.
    Represent(RepresentArgs),
    /// Cluster a dissimilarity matrix, or draw a random partition.
    Cluster(ClusterArgs),
    /// Train one forecaster per cluster.
    Train(TrainArgs),
    /// Score trained forecasters on the test range.
    Evaluate(EvaluateArgs),
    /// Test RMSE across a grid of cluster counts, with knee selection.
    Sweep(SweepArgs),
    /// Run the whole pipeline from a JSON config.
    Run(RunArgs),
    /// Cross-run agreement, error-correlation and cluster-size tables.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Built-in preset: two-group-periodic or two-group-mixed-shape.
    #[arg(long, default_value = "two-group-periodic", conflicts_with = "spec")]
    preset: Preset,
    /// JSON generator spec instead of a preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output trace CSV.
    #[arg(long)]
    out: PathBuf,
    /// Output planted partition JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    /// Trace file (or directory for abilene/geant).
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value = "csv")]
    format: TraceFormat,
    #[arg(long)]
    interval_seconds: Option<u32>,
    /// Treat missing matrix entries as zero instead of failing.
    #[arg(long)]
    zero_fill: bool,
}

impl TraceArgs {
    fn load(&self) -> Result<TmSeries<f64>> {
        let opts = LoadOptions { interval_seconds: self.interval_seconds, zero_fill_missing: self.zero_fill };
        load_tm_series(&self.trace, self.format, &opts).with_context(|| format!("loading {}", self.trace.display()))
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: TraceArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RepresentArgs {
    #[command(flatten)]
    input: TraceArgs,
    #[arg(long)]
    representation: ReprKind,
    /// Defaults to jsd for histograms, euclidean otherwise.
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long)]
    bins: Option<usize>,
    /// Keep raw spectral densities instead of scaling each to unit mass.
    #[arg(long)]
    no_psd_normalize: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// Dissimilarity CSV written by `represent`.
    #[arg(long, required_unless_present = "n_flows")]
    dissimilarity: Option<PathBuf>,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
    #[arg(long, default_value = "average")]
    linkage: Linkage,
    /// `hac` or `naive`.
    #[arg(long, default_value = "hac")]
    method: String,
    /// Flow count for a naive partition without a dissimilarity file.
    #[arg(long)]
    n_flows: Option<usize>,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dendrogram: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct GruArgs {
    #[arg(long, default_value = "desk")]
    profile: Profile,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl GruArgs {
    fn config(&self) -> GruConfig {
        let mut c = GruConfig::for_profile(self.profile, self.seed);
        c.hidden_size = self.hidden_size.unwrap_or(c.hidden_size);
        c.epochs = self.epochs.unwrap_or(c.epochs);
        c
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: TraceArgs,
    #[arg(long)]
    partition: PathBuf,
    #[command(flatten)]
    gru: GruArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: TraceArgs,
    #[arg(long)]
    partition: PathBuf,
    /// Directory written by `train`.
    #[arg(long)]
    models: PathBuf,
    #[arg(long, default_value = "bytes_per_interval")]
    units: Units,
    /// Reference partition to score against.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: TraceArgs,
    /// histogram, acf, psd or naive.
    #[arg(long)]
    representation: Method,
    /// Comma-separated cluster counts.
    #[arg(long, value_delimiter = ',', required = true)]
    k_grid: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    naive_seed: u64,
    #[command(flatten)]
    gru: GruArgs,
    /// Output curve CSV.
    #[arg(long)]
    out: PathBuf,
    /// Output knee JSON.
    #[arg(long)]
    knee: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Run config JSON (a run's manifest.json also works).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    representation: Option<Method>,
    #[arg(long, conflicts_with = "k_grid")]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<usize>>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    naive_seed: Option<u64>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    units: Option<Units>,
    /// Reuse cached stage outputs from an earlier run in the same directory.
    #[arg(long)]
    resume: bool,
    /// Only validate the config and print findings.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Run directories written by `run`.
    #[arg(required = true, num_args = 2..)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn apply_overrides(cfg: &mut RunConfig, a: &RunArgs) {
    if let Some(d) = &a.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(r) = a.representation {
        cfg.representation = r;
    }
    if let Some(k) = a.k {
        cfg.k = Some(k);
        cfg.sweep = None;
    }
    if let Some(grid) = &a.k_grid {
        let repetitions = cfg.sweep.as_ref().map_or(1, |s| s.repetitions);
        cfg.sweep = Some(SweepConfig { k_grid: grid.clone(), repetitions });
        cfg.k = None;
    }
    if let (Some(r), Some(s)) = (a.repetitions, cfg.sweep.as_mut()) {
        s.repetitions = r;
    }
    if let Some(p) = a.profile {
        cfg.profile = p;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.naive_seed {
        cfg.naive_seed = Some(s);
    }
    if let Some(h) = a.hidden_size {
        cfg.gru.hidden_size = Some(h);
    }
    if let Some(e) = a.epochs {
        cfg.gru.epochs = Some(e);
    }
    if let Some(u) = a.units {
        cfg.units = u;
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(path) => {
            let mut s: SynthSpec = serde_json::from_str(&fs::read_to_string(path)?)
                .map_err(|e| tmcf::Error::Config(format!("{}: {e}", path.display())))?;
            s.seed = a.seed;
            s
        }
        None => a.preset.spec(a.seed),
    };
    let (tm, truth) = generate::<f64>(&spec)?;
    save_canonical_csv(&tm, &a.out)?;
    if let Some(p) = &a.truth {
        truth.save(p)?;
    }
    println!("wrote {} steps of {} flows to {}", tm.len(), tm.n_flows(), a.out.display());
    Ok(())
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let tm = a.input.load()?;
    save_canonical_csv(&tm, &a.out)?;
    println!("{} steps, {} nodes, {} s interval", tm.len(), tm.n_nodes(), tm.interval_seconds());
    Ok(())
}

fn cmd_represent(a: &RepresentArgs) -> Result<()> {
    let prep = Prepared::new(a.input.load()?, &SplitConfig::default())?;
    let mut cfg = ReprConfig { psd_normalize: !a.no_psd_normalize, ..ReprConfig::default() };
    if let Some(b) = a.bins {
        cfg.bins = b;
    }
    let metric = a.metric.unwrap_or(a.representation.default_metric());
    let reps = represent(&prep.normalized, prep.splits.train.clone(), a.representation, &cfg)?;
    let d = pairwise_dissimilarity(&reps, metric)?;
    fs::create_dir_all(&a.out_dir)?;
    reps.write_csv(BufWriter::new(fs::File::create(a.out_dir.join("features.csv"))?))?;
    d.write_csv(BufWriter::new(fs::File::create(a.out_dir.join("dissimilarity.csv"))?))?;
    let meta = cfg.metadata(a.representation, prep.flows.interval_seconds(), &prep.splits.train)?;
    write_json(&a.out_dir.join("features_meta.json"), &serde_json::json!({"settings": meta, "degenerate_flows": reps.degenerate}))?;
    println!("{} features for {} flows in {}", a.representation, reps.n_flows(), a.out_dir.display());
    Ok(())
}

fn cmd_cluster(a: &ClusterArgs) -> Result<()> {
    let d = a
        .dissimilarity
        .as_ref()
        .map(|path| -> Result<DissimilarityMatrix<f64>> {
            let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Ok(DissimilarityMatrix::read_csv(std::io::BufReader::new(file), a.metric, &path.display().to_string())?)
        })
        .transpose()?;
    let partition = match a.method.as_str() {
        "naive" => {
            let seed = a.seed.ok_or_else(|| tmcf::Error::Config("--method naive requires --seed".into()))?;
            let m = a.n_flows.or(d.as_ref().map(DissimilarityMatrix::len)).expect("clap requires one");
            naive_partition(m, a.k, seed)?
        }
        "hac" => {
            let d = d.ok_or_else(|| tmcf::Error::Config("hac needs --dissimilarity".into()))?;
            let dendro = hac(&d, a.linkage)?;
            if let Some(p) = &a.dendrogram {
                dendro.write_csv(BufWriter::new(fs::File::create(p)?))?;
            }
            cut(&dendro, a.k)?
        }
        other => return Err(tmcf::Error::Config(format!("unknown clustering method `{other}`")).into()),
    };
    partition.save(&a.out)?;
    println!("k = {} over {} flows, sizes {:?}", partition.k(), partition.n_items(), partition.sizes());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let prep = Prepared::new(a.input.load()?, &SplitConfig::default())?;
    let partition = Partition::load(&a.partition)?;
    let models = train_partitioned(&partition, &prep.normalized, &a.gru.config(), &prep.splits, prep.window_length)?;
    save_models(&a.out_dir, &models, a.gru.profile)?;
    let epochs: usize = models.iter().map(|m| m.report.epochs_run).sum();
    println!("trained {} models ({epochs} epochs total) into {}", models.len(), a.out_dir.display());
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let prep = Prepared::new(a.input.load()?, &SplitConfig::default())?;
    let partition = Partition::load(&a.partition)?;
    let models = load_models(&a.models)?;
    let truth = a.truth.as_deref().map(Partition::load).transpose()?;
    let echo = serde_json::json!({
        "trace": a.input.trace, "format": a.input.format, "partition": a.partition, "models": a.models,
    });
    let eval = evaluate_models(&prep, &partition, &models, a.units, truth.as_ref(), echo)?;
    fs::create_dir_all(&a.out_dir)?;
    write_json(&a.out_dir.join("eval_report.json"), &eval.report)?;
    write_per_flow_csv(&eval.report, prep.flows.n_nodes(), fs::File::create(a.out_dir.join("per_flow_rmse.csv"))?)?;
    save_canonical_csv(&eval.predicted, &a.out_dir.join("predictions.csv"))?;
    match eval.report.rmse_physical {
        Some(p) => println!("rmse {:.6} (normalized), {p:.6} Mbps", eval.report.rmse_normalized),
        None => println!("rmse {:.6} (normalized)", eval.report.rmse_normalized),
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let prep = Prepared::new(a.input.load()?, &SplitConfig::default())?;
    let gru = a.gru.config();
    let setup = prep.setup(&gru);
    let dendro = match a.representation.repr_kind() {
        Some(kind) => {
            let reps = represent(&prep.normalized, prep.splits.train.clone(), kind, &ReprConfig::default())?;
            Some(hac(&pairwise_dissimilarity(&reps, kind.default_metric())?, Linkage::for_repr(kind))?)
        }
        None => None,
    };
    let grouping = match &dendro {
        Some(d) => Grouping::Hac(d),
        None => Grouping::Naive { seed: a.naive_seed },
    };
    let curve = k_sweep(&setup, grouping, &a.k_grid, a.repetitions)?;
    curve.write_csv(BufWriter::new(fs::File::create(&a.out)?))?;
    if curve.k_values.len() >= 3 {
        let knee = curve.knee()?;
        if let Some(p) = &a.knee {
            write_json(p, &knee)?;
        }
        let tag = if knee.found { "knee" } else { "no knee; lowest RMSE" };
        println!("{tag} at K = {}", knee.k);
    }
    Ok(())
}

fn cmd_run(a: &RunArgs, workers: Option<usize>) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config).with_context(|| format!("loading {}", a.config.display()))?;
    apply_overrides(&mut cfg, a);
    let findings = validate_config(&cfg);
    if a.check {
        for f in &findings {
            eprintln!("{f}");
        }
        if has_errors(&findings) {
            bail!(tmcf::Error::Config("config has errors".into()));
        }
        println!("config ok");
        return Ok(());
    }
    if !has_errors(&findings) {
        for f in &findings {
            eprintln!("{f}");
        }
    }
    let out = run_pipeline(&cfg, &RunOptions { resume: a.resume, workers })?;
    if let Some(knee) = &out.knee {
        println!("selected K = {} ({})", knee.k, if knee.found { "knee" } else { "no knee; lowest RMSE" });
    }
    let r = &out.report;
    print!("k = {}, rmse {:.6} (normalized)", out.k, r.rmse_normalized);
    if let Some(p) = r.rmse_physical {
        print!(", {p:.6} Mbps");
    }
    if let Some(ari) = r.partition.ari_vs_truth {
        print!(", ARI vs truth {ari:.4}");
    }
    println!("\nrun directory: {}", out.dir.display());
    Ok(())
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let tables = compare_runs(&a.runs)?;
    tables.write(&a.out_dir)?;
    println!("wrote comparison tables to {}", a.out_dir.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Represent(a) => cmd_represent(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Run(a) => cmd_run(a, cli.workers),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<tmcf::Error>() {
            return match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
