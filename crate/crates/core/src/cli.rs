//! Command-line front end. `main.rs` only calls [`run`].

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::datagen::{load_manifest, read_labels, read_view, save_dataset, synth_multiview, LatentSpec, MultiViewDataset, Preset, RandomSpec};
use crate::error::{Error, Result};
use crate::experiment::{
    ablate, benchmark_train_config, casestudy, default_seeds, linear_bench, perturb_sweep, rows_to_csv, CaseStudyConfig,
    DataSource, ExperimentResult, LinearConfig, LinearMethod, MetricRow, DEFAULT_ROUNDS, DEFAULT_STAGES,
};
use crate::metrics::evaluate;
use crate::neural::{train_coper, tune, TrainConfig, Variant};
use crate::perturb::{mean_gaps, SweepKind};

const EXIT_CODES: &str = "\
Exit codes:
   0  success
   2  invalid command-line usage
  10  invalid shape          11  matrix not symmetric   12  eigensolver failure
  13  matrix not PSD         14  singular covariance    15  singular scatter
  20  invalid dataset spec   21  views not aligned      22  parse error
  30  invalid labels         31  invalid parameter      32  invalid permutation plan
  40  invalid state          41  invalid configuration  42  training diverged
  50  i/o error              51  json error

Environment:
  COPER_THREADS  caps the number of worker threads used across seeds";

#[derive(Debug, Parser)]
#[command(name = "coper", version, about = "Within-cluster permutation CCA for multi-view clustering", after_help = EXIT_CODES)]
pub struct Cli {
    /// Seed for single-run commands (gen, train).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Seeds for multi-seed commands: `0..10`, `0..=9` or `1,4,7`.
    #[arg(long, global = true, value_parser = parse_seeds)]
    pub seeds: Option<Seeds>,
    /// Print JSON instead of a table.
    #[arg(long, global = true)]
    pub json: bool,
    /// Directory for output files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Include wall-clock runtimes in reports (makes them non-reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

fn parse_seeds(s: &str) -> std::result::Result<Seeds, String> {
    let bad = || format!("cannot parse seeds {s:?}; use 0..10, 0..=9 or 1,2,3");
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..=b).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<std::result::Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(Seeds(seeds))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (manifest, one CSV per view, labels).
    Gen(GenArgs),
    /// k-means on raw, PCA, CCA and permuted-CCA embeddings.
    LinearBench(LinearBenchArgs),
    /// Plain CCA followed by pseudo-label re-pairing stages.
    Casestudy(CasestudyArgs),
    /// Eigenvalue drift of LDA under label noise or partial labels.
    PerturbSweep(PerturbArgs),
    /// Train the end-to-end model once.
    Train(TrainArgs),
    /// Pick the training configuration with the best mean silhouette.
    Tune(TuneArgs),
    /// Train each model variant on every seed.
    Ablate(AblateArgs),
    /// Score predicted labels against true labels.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset manifest written by `gen`.
    #[arg(long, conflicts_with = "preset")]
    pub data: Option<PathBuf>,
    /// Shipped dataset, regenerated for each seed: three-cluster or split-digits.
    #[arg(long)]
    pub preset: Option<String>,
    /// Samples per generated preset dataset.
    #[arg(long)]
    pub n: Option<usize>,
}

impl DataArgs {
    fn source(&self, default: Preset) -> Result<(DataSource, Option<usize>)> {
        if let Some(path) = &self.data {
            let (ds, manifest) = load_manifest(path)?;
            return Ok((DataSource::Fixed(ds), Some(manifest.k)));
        }
        let preset = match &self.preset {
            Some(name) => Preset::parse(name)?,
            None => default,
        };
        let n_samples = self.n.unwrap_or(preset.default_samples());
        Ok((DataSource::Preset { preset, n_samples }, None))
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Write a shipped preset instead of a spec built from the flags below.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 600)]
    pub n: usize,
    /// Comma-separated view dimensions.
    #[arg(long, value_delimiter = ',', default_value = "10,10")]
    pub views: Vec<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub nuisance_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LinearArgs {
    /// Cluster count (defaults to the labels or manifest).
    #[arg(long)]
    pub k: Option<usize>,
    /// Embedding dimension (defaults to K - 1).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub top_count: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Skip the cross-view agreement filter.
    #[arg(long)]
    pub no_agreement: bool,
}

impl LinearArgs {
    fn config(&self, manifest_k: Option<usize>, rounds: usize) -> LinearConfig {
        let d = LinearConfig::default();
        LinearConfig {
            k: self.k.or(manifest_k),
            dim: self.dim,
            rounds,
            ridge: self.ridge.unwrap_or(d.ridge),
            lambda: self.lambda.unwrap_or(d.lambda),
            top_count: self.top_count,
            agreement: !self.no_agreement,
        }
    }
}

#[derive(Debug, Args)]
pub struct LinearBenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub linear: LinearArgs,
    /// Stacked permutation rounds for cca-perm.
    #[arg(long, default_value_t = DEFAULT_ROUNDS)]
    pub rounds: usize,
    /// Comma-separated subset of raw,pca,cca,cca-perm.
    #[arg(long, value_delimiter = ',', default_value = "raw,pca,cca,cca-perm")]
    pub methods: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CasestudyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub linear: LinearArgs,
    /// Re-pairing stages after plain CCA; 0 reproduces linear-bench cca.
    #[arg(long, alias = "stages", default_value_t = DEFAULT_STAGES)]
    pub rounds: usize,
    /// Re-pair with the true labels.
    #[arg(long)]
    pub supervised: bool,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// label-noise or subset.
    #[arg(long, default_value = "label-noise")]
    pub kind: String,
    /// Comma-separated levels (defaults: 0,0.1,0.2,0.3 for label-noise and
    /// 0.2,0.4,0.6,0.8,1 for subset).
    #[arg(long = "noise-grid", value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// View used as the single-view data.
    #[arg(long, default_value_t = 0)]
    pub view: usize,
    #[arg(long, default_value_t = crate::cca::DEFAULT_RIDGE)]
    pub ridge: f64,
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    /// JSON file mirroring the training configuration fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the epoch count and rescales the loss schedule.
    #[arg(long)]
    pub epochs: Option<usize>,
}

impl TrainFlags {
    fn config(&self, k: usize) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => read_train_config(p)?,
            None => benchmark_train_config(),
        };
        cfg.k = k;
        if let Some(e) = self.epochs {
            cfg = cfg.with_epochs(e);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Overlays a JSON object onto the benchmark configuration. Setting
/// `epochs` without `ce_start`/`perm_start` rescales the schedule.
fn read_train_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |e: String| Error::Config(format!("{}: {e}", path.display()));
    let overlay: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let mut base = benchmark_train_config();
    if let Some(epochs) = overlay.get("epochs").and_then(|v| v.as_u64()) {
        base = base.with_epochs(epochs as usize);
    }
    let serde_json::Value::Object(mut merged) = serde_json::to_value(&base)? else {
        unreachable!("TrainConfig serializes to an object")
    };
    merged.extend(overlay);
    serde_json::from_value(serde_json::Value::Object(merged)).map_err(|e| bad(e.to_string()))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long, default_value = "full")]
    pub variant: String,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated candidate configuration files.
    #[arg(long, value_delimiter = ',', required = true)]
    pub configs: Vec<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Comma-separated variants.
    #[arg(long, value_delimiter = ',', default_value = "full,linear-encoder,no-corr,no-perm,no-agreement")]
    pub variants: Vec<String>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Predicted labels, one per line.
    #[arg(long)]
    pub pred: PathBuf,
    /// True labels, one per line.
    #[arg(long)]
    pub truth: PathBuf,
    /// Optional embedding (features × samples CSV) for the silhouette.
    #[arg(long)]
    pub embedding: Option<PathBuf>,
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("COPER_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("COPER_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

pub fn execute(cli: &Cli) -> Result<()> {
    let seeds = cli.seeds.clone().map(|s| s.0).unwrap_or_else(default_seeds);
    let out = Output { cli };
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, cli.seed, &out),
        Command::LinearBench(a) => {
            let (source, k) = a.data.source(Preset::SplitDigits)?;
            let methods = a.methods.iter().map(|m| LinearMethod::parse(m)).collect::<Result<Vec<_>>>()?;
            warn_unlabelled(&source);
            let result = linear_bench(&source, &methods, &a.linear.config(k, a.rounds), &seeds)?;
            out.result(&result)
        }
        Command::Casestudy(a) => {
            let (source, k) = a.data.source(Preset::SplitDigits)?;
            let cs = CaseStudyConfig {
                stages: a.rounds,
                supervised: a.supervised,
            };
            warn_unlabelled(&source);
            let report = casestudy(&source, &a.linear.config(k, DEFAULT_ROUNDS), &cs, &seeds)?;
            out.file("eigen_alignment.csv", &rows_to_csv(&report.stages.iter().map(StageCsv::from).collect::<Vec<_>>())?)?;
            out.result(&report.result)
        }
        Command::PerturbSweep(a) => cmd_perturb(a, &seeds, &out),
        Command::Train(a) => cmd_train(a, cli.seed, &out),
        Command::Tune(a) => cmd_tune(a, &seeds, &out),
        Command::Ablate(a) => {
            let (source, k) = a.data.source(Preset::ThreeCluster)?;
            let k = resolve_k(&source, k)?;
            let variants = a.variants.iter().map(|v| Variant::parse(v)).collect::<Result<Vec<_>>>()?;
            let result = ablate(&source, &a.train.config(k)?, &variants, &seeds)?;
            out.result(&result)
        }
        Command::Metrics(a) => cmd_metrics(a, &out),
    }
}

/// Writes reports into `--out` and prints to stdout.
struct Output<'a> {
    cli: &'a Cli,
}

impl Output<'_> {
    fn file(&self, name: &str, contents: &str) -> Result<()> {
        if let Some(dir) = &self.cli.out {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let p = dir.join(name);
            fs::write(&p, contents).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    fn result(&self, result: &ExperimentResult) -> Result<()> {
        let result = if self.cli.timing { result.clone() } else { result.clone().without_timing() };
        self.file("report.json", &result.to_json()?)?;
        self.file("report.csv", &result.to_csv()?)?;
        if self.cli.json {
            print!("{}", result.to_json()?);
        } else {
            print!("{}", result.to_table());
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T, table: impl FnOnce() -> String) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.file(name, &text)?;
        if self.cli.json {
            print!("{text}");
        } else {
            print!("{}", table());
        }
        Ok(())
    }
}

fn warn_unlabelled(source: &DataSource) {
    if let DataSource::Fixed(ds) = source {
        if ds.labels.is_none() {
            eprintln!("warning: dataset has no labels; acc, ari and nmi are omitted");
        }
    }
}

fn resolve_k(source: &DataSource, manifest_k: Option<usize>) -> Result<usize> {
    if let Some(k) = manifest_k {
        return Ok(k);
    }
    let ds = source.dataset(0)?;
    ds.labels
        .as_ref()
        .map(|l| l.k())
        .ok_or_else(|| Error::InvalidParameter("the number of clusters is unknown".into()))
}

fn cmd_gen(a: &GenArgs, seed: u64, out: &Output) -> Result<()> {
    let (ds, k): (MultiViewDataset, usize) = match &a.preset {
        Some(name) => {
            let ds = Preset::parse(name)?.generate(a.n, seed)?;
            let k = ds.labels.as_ref().map_or(a.k, |l| l.k());
            (ds, k)
        }
        None => {
            let d = RandomSpec::default();
            let spec = RandomSpec {
                k: a.k,
                view_dims: a.views.clone(),
                noise: a.noise.unwrap_or(d.noise),
                separation: a.separation.unwrap_or(d.separation),
                nuisance_scale: a.nuisance_scale.unwrap_or(d.nuisance_scale),
                ..d
            };
            (synth_multiview(&LatentSpec::random(&spec, seed)?, a.n, seed)?, a.k)
        }
    };
    let dir = out.cli.out.clone().unwrap_or_else(|| PathBuf::from("data"));
    let manifest = save_dataset(&ds, &dir, k)?;
    let summary = GenSummary {
        manifest: manifest.display().to_string(),
        n_samples: ds.n_samples(),
        dims: ds.dims(),
        k,
        counts: ds.labels.as_ref().map(|l| l.counts()),
    };
    if out.cli.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!("wrote {} ({} samples, views {:?}, k = {k})", summary.manifest, summary.n_samples, summary.dims);
    }
    Ok(())
}

#[derive(Serialize)]
struct GenSummary {
    manifest: String,
    n_samples: usize,
    dims: Vec<usize>,
    k: usize,
    counts: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct StageCsv {
    seed: u64,
    stage: usize,
    repaired: usize,
    acc: Option<f64>,
    ari: Option<f64>,
    nmi: Option<f64>,
    eigen_gap: Option<f64>,
}

impl From<&crate::experiment::StageRow> for StageCsv {
    fn from(r: &crate::experiment::StageRow) -> Self {
        StageCsv {
            seed: r.seed,
            stage: r.stage,
            repaired: r.repaired,
            acc: r.acc,
            ari: r.ari,
            nmi: r.nmi,
            eigen_gap: r.eigen_gap,
        }
    }
}

fn cmd_perturb(a: &PerturbArgs, seeds: &[u64], out: &Output) -> Result<()> {
    let kind = match a.kind.as_str() {
        "label-noise" => SweepKind::LabelNoise,
        "subset" => SweepKind::Subset,
        other => return Err(Error::Config(format!("unknown sweep kind {other:?}; valid kinds: label-noise, subset"))),
    };
    let levels = a.levels.clone().unwrap_or_else(|| match kind {
        SweepKind::LabelNoise => vec![0.0, 0.1, 0.2, 0.3],
        SweepKind::Subset => vec![0.2, 0.4, 0.6, 0.8, 1.0],
    });
    let (source, _) = a.data.source(Preset::SplitDigits)?;
    let rows = perturb_sweep(&source, a.view, kind, &levels, seeds, a.ridge)?;
    out.file("sweep.csv", &rows_to_csv(&rows)?)?;
    let gaps = mean_gaps(&rows, &levels);
    let summary: Vec<LevelSummary> = levels
        .iter()
        .zip(&gaps)
        .map(|(&level, &mean_gap)| {
            let mine: Vec<_> = rows.iter().filter(|r| r.level == level).collect();
            LevelSummary {
                level,
                mean_gap,
                mean_bound: mine.iter().map(|r| r.bound).sum::<f64>() / mine.len().max(1) as f64,
                bound_satisfied: mine.iter().filter(|r| r.bound_satisfied).count(),
                seeds: mine.len(),
            }
        })
        .collect();
    out.json("sweep.json", &serde_json::json!({ "kind": kind, "levels": summary, "rows": rows }), || {
        let mut t = format!("perturb-sweep ({})\n{:>6} {:>12} {:>12} {:>10}\n", kind.name(), "level", "mean_gap", "mean_bound", "bound_ok");
        for s in &summary {
            t += &format!("{:>6} {:>12.6} {:>12.6} {:>7}/{}\n", s.level, s.mean_gap, s.mean_bound, s.bound_satisfied, s.seeds);
        }
        t
    })
}

#[derive(Serialize)]
struct LevelSummary {
    level: f64,
    mean_gap: f64,
    mean_bound: f64,
    bound_satisfied: usize,
    seeds: usize,
}

fn cmd_train(a: &TrainArgs, seed: u64, out: &Output) -> Result<()> {
    let (source, k) = a.data.source(Preset::ThreeCluster)?;
    let ds = source.dataset(seed)?;
    let k = match k {
        Some(k) => k,
        None => resolve_k(&DataSource::Fixed(ds.clone().into_owned()), None)?,
    };
    let cfg = a.train.config(k)?.with_variant(Variant::parse(&a.variant)?).with_seed(seed);
    let outcome = train_coper(&ds, &cfg)?;
    let fused = outcome.model.fused(&ds)?;
    let row = metric_row(a.variant.clone(), seed, &outcome.assignment, ds.labels.as_ref(), &fused)?;
    out.file("checkpoint.json", &outcome.model.to_json()?)?;
    out.file("log.csv", &outcome.log.to_csv()?)?;
    let labels: String = outcome.assignment.labels().iter().map(|l| format!("{l}\n")).collect();
    out.file("predictions.csv", &format!("label\n{labels}"))?;
    let result = ExperimentResult::new("train", serde_json::to_value(&cfg)?, vec![row]);
    out.result(&result)
}

fn metric_row(
    method: String,
    seed: u64,
    pred: &crate::metrics::ClusterAssignment,
    truth: Option<&crate::metrics::ClusterAssignment>,
    embedding: &crate::linalg::Matrix,
) -> Result<MetricRow> {
    let m = match truth {
        Some(t) => Some(evaluate(pred, t, None)?),
        None => None,
    };
    Ok(MetricRow {
        method,
        seed,
        acc: m.map(|m| m.acc),
        ari: m.map(|m| m.ari),
        nmi: m.map(|m| m.nmi),
        silhouette: crate::metrics::silhouette(embedding, pred).ok(),
        runtime_s: None,
    })
}

fn cmd_tune(a: &TuneArgs, seeds: &[u64], out: &Output) -> Result<()> {
    let (source, k) = a.data.source(Preset::ThreeCluster)?;
    let ds = source.dataset(0)?;
    let k = match k {
        Some(k) => k,
        None => resolve_k(&source, None)?,
    };
    let candidates = a
        .configs
        .iter()
        .map(|p| {
            let mut cfg = read_train_config(p)?;
            cfg.k = k;
            if let Some(e) = a.epochs {
                cfg = cfg.with_epochs(e);
            }
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = tune(&ds, &candidates, seeds)?;
    out.file("tune.csv", &rows_to_csv(&report.rows)?)?;
    out.json("tune.json", &report, || {
        let mut t = String::from("tune\ncandidate  mean_silhouette\n");
        for (i, (p, s)) in a.configs.iter().zip(&report.mean_silhouette).enumerate() {
            let mark = if i == report.best { "  <- best" } else { "" };
            t += &format!("{:<10} {:.6}  {}{mark}\n", i, s, p.display());
        }
        t
    })
}

fn cmd_metrics(a: &MetricsArgs, out: &Output) -> Result<()> {
    let pred = read_labels(&a.pred, None)?;
    let truth = read_labels(&a.truth, None)?;
    let k = pred.k().max(truth.k());
    let pred = pred.relabel(&(0..k).collect::<Vec<_>>())?;
    let truth = truth.relabel(&(0..k).collect::<Vec<_>>())?;
    let embedding = a.embedding.as_deref().map(read_view).transpose()?;
    let report = evaluate(&pred, &truth, embedding.as_ref())?;
    out.json("metrics.json", &report, || {
        let mut t = format!("acc {:.6}\nari {:.6}\nnmi {:.6}\n", report.acc, report.ari, report.nmi);
        if let Some(s) = report.silhouette {
            t += &format!("silhouette {s:.6}\n");
        }
        t
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..3").unwrap().0, vec![0, 1, 2]);
        assert_eq!(parse_seeds("2..=4").unwrap().0, vec![2, 3, 4]);
        assert_eq!(parse_seeds("5, 1,9").unwrap().0, vec![5, 1, 9]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("a,b").is_err());
    }

    #[test]
    fn command_line_parses() {
        Cli::command_for_test();
        let cli = Cli::try_parse_from(["coper", "gen", "--k", "3", "--n", "600", "--views", "10,10", "--seed", "7"]).unwrap();
        assert_eq!(cli.seed, 7);
        match cli.command {
            Command::Gen(g) => assert_eq!(g.views, vec![10, 10]),
            _ => panic!("expected gen"),
        }
    }

    impl Cli {
        fn command_for_test() {
            use clap::CommandFactory;
            Cli::command().debug_assert();
        }
    }
}
