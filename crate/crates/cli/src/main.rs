//! Command-line frontend: every pipeline stage (synthetic data, constraint
//! generation, clustering, dual solves, fitness/filter/transform, losses,
//! ARI, experiment grids) as a subcommand. Exit codes: 0 success, 1 domain
//! error, 2 usage error.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use dualclust::clustering::{kmeans_multistart, kmedoids_solve, KMedoidsMode};
use dualclust::dualtools::{
    dec_losses, filter_constraints, fitness_score, impact_scores, SoftAssignment,
};
use dualclust::experiments::{
    adjusted_rand_index, fitness_experiment_with, generate_constraint_sets, generate_synthetic,
    transform_experiment, violated_constraint_sets, ConstraintMode, MetricKind, SizeLaw,
    SyntheticSpec, EXPERIMENT_MAX_ITERATIONS,
};
use dualclust::lagrangian::{subgradient_solve, DualProblem};
use dualclust::metrics::{mahalanobis_from_covariance, pairwise_matrix};
use dualclust::transform::{run_transform, SelectionMode};
use dualclust::types::{validate_constraints, ConstraintSet};
use dualclust::{Dataset, DissimilarityMatrix, DualSolution, LagrangianConfig, Metric, Partition};

const VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// Error plumbing
// ---------------------------------------------------------------------------

struct CliError {
    code: String,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError { code: "invalid-config".into(), message: message.into() }
    }
}

impl From<dualclust::Error> for CliError {
    fn from(e: dualclust::Error) -> Self {
        CliError { code: e.code().into(), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { code: "io".into(), message: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError { code: "json".into(), message: e.to_string() }
    }
}

impl From<toml::de::Error> for CliError {
    fn from(e: toml::de::Error) -> Self {
        CliError { code: "config".into(), message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(name = "dualclust", version, about = "Lagrangian dual information for constrained clustering", max_term_width = 100)]
struct Cli {
    /// TOML file supplying defaults for tuning flags (a flag given on the
    /// command line always wins). Input and output paths are command-line
    /// only.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker-thread cap (fallback: DUALCLUST_THREADS environment variable).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a 200-point, 3-cluster synthetic dataset.
    Synth(SynthArgs),
    /// Draw random constraint sets labeled by ground truth.
    Genconstraints(GenconstraintsArgs),
    /// Solve an unconstrained clustering (k-means or k-medoids).
    Cluster(ClusterArgs),
    /// Maximize the Lagrangian dual of a constrained clustering.
    Dual(DualArgs),
    /// Score how inherently a dual solution satisfied its constraints.
    Fitness(FitnessArgs),
    /// Split constraints into kept/removed by impact rank.
    Filter(FilterArgs),
    /// Move points of violated constraints until all can be satisfied.
    Transform(TransformArgs),
    /// Evaluate soft-assignment clustering and constraint losses.
    Declosses(DeclossesArgs),
    /// Adjusted Rand index of two partitions.
    Ari(AriArgs),
    /// Multi-run experiment harnesses producing plotting-ready CSV.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SynthMetricArg {
    Euclidean,
    Manhattan,
    Chebyshev,
    Mahalanobis,
}

impl SynthMetricArg {
    fn kind(self) -> MetricKind {
        match self {
            SynthMetricArg::Euclidean => MetricKind::Euclidean,
            SynthMetricArg::Manhattan => MetricKind::Manhattan,
            SynthMetricArg::Chebyshev => MetricKind::Chebyshev,
            SynthMetricArg::Mahalanobis => MetricKind::Mahalanobis,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Euclidean,
    SquaredEuclidean,
    Manhattan,
    Chebyshev,
    Cosine,
    /// Inverse-sample-covariance form computed from the dataset.
    Mahalanobis,
}

impl MetricArg {
    fn name(self) -> &'static str {
        match self {
            MetricArg::Euclidean => "euclidean",
            MetricArg::SquaredEuclidean => "squared_euclidean",
            MetricArg::Manhattan => "manhattan",
            MetricArg::Chebyshev => "chebyshev",
            MetricArg::Cosine => "cosine",
            MetricArg::Mahalanobis => "mahalanobis",
        }
    }

    fn build(self, data: &Dataset) -> CliResult<Metric> {
        Ok(match self {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::SquaredEuclidean => Metric::SquaredEuclidean,
            MetricArg::Manhattan => Metric::Manhattan,
            MetricArg::Chebyshev => Metric::Chebyshev,
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Mahalanobis => Metric::Mahalanobis(mahalanobis_from_covariance(data)?),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Mssc,
    Kmedoids,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KmedoidsModeArg {
    Exact,
    Local,
}

impl KmedoidsModeArg {
    fn mode(self) -> KMedoidsMode {
        match self {
            KmedoidsModeArg::Exact => KMedoidsMode::Exact,
            KmedoidsModeArg::Local => KMedoidsMode::LocalSearch,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SelectionArg {
    Dual,
    Random,
}

impl SelectionArg {
    fn mode(self) -> SelectionMode {
        match self {
            SelectionArg::Dual => SelectionMode::DualGuided,
            SelectionArg::Random => SelectionMode::RandomBaseline,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ConstraintModeArg {
    GroundTruth,
    Violated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SizeLawArg {
    Uniform,
    Fixed,
}

#[derive(Args)]
struct SynthArgs {
    /// Geometry of the generated dataset.
    #[arg(long, value_enum)]
    metric: Option<SynthMetricArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output dataset CSV (includes the ground-truth label column).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenconstraintsArgs {
    /// Dataset CSV with a label column.
    #[arg(long)]
    data: PathBuf,
    /// Number of constraint sets (> 1 writes numbered files).
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ConstraintModeArg>,
    #[arg(long, value_enum)]
    size_law: Option<SizeLawArg>,
    /// Constraints per set under the fixed size law.
    #[arg(long)]
    size: Option<usize>,
    /// Reference partition JSON (required for violated mode).
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output constraints JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// Dataset CSV (point-based models, or matrix construction).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Precomputed dissimilarity matrix CSV (k-medoids only).
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Metric for building a matrix from --data (k-medoids).
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    #[arg(long, value_enum)]
    kmedoids_mode: Option<KmedoidsModeArg>,
    /// Output partition JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long)]
    epsilon: Option<f64>,
    /// Wall-clock budget per dual solve, in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    inner_rounds: Option<usize>,
    #[arg(long)]
    incumbent_restarts: Option<usize>,
}

#[derive(Args)]
struct DualArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    k: Option<usize>,
    /// Constraints JSON ({"must_link": [[i,j],...], "cannot_link": ...}).
    #[arg(long)]
    constraints: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Metric for building a matrix from --data (k-medoids).
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Inner minimization mode for the k-medoids model.
    #[arg(long, value_enum)]
    kmedoids_mode: Option<KmedoidsModeArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output dual JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitnessArgs {
    /// Dual solution JSON produced by `dualclust dual`.
    #[arg(long)]
    dual: PathBuf,
    /// Constraints JSON to cross-check against (defaults to the pairs
    /// recorded in the dual itself).
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Zero threshold (default: 1e-6 * (1 + |dual bound|)).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    dual: PathBuf,
    /// Fraction of the harmful constraints to remove, in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Keep constraints whose impact is within tau of zero.
    #[arg(long)]
    keep_zero_impact: bool,
    /// Output JSON for the kept constraints.
    #[arg(long)]
    out: PathBuf,
    /// Optional output JSON for the removed constraints.
    #[arg(long)]
    removed: Option<PathBuf>,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    constraints: PathBuf,
    /// Constraint selection rule.
    #[arg(long, value_enum)]
    mode: Option<SelectionArg>,
    #[arg(long)]
    restarts: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output CSV for the transformed dataset.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DeclossesArgs {
    /// Soft assignment Q (CSV, one row per point).
    #[arg(long)]
    q: PathBuf,
    /// Target distribution P (CSV, same shape as Q).
    #[arg(long)]
    p: PathBuf,
    #[arg(long)]
    constraints: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AriArgs {
    /// First partition JSON.
    #[arg(long)]
    a: PathBuf,
    /// Second partition JSON.
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(subcommand)]
    which: ExperimentCommand,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Metric-identification grid: mean fitness per (dataset, metric).
    Fitness(ExperimentFitnessArgs),
    /// Dual-guided vs random transform comparison over paired runs.
    Transform(ExperimentTransformArgs),
}

#[derive(Args)]
struct ExperimentFitnessArgs {
    #[arg(long)]
    constraint_count: Option<usize>,
    /// Per-set dual solve budget in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Results CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentTransformArgs {
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    constraint_size: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-run summary CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-iteration band CSV.
    #[arg(long)]
    progression: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Config file
// ---------------------------------------------------------------------------

#[derive(Clone, Default, Deserialize)]
#[serde(default)]
struct FileConfig {
    seed: Option<u64>,
    threads: Option<usize>,
    metric: Option<String>,
    model: Option<String>,
    k: Option<usize>,
    restarts: Option<usize>,
    count: Option<usize>,
    size: Option<usize>,
    alpha: Option<f64>,
    tau: Option<f64>,
    mode: Option<String>,
    solver: SolverOverrides,
    fitness: FitnessTable,
    transform: TransformTable,
}

#[derive(Clone, Default, Deserialize, Serialize)]
#[serde(default)]
struct SolverOverrides {
    epsilon: Option<f64>,
    time_limit_seconds: Option<f64>,
    max_iterations: Option<usize>,
    initial_mu: Option<f64>,
    halving_patience: Option<usize>,
    zero_tolerance: Option<f64>,
    inner_rounds: Option<usize>,
    incumbent_restarts: Option<usize>,
}

#[derive(Clone, Default, Deserialize)]
#[serde(default)]
struct FitnessTable {
    dataset_metrics: Option<Vec<String>>,
    dataset_seed: Option<u64>,
    metrics: Option<Vec<String>>,
    constraint_count: Option<usize>,
    time_limit: Option<f64>,
    seed: Option<u64>,
}

#[derive(Clone, Default, Deserialize)]
#[serde(default)]
struct TransformTable {
    dataset_metric: Option<String>,
    dataset_seed: Option<u64>,
    k: Option<usize>,
    constraint_size: Option<usize>,
    runs: Option<usize>,
    modes: Option<Vec<String>>,
    restarts: Option<usize>,
    seed: Option<u64>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Ok(toml::from_str(&text)?)
            }
        }
    }

    /// Solver settings: defaults, overridden by the file, overridden by flags.
    fn solver_config(&self, flags: &SolverArgs) -> LagrangianConfig {
        let mut c = LagrangianConfig::default();
        let o = &self.solver;
        if let Some(v) = o.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = o.time_limit_seconds {
            c.time_limit_seconds = v;
        }
        if let Some(v) = o.max_iterations {
            c.max_iterations = v;
        }
        if let Some(v) = o.initial_mu {
            c.initial_mu = v;
        }
        if let Some(v) = o.halving_patience {
            c.halving_patience = v;
        }
        if let Some(v) = o.zero_tolerance {
            c.zero_tolerance = v;
        }
        if let Some(v) = o.inner_rounds {
            c.inner_rounds = v;
        }
        if let Some(v) = o.incumbent_restarts {
            c.incumbent_restarts = v;
        }
        if let Some(v) = flags.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = flags.time_limit {
            c.time_limit_seconds = v;
        }
        if let Some(v) = flags.max_iterations {
            c.max_iterations = v;
        }
        if let Some(v) = flags.inner_rounds {
            c.inner_rounds = v;
        }
        if let Some(v) = flags.incumbent_restarts {
            c.incumbent_restarts = v;
        }
        c
    }
}

fn parse_metric_kinds(names: Option<&[String]>) -> CliResult<Vec<MetricKind>> {
    match names {
        None => Ok(MetricKind::ALL.to_vec()),
        Some(list) => list
            .iter()
            .map(|n| MetricKind::parse(n).map_err(CliError::from))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Artifact helpers
// ---------------------------------------------------------------------------

/// Wraps a payload object with version and resolved-config fields and writes
/// pretty JSON to `path` (or stdout).
fn write_json_artifact<T: Serialize>(
    path: Option<&Path>,
    payload: &T,
    config: &Value,
) -> CliResult<()> {
    let mut value = serde_json::to_value(payload)?;
    let obj = value
        .as_object_mut()
        .expect("artifact payloads serialize to JSON objects");
    obj.insert("version".into(), Value::String(VERSION.into()));
    obj.insert("config".into(), config.clone());
    let text = serde_json::to_string_pretty(&value)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// `# dualclust <version> config=<compact json>` — the provenance line every
/// CSV artifact starts with.
fn csv_preamble(config: &Value) -> String {
    format!("# dualclust {VERSION} config={config}\n")
}

fn create_with_preamble(path: &Path, config: &Value) -> CliResult<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(csv_preamble(config).as_bytes())?;
    Ok(w)
}

fn load_constraints_inferring_n(path: &Path) -> CliResult<ConstraintSet> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    let mut max = 0usize;
    for key in ["must_link", "cannot_link"] {
        if let Some(pairs) = value.get(key).and_then(Value::as_array) {
            for pair in pairs {
                if let Some(items) = pair.as_array() {
                    for item in items {
                        if let Some(v) = item.as_u64() {
                            max = max.max(v as usize);
                        }
                    }
                }
            }
        }
    }
    Ok(ConstraintSet::from_json_str(&text, max + 2)?)
}

fn constraints_of_dual(dual: &DualSolution) -> CliResult<ConstraintSet> {
    let ml: Vec<(usize, usize)> = dual.must_link.iter().map(|m| (m.i, m.j)).collect();
    let cl: Vec<(usize, usize)> = dual.cannot_link.iter().map(|c| (c.i, c.j)).collect();
    let max = ml
        .iter()
        .chain(cl.iter())
        .map(|&(i, j)| i.max(j))
        .max()
        .unwrap_or(0);
    Ok(validate_constraints(&ml, &cl, max + 2)?)
}

fn default_tau(config: &FileConfig, flag: Option<f64>, dual_bound: f64) -> f64 {
    match flag.or(config.tau) {
        Some(t) => t,
        None => {
            let zero_tolerance = config.solver.zero_tolerance.unwrap_or(1e-6);
            zero_tolerance * (1.0 + dual_bound.abs())
        }
    }
}

fn numbered_path(base: &Path, idx: usize) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("json");
    base.with_file_name(format!("{stem}-{idx:03}.{ext}"))
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code, e.message);
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let threads = cli
        .threads
        .or(file.threads)
        .or_else(|| {
            std::env::var("DUALCLUST_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        });
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::config("threads must be at least 1"));
        }
        // Ignore the error when a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Synth(args) => cmd_synth(args, &file),
        Command::Genconstraints(args) => cmd_genconstraints(args, &file),
        Command::Cluster(args) => cmd_cluster(args, &file),
        Command::Dual(args) => cmd_dual(args, &file),
        Command::Fitness(args) => cmd_fitness(args, &file),
        Command::Filter(args) => cmd_filter(args, &file),
        Command::Transform(args) => cmd_transform(args, &file),
        Command::Declosses(args) => cmd_declosses(args, &file),
        Command::Ari(args) => cmd_ari(args),
        Command::Experiment(args) => match args.which {
            ExperimentCommand::Fitness(a) => cmd_experiment_fitness(a, &file),
            ExperimentCommand::Transform(a) => cmd_experiment_transform(a, &file),
        },
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_synth(args: SynthArgs, file: &FileConfig) -> CliResult<()> {
    let kind = match args.metric {
        Some(m) => m.kind(),
        None => match &file.metric {
            Some(name) => MetricKind::parse(name)?,
            None => return Err(CliError::config("--metric is required (flag or config file)")),
        },
    };
    let seed = args.seed.or(file.seed).unwrap_or(1);
    let config = json!({
        "command": "synth",
        "metric": kind.name(),
        "seed": seed,
    });
    let data: Dataset = generate_synthetic(&SyntheticSpec { metric: kind, seed })?;
    let mut w = create_with_preamble(&args.out, &config)?;
    data.to_csv_writer(&mut w)?;
    w.flush()?;
    println!("wrote {} points to {}", data.n(), args.out.display());
    Ok(())
}

fn cmd_genconstraints(args: GenconstraintsArgs, file: &FileConfig) -> CliResult<()> {
    let data = Dataset::from_csv_path(&args.data)?;
    let labels = data
        .labels()
        .ok_or_else(|| CliError::config("dataset has no label column"))?
        .to_vec();
    let count = args.count.or(file.count).unwrap_or(1);
    let mode = match args.mode {
        Some(ConstraintModeArg::GroundTruth) | None => ConstraintMode::GroundTruthUniform,
        Some(ConstraintModeArg::Violated) => ConstraintMode::ViolatedOnly,
    };
    let size = args.size.or(file.size).unwrap_or(10);
    let size_law = match args.size_law {
        Some(SizeLawArg::Uniform) => SizeLaw::Uniform1To100,
        Some(SizeLawArg::Fixed) | None => SizeLaw::Fixed(size),
    };
    let seed = args.seed.or(file.seed).unwrap_or(1);
    let base_assignment: Option<Vec<usize>> = match (&args.base, mode) {
        (Some(path), _) => Some(Partition::from_json_path(path)?.assignment),
        (None, ConstraintMode::ViolatedOnly) => {
            return Err(CliError::config("violated mode requires --base partition"));
        }
        (None, ConstraintMode::GroundTruthUniform) => None,
    };
    let batch = generate_constraint_sets(
        &labels,
        count,
        size_law,
        mode,
        base_assignment.as_deref(),
        seed,
    )?;
    let config = json!({
        "command": "genconstraints",
        "data": args.data.display().to_string(),
        "count": count,
        "mode": match mode {
            ConstraintMode::GroundTruthUniform => "ground_truth_uniform",
            ConstraintMode::ViolatedOnly => "violated_only",
        },
        "size_law": match size_law {
            SizeLaw::Uniform1To100 => json!("uniform_1_100"),
            SizeLaw::Fixed(m) => json!({"fixed": m}),
        },
        "seed": seed,
    });
    if count == 1 {
        write_json_artifact(Some(&args.out), &batch.sets[0], &config)?;
        println!(
            "wrote 1 constraint set ({} constraints) to {}",
            batch.sets[0].len(),
            args.out.display()
        );
    } else {
        for (idx, set) in batch.sets.iter().enumerate() {
            write_json_artifact(Some(&numbered_path(&args.out, idx)), set, &config)?;
        }
        println!(
            "wrote {count} constraint sets to {}",
            numbered_path(&args.out, 0).with_file_name("...").display()
        );
    }
    Ok(())
}

fn cmd_cluster(args: ClusterArgs, file: &FileConfig) -> CliResult<()> {
    let model = args.model.unwrap_or(match file.model.as_deref() {
        Some("kmedoids") => ModelArg::Kmedoids,
        _ => ModelArg::Mssc,
    });
    let k = args
        .k
        .or(file.k)
        .ok_or_else(|| CliError::config("--k is required (flag or config file)"))?;
    let restarts = args.restarts.or(file.restarts).unwrap_or(10);
    let seed = args.seed.or(file.seed).unwrap_or(1);
    match model {
        ModelArg::Mssc => {
            let path = args
                .data
                .ok_or_else(|| CliError::config("mssc model requires --data"))?;
            let data = Dataset::from_csv_path(&path)?;
            let state = kmeans_multistart(&data, k, restarts, seed)?;
            let config = json!({
                "command": "cluster", "model": "mssc", "k": k,
                "restarts": restarts, "seed": seed,
                "data": path.display().to_string(),
            });
            let mut value = serde_json::to_value(&state.partition)?;
            value
                .as_object_mut()
                .expect("partition is an object")
                .insert("objective".into(), json!(state.objective));
            write_json_artifact(Some(&args.out), &value, &config)?;
            println!("objective {:?}", state.objective);
        }
        ModelArg::Kmedoids => {
            let metric = args.metric.unwrap_or(MetricArg::Euclidean);
            let (matrix, source) = load_or_build_matrix(
                args.matrix.as_deref(),
                args.data.as_deref(),
                metric,
            )?;
            let mode = args.kmedoids_mode.unwrap_or(KmedoidsModeArg::Local);
            let state = kmedoids_solve(&matrix, k, mode.mode(), restarts, seed)?;
            let config = json!({
                "command": "cluster", "model": "kmedoids", "k": k,
                "restarts": restarts, "seed": seed, "mode": format!("{mode:?}").to_lowercase(),
                "metric": metric.name(), "input": source,
            });
            let partition = Partition::new(state.assignment.clone(), k)?;
            let mut value = serde_json::to_value(&partition)?;
            let obj = value.as_object_mut().expect("partition is an object");
            obj.insert("medoids".into(), json!(state.medoids));
            obj.insert("objective".into(), json!(state.objective));
            write_json_artifact(Some(&args.out), &value, &config)?;
            println!("objective {:?}", state.objective);
        }
    }
    Ok(())
}

fn load_or_build_matrix(
    matrix: Option<&Path>,
    data: Option<&Path>,
    metric: MetricArg,
) -> CliResult<(DissimilarityMatrix, String)> {
    match (matrix, data) {
        (Some(m), _) => Ok((
            DissimilarityMatrix::from_csv_path(m)?,
            m.display().to_string(),
        )),
        (None, Some(d)) => {
            let dataset = Dataset::from_csv_path(d)?;
            let metric = metric.build(&dataset)?;
            Ok((
                pairwise_matrix(&dataset, &metric)?,
                format!("{} (pairwise)", d.display()),
            ))
        }
        (None, None) => Err(CliError::config("provide --matrix or --data")),
    }
}

fn cmd_dual(args: DualArgs, file: &FileConfig) -> CliResult<()> {
    let model = args.model.unwrap_or(match file.model.as_deref() {
        Some("kmedoids") => ModelArg::Kmedoids,
        _ => ModelArg::Mssc,
    });
    let k = args
        .k
        .or(file.k)
        .ok_or_else(|| CliError::config("--k is required (flag or config file)"))?;
    let seed = args.seed.or(file.seed).unwrap_or(1);
    let solver = file.solver_config(&args.solver);
    let solver_json = serde_json::to_value(&solver)?;

    match model {
        ModelArg::Mssc => {
            let path = args
                .data
                .ok_or_else(|| CliError::config("mssc model requires --data"))?;
            let data = Dataset::from_csv_path(&path)?;
            let constraints =
                ConstraintSet::from_json_path(&args.constraints, data.n())?;
            let problem = DualProblem::Mssc { data: &data };
            let dual = subgradient_solve(&problem, k, &constraints, &solver, seed)?;
            let config = json!({
                "command": "dual", "model": "mssc", "k": k, "seed": seed,
                "data": path.display().to_string(),
                "constraints": args.constraints.display().to_string(),
                "solver": solver_json,
            });
            write_json_artifact(args.out.as_deref(), &dual, &config)?;
            report_dual(&dual, args.out.as_deref());
        }
        ModelArg::Kmedoids => {
            let metric = args.metric.unwrap_or(MetricArg::Euclidean);
            let (matrix, source) = load_or_build_matrix(
                args.matrix.as_deref(),
                args.data.as_deref(),
                metric,
            )?;
            let constraints =
                ConstraintSet::from_json_path(&args.constraints, matrix.n())?;
            let mode = args.kmedoids_mode.unwrap_or(KmedoidsModeArg::Local);
            let problem = DualProblem::KMedoids { matrix: &matrix, mode: mode.mode() };
            let dual = subgradient_solve(&problem, k, &constraints, &solver, seed)?;
            let config = json!({
                "command": "dual", "model": "kmedoids", "k": k, "seed": seed,
                "metric": metric.name(), "input": source,
                "mode": format!("{mode:?}").to_lowercase(),
                "constraints": args.constraints.display().to_string(),
                "solver": solver_json,
            });
            write_json_artifact(args.out.as_deref(), &dual, &config)?;
            report_dual(&dual, args.out.as_deref());
        }
    }
    Ok(())
}

fn report_dual(dual: &DualSolution, out: Option<&Path>) {
    if out.is_some() {
        println!(
            "dual bound {:?} after {} iterations (converged: {})",
            dual.dual_bound, dual.iterations, dual.converged
        );
    }
}

fn cmd_fitness(args: FitnessArgs, file: &FileConfig) -> CliResult<()> {
    let dual = DualSolution::from_json_path(&args.dual)?;
    let constraints = match &args.constraints {
        Some(path) => load_constraints_inferring_n(path)?,
        None => constraints_of_dual(&dual)?,
    };
    let tau = default_tau(file, args.tau, dual.dual_bound);
    let mut report = fitness_score(&dual, &constraints, dual.k, tau)?;
    report.metric_name = None;
    let config = json!({
        "command": "fitness",
        "dual": args.dual.display().to_string(),
        "tau": tau,
    });
    write_json_artifact(args.out.as_deref(), &report, &config)?;
    if args.out.is_some() {
        println!("fitness score {} of {}", report.score, report.max_score);
    }
    Ok(())
}

fn cmd_filter(args: FilterArgs, file: &FileConfig) -> CliResult<()> {
    let dual = DualSolution::from_json_path(&args.dual)?;
    let alpha = args
        .alpha
        .or(file.alpha)
        .ok_or_else(|| CliError::config("--alpha is required (flag or config file)"))?;
    let constraints = constraints_of_dual(&dual)?;
    let tau = default_tau(file, args.tau, dual.dual_bound);
    let impacts = impact_scores(&dual, &constraints)?;
    let (kept, removed) = filter_constraints(&impacts, alpha, tau, args.keep_zero_impact)?;
    let config = json!({
        "command": "filter",
        "dual": args.dual.display().to_string(),
        "alpha": alpha,
        "tau": tau,
        "keep_zero_impact": args.keep_zero_impact,
    });
    write_json_artifact(Some(&args.out), &kept, &config)?;
    if let Some(removed_path) = &args.removed {
        write_json_artifact(Some(removed_path), &removed, &config)?;
    }
    println!(
        "kept {} constraints, removed {} (of {})",
        kept.len(),
        removed.len(),
        constraints.len()
    );
    Ok(())
}

fn cmd_transform(args: TransformArgs, file: &FileConfig) -> CliResult<()> {
    let data = Dataset::from_csv_path(&args.data)?;
    let k = args
        .k
        .or(file.k)
        .ok_or_else(|| CliError::config("--k is required (flag or config file)"))?;
    let constraints = ConstraintSet::from_json_path(&args.constraints, data.n())?;
    let selection = args.mode.unwrap_or(SelectionArg::Dual).mode();
    let restarts = args.restarts.or(file.restarts).unwrap_or(10);
    let seed = args.seed.or(file.seed).unwrap_or(1);
    let solver = file.solver_config(&args.solver);
    let config = json!({
        "command": "transform",
        "data": args.data.display().to_string(),
        "constraints": args.constraints.display().to_string(),
        "k": k,
        "mode": match selection {
            SelectionMode::DualGuided => "dual",
            SelectionMode::RandomBaseline => "random",
        },
        "restarts": restarts,
        "seed": seed,
        "solver": serde_json::to_value(&solver)?,
    });
    let (transformed, trace) =
        run_transform(&data, k, &constraints, selection, restarts, &solver, seed)?;

    let mut w = create_with_preamble(&args.out, &config)?;
    transformed.to_csv_writer(&mut w)?;
    w.flush()?;

    if let Some(trace_path) = &args.trace {
        let mut text = csv_preamble(&config);
        text.push_str(
            "iteration,constraint_i,constraint_j,kind,moved_points,step_distance,cumulative_distance,ari,mssc\n",
        );
        for it in &trace.iterations {
            let moved: Vec<String> = it
                .moves
                .iter()
                .map(|m| format!("{}:{}->{}", m.point, m.from_cluster, m.to_cluster))
                .collect();
            let step: f64 = it.moves.iter().map(|m| m.displacement).sum();
            let ari = it.ari.map(|a| format!("{a:?}")).unwrap_or_default();
            writeln!(
                text,
                "{},{},{},{},{},{:?},{:?},{},{:?}",
                it.iteration,
                it.i,
                it.j,
                it.kind,
                moved.join(";"),
                step,
                it.traveled,
                ari,
                it.objective,
            )
            .expect("writing to a string cannot fail");
        }
        std::fs::write(trace_path, text)?;
    }
    println!(
        "{} iterations, {} of {} constraints still violated, total distance {:?}",
        trace.iterations.len(),
        trace.final_violated,
        constraints.len(),
        trace.total_traveled,
    );
    Ok(())
}

fn cmd_declosses(args: DeclossesArgs, _file: &FileConfig) -> CliResult<()> {
    let q = SoftAssignment::<f64>::from_csv_path(&args.q)?;
    let p = SoftAssignment::<f64>::from_csv_path(&args.p)?;
    let constraints = ConstraintSet::from_json_path(&args.constraints, q.n())?;
    let (l_c, l_ml, l_cl) = dec_losses(
        &q,
        &p,
        constraints.must_link(),
        constraints.cannot_link(),
    )?;
    let config = json!({
        "command": "declosses",
        "q": args.q.display().to_string(),
        "p": args.p.display().to_string(),
        "constraints": args.constraints.display().to_string(),
    });
    let payload = json!({ "l_c": l_c, "l_ml": l_ml, "l_cl": l_cl });
    write_json_artifact(args.out.as_deref(), &payload, &config)?;
    Ok(())
}

fn cmd_ari(args: AriArgs) -> CliResult<()> {
    let a = Partition::from_json_path(&args.a)?;
    let b = Partition::from_json_path(&args.b)?;
    let value = adjusted_rand_index(&a.assignment, &b.assignment)?;
    println!("{value:?}");
    Ok(())
}

fn cmd_experiment_fitness(args: ExperimentFitnessArgs, file: &FileConfig) -> CliResult<()> {
    let t = &file.fitness;
    let dataset_metrics = parse_metric_kinds(t.dataset_metrics.as_deref())?;
    let dataset_seed = t.dataset_seed.unwrap_or(1);
    let metrics = parse_metric_kinds(t.metrics.as_deref())?;
    let count = args.constraint_count.or(t.constraint_count).unwrap_or(100);
    let time_limit = args.time_limit.or(t.time_limit).unwrap_or(2.0);
    let seed = args.seed.or(t.seed).or(file.seed).unwrap_or(7);
    let specs: Vec<SyntheticSpec> = dataset_metrics
        .iter()
        .map(|&metric| SyntheticSpec { metric, seed: dataset_seed })
        .collect();
    let mut solver = file.solver_config(&SolverArgs {
        epsilon: None,
        time_limit: None,
        max_iterations: None,
        inner_rounds: None,
        incumbent_restarts: None,
    });
    solver.time_limit_seconds = time_limit;
    if file.solver.max_iterations.is_none() {
        solver.max_iterations = EXPERIMENT_MAX_ITERATIONS;
    }
    let config = json!({
        "command": "experiment fitness",
        "dataset_metrics": dataset_metrics.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "dataset_seed": dataset_seed,
        "metrics": metrics.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "constraint_count": count,
        "time_limit": time_limit,
        "seed": seed,
        "solver": serde_json::to_value(&solver)?,
    });
    let report = fitness_experiment_with::<f64>(
        &specs,
        &metrics,
        count,
        SizeLaw::Uniform1To100,
        &solver,
        seed,
    )?;
    let mut text = csv_preamble(&config);
    text.push_str(
        "dataset_metric,dataset_seed,scored_metric,unsupervised_ari,sets,mean_fitness,std_fitness\n",
    );
    for cell in &report.cells {
        writeln!(
            text,
            "{},{},{},{:?},{},{},{}",
            cell.dataset_metric.name(),
            cell.dataset_seed,
            cell.scored_metric.name(),
            cell.unsupervised_ari,
            cell.scores.len(),
            cell.mean_fitness.map(|v| format!("{v:?}")).unwrap_or_default(),
            cell.std_fitness.map(|v| format!("{v:?}")).unwrap_or_default(),
        )
        .expect("writing to a string cannot fail");
    }
    std::fs::write(&args.out, text)?;
    println!(
        "wrote {} cells ({} datasets x {} metrics) to {}",
        report.cells.len(),
        specs.len(),
        metrics.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_experiment_transform(args: ExperimentTransformArgs, file: &FileConfig) -> CliResult<()> {
    let t = &file.transform;
    let dataset_metric = match &t.dataset_metric {
        Some(name) => MetricKind::parse(name)?,
        None => MetricKind::Euclidean,
    };
    let dataset_seed = t.dataset_seed.unwrap_or(1);
    let k = args.k.or(t.k).unwrap_or(3);
    let size = args.constraint_size.or(t.constraint_size).unwrap_or(15);
    let runs = args.runs.or(t.runs).unwrap_or(20);
    let restarts = t.restarts.or(file.restarts).unwrap_or(10);
    let seed = args.seed.or(t.seed).or(file.seed).unwrap_or(7);
    let modes: Vec<SelectionMode> = match &t.modes {
        None => vec![SelectionMode::DualGuided, SelectionMode::RandomBaseline],
        Some(list) => list
            .iter()
            .map(|m| match m.as_str() {
                "dual" | "dual_guided" => Ok(SelectionMode::DualGuided),
                "random" | "random_baseline" => Ok(SelectionMode::RandomBaseline),
                other => Err(CliError::config(format!("unknown mode '{other}'"))),
            })
            .collect::<CliResult<_>>()?,
    };
    let solver = file.solver_config(&SolverArgs {
        epsilon: None,
        time_limit: None,
        max_iterations: None,
        inner_rounds: None,
        incumbent_restarts: None,
    });
    let config = json!({
        "command": "experiment transform",
        "dataset_metric": dataset_metric.name(),
        "dataset_seed": dataset_seed,
        "k": k,
        "constraint_size": size,
        "runs": runs,
        "restarts": restarts,
        "seed": seed,
        "modes": modes.iter().map(|m| format!("{m:?}")).collect::<Vec<_>>(),
        "solver": serde_json::to_value(&solver)?,
    });
    let data: Dataset =
        generate_synthetic(&SyntheticSpec { metric: dataset_metric, seed: dataset_seed })?;
    let sets = violated_constraint_sets(&data, k, runs, size, restarts, seed)?;
    let report = transform_experiment(&data, k, &sets, &modes, restarts, &solver, seed)?;

    let mut text = csv_preamble(&config);
    text.push_str(
        "mode,run,iterations,initial_ari,final_ari,initial_violated,final_violated,total_traveled\n",
    );
    for r in &report.runs {
        writeln!(
            text,
            "{:?},{},{},{:?},{:?},{},{},{:?}",
            r.mode,
            r.run,
            r.iterations,
            r.initial_ari,
            r.final_ari,
            r.initial_violated,
            r.final_violated,
            r.total_traveled,
        )
        .expect("writing to a string cannot fail");
    }
    std::fs::write(&args.out, text)?;

    if let Some(progression_path) = &args.progression {
        let mut text = csv_preamble(&config);
        text.push_str("mode,iteration,runs,mean_ari,std_ari,mean_traveled,std_traveled\n");
        for agg in &report.modes {
            for band in &agg.progression {
                writeln!(
                    text,
                    "{:?},{},{},{:?},{:?},{:?},{:?}",
                    agg.mode,
                    band.iteration,
                    band.runs,
                    band.mean_ari,
                    band.std_ari,
                    band.mean_traveled,
                    band.std_traveled,
                )
                .expect("writing to a string cannot fail");
            }
        }
        std::fs::write(progression_path, text)?;
    }
    for agg in &report.modes {
        println!(
            "{:?}: {} runs, mean iterations {:.2}, mean final ARI {:.4}, mean traveled {:.4}, all satisfied: {}",
            agg.mode,
            agg.runs,
            agg.mean_iterations,
            agg.mean_final_ari,
            agg.mean_traveled,
            agg.all_satisfied
        );
    }
    Ok(())
}
