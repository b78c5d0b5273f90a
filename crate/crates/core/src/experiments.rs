//! Benchmark building blocks: synthetic two-dimensional datasets whose
//! cluster structure matches a chosen metric, random constraint-set
//! generators, the adjusted Rand index, and the two desk-scale experiment
//! harnesses (metric fitness grid, transform comparison).

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clustering::{
    count_combinations, kmedoids_solve, KMedoidsMode, EXACT_ENUMERATION_BUDGET,
};
use crate::lagrangian::{solve_with_incumbent, DualProblem, Incumbent, LagrangianConfig};
use crate::metrics::{mahalanobis_from_covariance, pairwise_matrix, Metric};
use crate::transform::{run_transform, SelectionMode};
use crate::types::{validate_constraints, ConstraintSet, Dataset};
use crate::{dualtools, flt, rng, Error, Result, Scalar};

/// Number of points in every synthetic dataset.
pub const SYNTHETIC_N: usize = 200;
/// Number of clusters in every synthetic dataset.
pub const SYNTHETIC_K: usize = 3;
/// Per-cluster size cap; with 200 points the sizes are always {67, 67, 66}.
const SYNTHETIC_CAP: usize = 67;
/// Random pairs used to calibrate the center-separation threshold.
const CALIBRATION_PAIRS: usize = 1000;
/// Hard cap on rejection-sampling draws before giving up.
const MAX_DRAWS: usize = 1_000_000;
/// Iteration cap used by the experiment harnesses' solver configuration;
/// sized so a 200-point solve finishes well inside the per-set time limit.
pub const EXPERIMENT_MAX_ITERATIONS: usize = 300;

/// The four candidate metrics of the identification experiment. The same
/// kind names both a generator design and a scoring metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Euclidean,
    Manhattan,
    Chebyshev,
    Mahalanobis,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Euclidean,
        MetricKind::Manhattan,
        MetricKind::Chebyshev,
        MetricKind::Mahalanobis,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::Manhattan => "manhattan",
            MetricKind::Chebyshev => "chebyshev",
            MetricKind::Mahalanobis => "mahalanobis",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(MetricKind::Euclidean),
            "manhattan" => Ok(MetricKind::Manhattan),
            "chebyshev" => Ok(MetricKind::Chebyshev),
            "mahalanobis" => Ok(MetricKind::Mahalanobis),
            other => Err(Error::Parse(format!("unknown metric kind '{other}'"))),
        }
    }

    /// The concrete metric used to score `data` under this kind. The
    /// Mahalanobis form is the inverse sample covariance of the dataset.
    pub fn scoring_metric<F: Scalar>(&self, data: &Dataset<F>) -> Result<Metric<F>> {
        Ok(match self {
            MetricKind::Euclidean => Metric::Euclidean,
            MetricKind::Manhattan => Metric::Manhattan,
            MetricKind::Chebyshev => Metric::Chebyshev,
            MetricKind::Mahalanobis => Metric::Mahalanobis(mahalanobis_from_covariance(data)?),
        })
    }
}

/// Recipe for one synthetic dataset: 200 points, 3 balanced clusters, in a
/// geometry tailored to `metric`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub metric: MetricKind,
    pub seed: u64,
}

/// Generates the spec's dataset with ground-truth labels.
///
/// Lp kinds: a separation threshold Δ is the largest distance among 1000
/// pairs of N(10,1)² points under the metric; three centers are resampled
/// from N(10,1)² until every pairwise distance is at least Δ/3; then
/// N(10,1)² points are assigned to their nearest center, rejecting draws
/// whose cluster already holds 67 points, until 200 points are placed.
///
/// Mahalanobis kind: three horizontal bands; cluster c draws
/// x ~ U[0, 100] and y ~ U[5c - 0.1, 5c + 0.1].
pub fn generate_synthetic<F: Scalar>(spec: &SyntheticSpec) -> Result<Dataset<F>> {
    let mut rng = rng::stream(spec.seed, rng::TAG_SYNTH);
    match spec.metric {
        MetricKind::Mahalanobis => {
            let mut points = Vec::with_capacity(SYNTHETIC_N);
            let mut labels = Vec::with_capacity(SYNTHETIC_N);
            for c in 0..SYNTHETIC_K {
                let size = if c + 1 == SYNTHETIC_K {
                    SYNTHETIC_N - (SYNTHETIC_K - 1) * SYNTHETIC_CAP
                } else {
                    SYNTHETIC_CAP
                };
                let band = 5.0 * c as f64;
                for _ in 0..size {
                    let x: f64 = rng.random_range(0.0..100.0);
                    let y: f64 = rng.random_range(band - 0.1..band + 0.1);
                    points.push(vec![flt::<F>(x), flt::<F>(y)]);
                    labels.push(c);
                }
            }
            Dataset::new(points, Some(labels), None)
        }
        lp => {
            let metric: Metric<F> = match lp {
                MetricKind::Euclidean => Metric::Euclidean,
                MetricKind::Manhattan => Metric::Manhattan,
                MetricKind::Chebyshev => Metric::Chebyshev,
                MetricKind::Mahalanobis => unreachable!("handled above"),
            };
            let normal = Normal::new(10.0f64, 1.0).expect("valid parameters");
            let mut draws = 0usize;
            let mut point = |rng: &mut rand_chacha::ChaCha8Rng| -> Result<Vec<F>> {
                draws += 1;
                if draws > MAX_DRAWS {
                    return Err(Error::RejectionOverflow("synthetic dataset generation"));
                }
                Ok(vec![flt::<F>(normal.sample(rng)), flt::<F>(normal.sample(rng))])
            };

            let mut delta = F::zero();
            for _ in 0..CALIBRATION_PAIRS {
                let p = point(&mut rng)?;
                let q = point(&mut rng)?;
                let d = metric.distance(&p, &q)?;
                if d > delta {
                    delta = d;
                }
            }
            let threshold = delta / flt::<F>(3.0);

            let centers = loop {
                let cs: Vec<Vec<F>> = (0..SYNTHETIC_K)
                    .map(|_| point(&mut rng))
                    .collect::<Result<_>>()?;
                let mut separated = true;
                'pairs: for a in 0..SYNTHETIC_K {
                    for b in a + 1..SYNTHETIC_K {
                        if metric.distance(&cs[a], &cs[b])? < threshold {
                            separated = false;
                            break 'pairs;
                        }
                    }
                }
                if separated {
                    break cs;
                }
            };

            let mut points = Vec::with_capacity(SYNTHETIC_N);
            let mut labels = Vec::with_capacity(SYNTHETIC_N);
            let mut sizes = [0usize; SYNTHETIC_K];
            while points.len() < SYNTHETIC_N {
                let p = point(&mut rng)?;
                let mut nearest = 0usize;
                let mut best = metric.distance(&p, &centers[0])?;
                for (c, center) in centers.iter().enumerate().skip(1) {
                    let d = metric.distance(&p, center)?;
                    if d < best {
                        best = d;
                        nearest = c;
                    }
                }
                if sizes[nearest] < SYNTHETIC_CAP {
                    sizes[nearest] += 1;
                    points.push(p);
                    labels.push(nearest);
                }
            }
            Dataset::new(points, Some(labels), None)
        }
    }
}

// ---------------------------------------------------------------------------
// Constraint-set generation
// ---------------------------------------------------------------------------

/// How many constraints each generated set holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeLaw {
    /// Uniform integer in [1, 100], drawn independently per set.
    Uniform1To100,
    Fixed(usize),
}

/// Which pairs a set may draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// All point pairs, labeled by the ground truth.
    GroundTruthUniform,
    /// Only pairs whose ground-truth relation is violated by a reference
    /// partition: same-label pairs that it splits, different-label pairs it
    /// co-assigns.
    ViolatedOnly,
}

/// A batch of generated constraint sets plus their drawn sizes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintBatch {
    pub sets: Vec<ConstraintSet>,
    pub mode: ConstraintMode,
    pub sizes: Vec<usize>,
}

/// Draws `count` constraint sets over the points of `labels`. Every pair is
/// labeled must-link exactly when its two points share a ground-truth
/// label. `ViolatedOnly` restricts the pool to pairs violated by
/// `base_partition` (required for that mode).
pub fn generate_constraint_sets(
    labels: &[usize],
    count: usize,
    size_law: SizeLaw,
    mode: ConstraintMode,
    base_partition: Option<&[usize]>,
    seed: u64,
) -> Result<ConstraintBatch> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::DegenerateDataset("constraint generation needs at least two points"));
    }
    let base = match mode {
        ConstraintMode::GroundTruthUniform => None,
        ConstraintMode::ViolatedOnly => {
            let base = base_partition.ok_or_else(|| {
                Error::InvalidConfig("violated_only mode requires a base partition".into())
            })?;
            if base.len() != n {
                return Err(Error::LengthMismatch { a: n, b: base.len() });
            }
            Some(base)
        }
    };
    let mut pool: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let keep = match base {
                None => true,
                Some(b) => {
                    let should_link = labels[i] == labels[j];
                    let linked = b[i] == b[j];
                    should_link != linked
                }
            };
            if keep {
                pool.push((i, j));
            }
        }
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }

    let mut sets = Vec::with_capacity(count);
    let mut sizes = Vec::with_capacity(count);
    for s in 0..count {
        let mut set_rng = rng::stream2(seed, rng::TAG_CONSTRAINTS, s as u64);
        let size = match size_law {
            SizeLaw::Uniform1To100 => set_rng.random_range(1..=100usize),
            SizeLaw::Fixed(m) => m,
        };
        if size > pool.len() {
            return Err(Error::PoolExhausted { requested: size, available: pool.len() });
        }
        let mut ml = Vec::new();
        let mut cl = Vec::new();
        for idx in rand::seq::index::sample(&mut set_rng, pool.len(), size) {
            let (i, j) = pool[idx];
            if labels[i] == labels[j] {
                ml.push((i, j));
            } else {
                cl.push((i, j));
            }
        }
        sets.push(validate_constraints(&ml, &cl, n)?);
        sizes.push(size);
    }
    Ok(ConstraintBatch { sets, mode, sizes })
}

// ---------------------------------------------------------------------------
// Adjusted Rand index
// ---------------------------------------------------------------------------

/// Pair-counting agreement between two flat partitions, corrected for
/// chance: `(Σ C(n_ij,2) - E) / (½[Σ C(a_i,2) + Σ C(b_j,2)] - E)` with
/// `E = Σ C(a_i,2) Σ C(b_j,2) / C(n,2)`. Returns 1 for two partitions with
/// identical pair structure (including the degenerate all-singleton and
/// single-cluster cases, where the correction denominator vanishes).
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { a: a.len(), b: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::DegenerateDataset("rand index needs at least two points"));
    }
    let mut cells: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let comb2 = |x: u64| -> f64 { (x as u128 * (x as u128).saturating_sub(1) / 2) as f64 };
    let s: f64 = cells.values().map(|&v| comb2(v)).sum();
    let ra: f64 = rows.values().map(|&v| comb2(v)).sum();
    let cb: f64 = cols.values().map(|&v| comb2(v)).sum();
    let total = comb2(n as u64);
    let expected = ra * cb / total;
    let max_index = 0.5 * (ra + cb);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((s - expected) / denom)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// Fitness experiment
// ---------------------------------------------------------------------------

/// One (dataset, scored metric) cell of the fitness grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessCell {
    /// Metric the dataset was generated for.
    pub dataset_metric: MetricKind,
    pub dataset_seed: u64,
    /// Metric the constraint sets were scored under.
    pub scored_metric: MetricKind,
    /// Agreement of the unsupervised k-medoids solution with ground truth.
    pub unsupervised_ari: f64,
    /// Mean fitness score over the constraint sets (absent with zero sets).
    pub mean_fitness: Option<f64>,
    pub std_fitness: Option<f64>,
    /// Raw per-set scores, in constraint-set order.
    pub scores: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessExperimentReport {
    pub cells: Vec<FitnessCell>,
    pub constraint_count: usize,
}

impl FitnessExperimentReport {
    pub fn cell(&self, dataset: MetricKind, scored: MetricKind) -> Option<&FitnessCell> {
        self.cells
            .iter()
            .find(|c| c.dataset_metric == dataset && c.scored_metric == scored)
    }
}

/// Runs the metric-identification grid with the default experiment solver:
/// per dataset spec, one shared batch of uniformly sized constraint sets is
/// scored under every candidate metric. See [`fitness_experiment_with`].
pub fn fitness_experiment<F: Scalar>(
    specs: &[SyntheticSpec],
    metrics: &[MetricKind],
    constraint_count: usize,
    time_limit: f64,
    seed: u64,
) -> Result<FitnessExperimentReport> {
    let solver = experiment_solver::<F>(time_limit);
    fitness_experiment_with::<F>(specs, metrics, constraint_count, SizeLaw::Uniform1To100, &solver, seed)
}

/// Sub-gradient configuration for experiment grids: the iteration cap keeps
/// cells deterministic under the wall-clock limit, and the short halving
/// patience recalibrates the Polyak step quickly when the initial
/// repair-based gap overestimates the reachable dual improvement (loose gaps
/// otherwise burn the budget on overshoot recovery).
pub fn experiment_solver<F: Scalar>(time_limit: f64) -> LagrangianConfig<F> {
    LagrangianConfig::<F> {
        time_limit_seconds: time_limit,
        max_iterations: EXPERIMENT_MAX_ITERATIONS,
        halving_patience: 4,
        ..LagrangianConfig::default()
    }
}

/// [`fitness_experiment`] with explicit size law and solver configuration.
///
/// For each dataset, the constraint sets are drawn once from the ground
/// truth and reused across all scored metrics, so a metric comparison sees
/// identical constraints. Each cell solves one unsupervised k-medoids
/// problem (exact when the enumeration fits the budget, local search
/// otherwise) and one Lagrangian dual per constraint set, with the k-medoids
/// local-search inner model. All randomness is derived from `seed`, the
/// dataset index, and the set index — never from the metric — so duplicate
/// metric entries produce identical rows.
pub fn fitness_experiment_with<F: Scalar>(
    specs: &[SyntheticSpec],
    metrics: &[MetricKind],
    constraint_count: usize,
    size_law: SizeLaw,
    solver: &LagrangianConfig<F>,
    seed: u64,
) -> Result<FitnessExperimentReport> {
    solver.validate()?;
    let k = SYNTHETIC_K;
    let mut cells = Vec::with_capacity(specs.len() * metrics.len());
    for (d_idx, spec) in specs.iter().enumerate() {
        let data: Dataset<F> = generate_synthetic(spec)?;
        let labels = data.labels().expect("synthetic datasets carry labels").to_vec();
        let constraint_seed = rng::mix(rng::mix(seed, rng::TAG_CONSTRAINTS), d_idx as u64);
        let batch = generate_constraint_sets(
            &labels,
            constraint_count,
            size_law,
            ConstraintMode::GroundTruthUniform,
            None,
            constraint_seed,
        )?;
        let cell_seed = rng::mix(rng::mix(seed, rng::TAG_EXPERIMENT_CELL), d_idx as u64);
        for &scored in metrics {
            let metric = scored.scoring_metric(&data)?;
            let matrix = pairwise_matrix(&data, &metric)?;
            let unsup_mode = if count_combinations(data.n(), k) <= EXACT_ENUMERATION_BUDGET {
                KMedoidsMode::Exact
            } else {
                KMedoidsMode::LocalSearch
            };
            let unsup =
                kmedoids_solve(&matrix, k, unsup_mode, solver.incumbent_restarts, cell_seed)?;
            let unsupervised_ari = adjusted_rand_index(&unsup.assignment, &labels)?;

            let problem = DualProblem::KMedoids { matrix: &matrix, mode: KMedoidsMode::LocalSearch };
            let incumbent = Incumbent::compute(&problem, k, solver, cell_seed)?;
            let mut scores = Vec::with_capacity(batch.sets.len());
            for set in &batch.sets {
                let dual = solve_with_incumbent(&problem, k, set, solver, &incumbent)?;
                let tau = solver.tau_for(dual.dual_bound);
                let report = dualtools::fitness_score(&dual, set, k, tau)?;
                scores.push(report.score);
            }
            let stats = if scores.is_empty() {
                None
            } else {
                let as_f64: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
                Some(mean_std(&as_f64))
            };
            cells.push(FitnessCell {
                dataset_metric: spec.metric,
                dataset_seed: spec.seed,
                scored_metric: scored,
                unsupervised_ari,
                mean_fitness: stats.map(|(m, _)| m),
                std_fitness: stats.map(|(_, s)| s),
                scores,
            });
        }
    }
    Ok(FitnessExperimentReport { cells, constraint_count })
}

// ---------------------------------------------------------------------------
// Transform experiment
// ---------------------------------------------------------------------------

/// Seed driving run `run` of a transform experiment; shared between the
/// selection modes so their runs are paired.
pub fn transform_run_seed(seed: u64, run: usize) -> u64 {
    rng::mix(rng::mix(seed, rng::TAG_EXPERIMENT_CELL), run as u64)
}

/// One constraint set per run, drawn from the pairs violated by that run's
/// own initial clustering (the same solution [`transform_experiment`]'s run
/// `r` starts from, since the seeds match).
///
/// Every set has pairwise-distinct endpoints: a set is redrawn until no two
/// of its constraints touch the same point (uniform over violated pairs,
/// conditioned on disjointness). Sets with shared endpoints would let one
/// repair satisfy or re-break a neighboring constraint as a side effect,
/// turning the iterations-equal-set-size regularity of the transform runs
/// into a coin flip; disjoint endpoints make it structural.
pub fn violated_constraint_sets<F: Scalar>(
    dataset: &Dataset<F>,
    k: usize,
    runs: usize,
    size: usize,
    kmeans_restarts: usize,
    seed: u64,
) -> Result<Vec<ConstraintSet>> {
    const MAX_REDRAWS: u64 = 10_000;
    let labels = dataset
        .labels()
        .ok_or_else(|| Error::InvalidConfig("constraint generation needs labels".into()))?;
    (0..runs)
        .map(|r| {
            let run_seed = transform_run_seed(seed, r);
            let state = crate::transform::initial_state(dataset, k, kmeans_restarts, run_seed)?;
            for attempt in 0..MAX_REDRAWS {
                let batch = generate_constraint_sets(
                    labels,
                    1,
                    SizeLaw::Fixed(size),
                    ConstraintMode::ViolatedOnly,
                    Some(state.assignment()),
                    rng::mix(run_seed, attempt),
                )?;
                let set = batch.sets.into_iter().next().expect("count was one");
                let mut endpoints = std::collections::BTreeSet::new();
                if set.iter_all().all(|(_, i, j)| endpoints.insert(i) && endpoints.insert(j)) {
                    return Ok(set);
                }
            }
            Err(Error::InvalidConfig(format!(
                "could not draw {size} endpoint-disjoint violated pairs in {MAX_REDRAWS} attempts"
            )))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformRunSummary {
    pub run: usize,
    pub mode: SelectionMode,
    pub iterations: usize,
    pub initial_ari: f64,
    pub final_ari: f64,
    pub initial_violated: usize,
    pub final_violated: usize,
    pub total_traveled: f64,
    /// ARI of each iteration's clustering, in order.
    pub ari_progression: Vec<f64>,
    /// Cumulative traveled distance after each iteration.
    pub traveled_progression: Vec<f64>,
}

/// Mean/std across runs at one iteration index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressionBand {
    /// 1-based iteration.
    pub iteration: usize,
    /// Runs that reached this iteration.
    pub runs: usize,
    pub mean_ari: f64,
    pub std_ari: f64,
    pub mean_traveled: f64,
    pub std_traveled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformModeAggregate {
    pub mode: SelectionMode,
    pub runs: usize,
    pub mean_iterations: f64,
    pub mean_initial_ari: f64,
    pub mean_final_ari: f64,
    pub std_final_ari: f64,
    pub mean_traveled: f64,
    pub std_traveled: f64,
    /// True when every run ended with zero violated constraints.
    pub all_satisfied: bool,
    pub progression: Vec<ProgressionBand>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformExperimentReport {
    pub runs: Vec<TransformRunSummary>,
    pub modes: Vec<TransformModeAggregate>,
}

/// Runs one transform per (constraint set, mode) with paired seeds: run r
/// of every mode uses [`transform_run_seed`]`(seed, r)`, so the k-means
/// schedules match and only the selection rule differs.
pub fn transform_experiment<F: Scalar>(
    dataset: &Dataset<F>,
    k: usize,
    constraint_sets: &[ConstraintSet],
    modes: &[SelectionMode],
    kmeans_restarts: usize,
    solver_config: &LagrangianConfig<F>,
    seed: u64,
) -> Result<TransformExperimentReport> {
    if dataset.labels().is_none() {
        return Err(Error::InvalidConfig(
            "transform experiment needs ground-truth labels".into(),
        ));
    }
    let mut runs = Vec::with_capacity(constraint_sets.len() * modes.len());
    for &mode in modes {
        for (r, set) in constraint_sets.iter().enumerate() {
            let run_seed = transform_run_seed(seed, r);
            let (_, trace) =
                run_transform(dataset, k, set, mode, kmeans_restarts, solver_config, run_seed)?;
            let ari_progression: Vec<f64> = trace
                .iterations
                .iter()
                .map(|it| it.ari.expect("labels are present"))
                .collect();
            let traveled_progression: Vec<f64> = trace
                .iterations
                .iter()
                .map(|it| it.traveled.to_f64().expect("traveled distance fits f64"))
                .collect();
            runs.push(TransformRunSummary {
                run: r,
                mode,
                iterations: trace.iterations.len(),
                initial_ari: trace.initial_ari.expect("labels are present"),
                final_ari: trace.final_ari.expect("labels are present"),
                initial_violated: trace.initial_violated,
                final_violated: trace.final_violated,
                total_traveled: trace.total_traveled.to_f64().expect("distance fits f64"),
                ari_progression,
                traveled_progression,
            });
        }
    }

    let mut aggregates = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mode_runs: Vec<&TransformRunSummary> =
            runs.iter().filter(|r| r.mode == mode).collect();
        let count = mode_runs.len();
        let (mean_iterations, _) =
            mean_std(&mode_runs.iter().map(|r| r.iterations as f64).collect::<Vec<_>>());
        let (mean_initial_ari, _) =
            mean_std(&mode_runs.iter().map(|r| r.initial_ari).collect::<Vec<_>>());
        let (mean_final_ari, std_final_ari) =
            mean_std(&mode_runs.iter().map(|r| r.final_ari).collect::<Vec<_>>());
        let (mean_traveled, std_traveled) =
            mean_std(&mode_runs.iter().map(|r| r.total_traveled).collect::<Vec<_>>());
        let longest = mode_runs.iter().map(|r| r.iterations).max().unwrap_or(0);
        let mut progression = Vec::with_capacity(longest);
        for t in 0..longest {
            let aris: Vec<f64> = mode_runs
                .iter()
                .filter_map(|r| r.ari_progression.get(t).copied())
                .collect();
            let traveled: Vec<f64> = mode_runs
                .iter()
                .filter_map(|r| r.traveled_progression.get(t).copied())
                .collect();
            let (mean_ari, std_ari) = mean_std(&aris);
            let (mean_traveled, std_traveled) = mean_std(&traveled);
            progression.push(ProgressionBand {
                iteration: t + 1,
                runs: aris.len(),
                mean_ari,
                std_ari,
                mean_traveled,
                std_traveled,
            });
        }
        aggregates.push(TransformModeAggregate {
            mode,
            runs: count,
            mean_iterations,
            mean_initial_ari,
            mean_final_ari,
            std_final_ari,
            mean_traveled,
            std_traveled,
            all_satisfied: !mode_runs.is_empty()
                && mode_runs.iter().all(|r| r.final_violated == 0),
            progression,
        });
    }
    Ok(TransformExperimentReport { runs, modes: aggregates })
}
