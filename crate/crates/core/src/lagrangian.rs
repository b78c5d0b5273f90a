//! Lagrangian relaxation of pairwise-constrained clustering.
//!
//! Must-link and cannot-link constraints are moved into the objective with
//! non-positive multipliers. For a cannot-link pair (i, j) and cluster c the
//! relaxed term is `eta * (1 + epsilon - x_i^c - x_j^c)`; a must-link pair
//! carries two families, `lambda * (epsilon + x_i^c - x_j^c)` and
//! `gamma * (epsilon + x_j^c - x_i^c)`, with `epsilon` in (0, 1). The inner
//! minimization then decomposes into per-point modified assignment costs,
//! and a projected sub-gradient ascent (Polyak steps) maximizes the dual,
//! yielding a lower-bound estimate plus the per-constraint multipliers the
//! fitness/impact tooling consumes.
//!
//! For k-medoids the multipliers attach to cluster slots: position c in the
//! sorted medoid set. Any constraint-feasible solution leaves every slack
//! positive, so the penalty stays non-positive and weak duality holds under
//! exact inner minimization regardless of which points become medoids.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clustering::{
    self, count_combinations, for_each_combination, kmeans_multistart, kmedoids_solve,
    medoid_local_search, KMedoidsMode, KMedoidsState, MsscState, EXACT_ENUMERATION_BUDGET,
};
use crate::metrics::sq_euclidean;
use crate::rng::{self, TAG_INNER_EVAL};
use crate::types::{
    CannotLinkDuals, ConstraintSet, Dataset, DissimilarityMatrix, DualSolution, MustLinkDuals,
    Partition,
};
use crate::{flt, Error, Result, Scalar};

/// Ascent stops once the Polyak step drops below this.
pub const STEP_COLLAPSE: f64 = 1e-12;
/// Lower bound for the Polyak scale parameter mu.
pub const MU_FLOOR: f64 = 1e-6;

/// Tuning knobs for the relaxation and the sub-gradient ascent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(
    serialize = "F: Serialize",
    deserialize = "F: Deserialize<'de>"
))]
pub struct LagrangianConfig<F: Scalar> {
    /// The epsilon of the relaxed inequalities; must lie strictly in (0, 1).
    pub epsilon: F,
    /// Wall-clock budget for one sub-gradient solve, in seconds.
    pub time_limit_seconds: f64,
    /// Hard cap on ascent iterations.
    pub max_iterations: usize,
    /// Initial Polyak scale mu.
    pub initial_mu: F,
    /// Number of consecutive non-improving iterations before mu is halved.
    pub halving_patience: usize,
    /// Base tolerance for treating a multiplier as zero; the effective
    /// threshold is `zero_tolerance * (1 + |dual_bound|)`.
    pub zero_tolerance: F,
    /// Alternations of the approximate MSSC inner minimization.
    pub inner_rounds: usize,
    /// Restarts used when a solve bootstraps its own incumbent clustering.
    pub incumbent_restarts: usize,
}

impl<F: Scalar> Default for LagrangianConfig<F> {
    fn default() -> Self {
        LagrangianConfig {
            epsilon: flt(0.5),
            time_limit_seconds: 2.0,
            max_iterations: 500,
            initial_mu: flt(2.0),
            halving_patience: 20,
            zero_tolerance: flt(1e-6),
            inner_rounds: 3,
            incumbent_restarts: 10,
        }
    }
}

impl<F: Scalar> LagrangianConfig<F> {
    pub fn validate(&self) -> Result<()> {
        let eps = self.epsilon.to_f64().unwrap_or(f64::NAN);
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidEpsilon(eps));
        }
        if !(self.time_limit_seconds > 0.0) {
            return Err(Error::InvalidConfig("time_limit_seconds must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.initial_mu > F::zero()) {
            return Err(Error::InvalidConfig("initial_mu must be positive".into()));
        }
        if self.halving_patience == 0 {
            return Err(Error::InvalidConfig("halving_patience must be at least 1".into()));
        }
        if self.zero_tolerance < F::zero() {
            return Err(Error::InvalidConfig("zero_tolerance must be non-negative".into()));
        }
        if self.inner_rounds == 0 {
            return Err(Error::InvalidConfig("inner_rounds must be at least 1".into()));
        }
        if self.incumbent_restarts == 0 {
            return Err(Error::InvalidConfig("incumbent_restarts must be at least 1".into()));
        }
        Ok(())
    }

    /// Effective zero threshold for a solve that reported `dual_bound`.
    pub fn tau_for(&self, dual_bound: F) -> F {
        self.zero_tolerance * (F::one() + dual_bound.abs())
    }
}

/// One value per relaxed inequality: for each must-link constraint a
/// (lambda, gamma) vector pair over clusters, for each cannot-link an eta
/// vector. The same shape carries multipliers and their slacks.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierSet<F: Scalar> {
    pub k: usize,
    pub must_link: Vec<MustLinkDuals<F>>,
    pub cannot_link: Vec<CannotLinkDuals<F>>,
}

impl<F: Scalar> MultiplierSet<F> {
    pub fn zeros(constraints: &ConstraintSet, k: usize) -> Self {
        let must_link = constraints
            .must_link()
            .iter()
            .map(|&(i, j)| MustLinkDuals {
                i,
                j,
                lambda: vec![F::zero(); k],
                gamma: vec![F::zero(); k],
            })
            .collect();
        let cannot_link = constraints
            .cannot_link()
            .iter()
            .map(|&(i, j)| CannotLinkDuals { i, j, eta: vec![F::zero(); k] })
            .collect();
        MultiplierSet { k, must_link, cannot_link }
    }

    /// Checks pair alignment with `constraints`, vector lengths, finiteness,
    /// and (when `require_non_positive`) the sign restriction.
    pub fn validate_for(
        &self,
        constraints: &ConstraintSet,
        k: usize,
        require_non_positive: bool,
    ) -> Result<()> {
        if self.k != k {
            return Err(Error::DualMismatch(format!(
                "multiplier set is for k = {}, expected {k}",
                self.k
            )));
        }
        if self.must_link.len() != constraints.must_link().len()
            || self.cannot_link.len() != constraints.cannot_link().len()
        {
            return Err(Error::DualMismatch("multiplier/constraint counts differ".into()));
        }
        let check_vec = |v: &[F]| -> Result<()> {
            if v.len() != k {
                return Err(Error::DualMismatch(format!(
                    "multiplier vector has length {}, expected {k}",
                    v.len()
                )));
            }
            for &x in v {
                if !x.is_finite() {
                    return Err(Error::NonFinite("multiplier"));
                }
                if require_non_positive && x > F::zero() {
                    return Err(Error::PositiveMultiplier {
                        value: x.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
            Ok(())
        };
        for (m, &(i, j)) in self.must_link.iter().zip(constraints.must_link()) {
            if (m.i, m.j) != (i, j) {
                return Err(Error::DualMismatch(format!(
                    "must-link pair ({}, {}) does not match constraint ({i}, {j})",
                    m.i, m.j
                )));
            }
            check_vec(&m.lambda)?;
            check_vec(&m.gamma)?;
        }
        for (c, &(i, j)) in self.cannot_link.iter().zip(constraints.cannot_link()) {
            if (c.i, c.j) != (i, j) {
                return Err(Error::DualMismatch(format!(
                    "cannot-link pair ({}, {}) does not match constraint ({i}, {j})",
                    c.i, c.j
                )));
            }
            check_vec(&c.eta)?;
        }
        Ok(())
    }

    /// Inner product over all (constraint, cluster) coordinates.
    pub fn dot(&self, other: &Self) -> F {
        debug_assert_eq!(self.k, other.k);
        let mut acc = F::zero();
        for (a, b) in self.must_link.iter().zip(&other.must_link) {
            for c in 0..self.k {
                acc = acc + a.lambda[c] * b.lambda[c] + a.gamma[c] * b.gamma[c];
            }
        }
        for (a, b) in self.cannot_link.iter().zip(&other.cannot_link) {
            for c in 0..self.k {
                acc = acc + a.eta[c] * b.eta[c];
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> F {
        self.dot(self)
    }

    /// Every coordinate scaled by `s` (used by linearity checks).
    pub fn scaled(&self, s: F) -> Self {
        let mut out = self.clone();
        out.for_each_mut(|v| *v = *v * s);
        out
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut F)) {
        for m in &mut self.must_link {
            m.lambda.iter_mut().for_each(&mut f);
            m.gamma.iter_mut().for_each(&mut f);
        }
        for c in &mut self.cannot_link {
            c.eta.iter_mut().for_each(&mut f);
        }
    }

    /// Projected ascent update: `m <- min(0, m + step * g)` coordinate-wise.
    fn axpy_project(&mut self, step: F, g: &Self) {
        let zip_update = |m: &mut Vec<F>, gv: &Vec<F>| {
            for (x, &gx) in m.iter_mut().zip(gv) {
                let v = *x + step * gx;
                *x = if v > F::zero() { F::zero() } else { v };
            }
        };
        for (m, gm) in self.must_link.iter_mut().zip(&g.must_link) {
            zip_update(&mut m.lambda, &gm.lambda);
            zip_update(&mut m.gamma, &gm.gamma);
        }
        for (c, gc) in self.cannot_link.iter_mut().zip(&g.cannot_link) {
            zip_update(&mut c.eta, &gc.eta);
        }
    }

    /// True when the projected sub-gradient direction vanishes: every
    /// coordinate has either a zero slack or sits on the boundary (m = 0)
    /// with a positive slack pushing outward. Further updates are no-ops.
    fn projected_stationary(&self, g: &Self) -> bool {
        let mut stationary = true;
        let check = |m: &Vec<F>, gv: &Vec<F>, stationary: &mut bool| {
            for (&x, &gx) in m.iter().zip(gv) {
                if !(gx == F::zero() || (x == F::zero() && gx > F::zero())) {
                    *stationary = false;
                }
            }
        };
        for (m, gm) in self.must_link.iter().zip(&g.must_link) {
            check(&m.lambda, &gm.lambda, &mut stationary);
            check(&m.gamma, &gm.gamma, &mut stationary);
        }
        for (c, gc) in self.cannot_link.iter().zip(&g.cannot_link) {
            check(&c.eta, &gc.eta, &mut stationary);
        }
        stationary
    }
}

/// Result of evaluating the Lagrangian at one multiplier point.
#[derive(Clone, Debug)]
pub struct LagrangianEvaluation<F: Scalar> {
    /// L at these multipliers: inner objective plus penalty.
    pub value: F,
    /// Raw clustering objective of the inner minimizer (no penalty terms).
    pub inner_objective: F,
    /// Total penalty contribution, `value - inner_objective`.
    pub penalty: F,
    /// Per-constraint per-cluster slacks; these are the sub-gradients.
    pub subgradients: MultiplierSet<F>,
    /// The inner minimizer. For k-medoids the assignment indexes cluster
    /// slots and `centers` is `None`.
    pub minimizer: Partition<F>,
    /// Sorted medoid set of the inner minimizer (k-medoids only).
    pub medoids: Option<Vec<usize>>,
    /// Whether the inner minimizer satisfies every original constraint.
    pub feasible: bool,
}

/// The model a dual solve runs against.
#[derive(Clone, Copy, Debug)]
pub enum DualProblem<'a, F: Scalar> {
    Mssc { data: &'a Dataset<F> },
    KMedoids { matrix: &'a DissimilarityMatrix<F>, mode: KMedoidsMode },
}

impl<'a, F: Scalar> DualProblem<'a, F> {
    fn n(&self) -> usize {
        match self {
            DualProblem::Mssc { data } => data.n(),
            DualProblem::KMedoids { matrix, .. } => matrix.n(),
        }
    }
}

// ---------------------------------------------------------------------------
// Modified cost tables and slacks
// ---------------------------------------------------------------------------

/// Per-point per-cluster cost additions plus the multiplier-only constant,
/// such that penalty(x) = sum_i w[i][x_i] + constant for every assignment x.
struct CostTable<F> {
    w: Vec<Vec<F>>,
    constant: F,
}

fn build_cost_table<F: Scalar>(
    n: usize,
    k: usize,
    multipliers: &MultiplierSet<F>,
    epsilon: F,
) -> CostTable<F> {
    let mut w = vec![vec![F::zero(); k]; n];
    let mut constant = F::zero();
    for m in &multipliers.must_link {
        for c in 0..k {
            w[m.i][c] = w[m.i][c] + m.lambda[c] - m.gamma[c];
            w[m.j][c] = w[m.j][c] + m.gamma[c] - m.lambda[c];
            constant = constant + epsilon * (m.lambda[c] + m.gamma[c]);
        }
    }
    for cl in &multipliers.cannot_link {
        for c in 0..k {
            w[cl.i][c] = w[cl.i][c] - cl.eta[c];
            w[cl.j][c] = w[cl.j][c] - cl.eta[c];
            constant = constant + (F::one() + epsilon) * cl.eta[c];
        }
    }
    CostTable { w, constant }
}

/// Constraint slacks of an assignment; the ascent's sub-gradient.
fn slacks_for<F: Scalar>(
    assignment: &[usize],
    constraints: &ConstraintSet,
    k: usize,
    epsilon: F,
) -> MultiplierSet<F> {
    let ind = |i: usize, c: usize| -> F {
        if assignment[i] == c {
            F::one()
        } else {
            F::zero()
        }
    };
    let mut slacks = MultiplierSet::zeros(constraints, k);
    for m in &mut slacks.must_link {
        for c in 0..k {
            m.lambda[c] = epsilon + ind(m.i, c) - ind(m.j, c);
            m.gamma[c] = epsilon + ind(m.j, c) - ind(m.i, c);
        }
    }
    for cl in &mut slacks.cannot_link {
        for c in 0..k {
            cl.eta[c] = F::one() + epsilon - ind(cl.i, c) - ind(cl.j, c);
        }
    }
    slacks
}

fn assignment_feasible(assignment: &[usize], constraints: &ConstraintSet) -> bool {
    constraints.must_link().iter().all(|&(i, j)| assignment[i] == assignment[j])
        && constraints.cannot_link().iter().all(|&(i, j)| assignment[i] != assignment[j])
}

fn finish_evaluation<F: Scalar>(
    inner_objective: F,
    modified_total: F,
    assignment: Vec<usize>,
    centers: Option<Vec<Vec<F>>>,
    medoids: Option<Vec<usize>>,
    constraints: &ConstraintSet,
    multipliers: &MultiplierSet<F>,
    k: usize,
    epsilon: F,
    constant: F,
) -> LagrangianEvaluation<F> {
    let subgradients = slacks_for(&assignment, constraints, k, epsilon);
    let penalty = multipliers.dot(&subgradients);
    let value = inner_objective + penalty;
    // Cross-check: the slack form and the cost-table form of the penalty
    // must describe the same function.
    debug_assert!(
        (value - (modified_total + constant)).abs()
            <= flt::<F>(1e-6) * (F::one() + value.abs()),
        "penalty bookkeeping mismatch"
    );
    let _ = (modified_total, constant);
    let feasible = assignment_feasible(&assignment, constraints);
    LagrangianEvaluation {
        value,
        inner_objective,
        penalty,
        subgradients,
        minimizer: Partition { assignment, k, centers },
        medoids,
        feasible,
    }
}

// ---------------------------------------------------------------------------
// MSSC evaluation
// ---------------------------------------------------------------------------

/// Evaluates the MSSC Lagrangian at `multipliers`, starting the approximate
/// inner minimization from the centers carried by `centers_seed`.
///
/// The inner solve alternates modified-cost assignment (squared distance
/// plus the collected multiplier coefficients, chosen independently per
/// point) with centroid recomputation for `config.inner_rounds` rounds; it
/// is an upper bound on the true inner minimum, so `value` is an estimate
/// rather than a certified bound.
pub fn evaluate_lagrangian_mssc<F: Scalar>(
    data: &Dataset<F>,
    k: usize,
    constraints: &ConstraintSet,
    multipliers: &MultiplierSet<F>,
    centers_seed: &Partition<F>,
    config: &LagrangianConfig<F>,
) -> Result<LagrangianEvaluation<F>> {
    config.validate()?;
    check_problem(data.n(), k, constraints)?;
    multipliers.validate_for(constraints, k, true)?;
    let centers = centers_seed
        .centers
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("centers_seed must carry centers".into()))?;
    if centers.len() != k {
        return Err(Error::InvalidK { k, n: centers.len() });
    }
    for y in centers {
        if y.len() != data.dim() {
            return Err(Error::DimensionMismatch { expected: data.dim(), found: y.len() });
        }
    }
    Ok(evaluate_mssc_from_centers(data, k, constraints, multipliers, centers, config))
}

pub(crate) fn evaluate_mssc_from_centers<F: Scalar>(
    data: &Dataset<F>,
    k: usize,
    constraints: &ConstraintSet,
    multipliers: &MultiplierSet<F>,
    init_centers: &[Vec<F>],
    config: &LagrangianConfig<F>,
) -> LagrangianEvaluation<F> {
    let n = data.n();
    let table = build_cost_table(n, k, multipliers, config.epsilon);
    let mut centers: Vec<Vec<F>> = init_centers.to_vec();
    let mut assignment: Vec<usize> = vec![0; n];
    for _ in 0..config.inner_rounds {
        for i in 0..n {
            let p = data.point(i);
            let mut best_c = 0usize;
            let mut best = sq_euclidean(p, &centers[0]) + table.w[i][0];
            for (c, y) in centers.iter().enumerate().skip(1) {
                let cost = sq_euclidean(p, y) + table.w[i][c];
                if cost < best {
                    best = cost;
                    best_c = c;
                }
            }
            assignment[i] = best_c;
        }
        // Recompute centroids; an empty cluster keeps its previous center.
        let mut sums = vec![vec![F::zero(); data.dim()]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums[c].iter_mut().zip(data.point(i)) {
                *s = *s + v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let denom = F::from(counts[c]).expect("count fits scalar");
                for (y, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *y = *s / denom;
                }
            }
        }
    }
    let inner = clustering::assignment_cost(data, &assignment, &centers);
    let modified = inner
        + assignment
            .iter()
            .enumerate()
            .fold(F::zero(), |acc, (i, &c)| acc + table.w[i][c]);
    finish_evaluation(
        inner,
        modified,
        assignment,
        Some(centers),
        None,
        constraints,
        multipliers,
        k,
        config.epsilon,
        table.constant,
    )
}

// ---------------------------------------------------------------------------
// k-medoids evaluation
// ---------------------------------------------------------------------------

/// Evaluates the k-medoids Lagrangian at `multipliers`.
///
/// The inner problem is a p-median with per-(point, slot) costs
/// `d(i, m_c) + w[i][c]`, minimized over medoid sets exactly (enumeration,
/// `Exact`) or by swap local search from deterministic built-in starts
/// (`LocalSearch`).
pub fn evaluate_lagrangian_kmedoids<F: Scalar>(
    matrix: &DissimilarityMatrix<F>,
    k: usize,
    constraints: &ConstraintSet,
    multipliers: &MultiplierSet<F>,
    mode: KMedoidsMode,
    config: &LagrangianConfig<F>,
) -> Result<LagrangianEvaluation<F>> {
    config.validate()?;
    check_problem(matrix.n(), k, constraints)?;
    multipliers.validate_for(constraints, k, true)?;
    let starts = match mode {
        KMedoidsMode::Exact => Vec::new(),
        KMedoidsMode::LocalSearch => (0..config.incumbent_restarts)
            .map(|r| {
                let mut rng = rng::stream2(0, TAG_INNER_EVAL, r as u64);
                let mut set = rand::seq::index::sample(&mut rng, matrix.n(), k).into_vec();
                set.sort_unstable();
                set
            })
            .collect(),
    };
    evaluate_kmedoids_with_starts(matrix, k, constraints, multipliers, mode, config, &starts)
}

pub(crate) fn evaluate_kmedoids_with_starts<F: Scalar>(
    matrix: &DissimilarityMatrix<F>,
    k: usize,
    constraints: &ConstraintSet,
    multipliers: &MultiplierSet<F>,
    mode: KMedoidsMode,
    config: &LagrangianConfig<F>,
    starts: &[Vec<usize>],
) -> Result<LagrangianEvaluation<F>> {
    let n = matrix.n();
    let table = build_cost_table(n, k, multipliers, config.epsilon);
    let modified_cost = |set: &[usize]| -> F {
        let mut total = F::zero();
        for i in 0..n {
            let mut best = matrix.get(i, set[0]) + table.w[i][0];
            for (c, &m) in set.iter().enumerate().skip(1) {
                let cost = matrix.get(i, m) + table.w[i][c];
                if cost < best {
                    best = cost;
                }
            }
            total = total + best;
        }
        total
    };
    let medoids = match mode {
        KMedoidsMode::Exact => {
            let combos = count_combinations(n, k);
            if combos > EXACT_ENUMERATION_BUDGET {
                return Err(Error::BudgetExceeded {
                    combinations: combos,
                    budget: EXACT_ENUMERATION_BUDGET,
                });
            }
            // Modified costs can be negative, so no partial-sum pruning here.
            let mut best: Option<Vec<usize>> = None;
            let mut best_cost = F::infinity();
            for_each_combination(n, k, |set| {
                let cost = modified_cost(set);
                if cost < best_cost {
                    best_cost = cost;
                    best = Some(set.to_vec());
                }
            });
            best.expect("enumeration visits at least one set")
        }
        KMedoidsMode::LocalSearch => {
            if starts.is_empty() {
                return Err(Error::InvalidConfig("local search needs at least one start".into()));
            }
            medoid_local_search(n, k, &modified_cost, starts).0
        }
    };
    // Assign by modified cost (ties to the lowest slot), then split the
    // total back into service cost and penalty.
    let mut assignment = Vec::with_capacity(n);
    let mut service = F::zero();
    let mut modified_total = F::zero();
    for i in 0..n {
        let mut best_c = 0usize;
        let mut best = matrix.get(i, medoids[0]) + table.w[i][0];
        for (c, &m) in medoids.iter().enumerate().skip(1) {
            let cost = matrix.get(i, m) + table.w[i][c];
            if cost < best {
                best = cost;
                best_c = c;
            }
        }
        assignment.push(best_c);
        service = service + matrix.get(i, medoids[best_c]);
        modified_total = modified_total + best;
    }
    Ok(finish_evaluation(
        service,
        modified_total,
        assignment,
        None,
        Some(medoids),
        constraints,
        multipliers,
        k,
        config.epsilon,
        table.constant,
    ))
}

fn check_problem(n: usize, k: usize, constraints: &ConstraintSet) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if let Some(max) = constraints.max_index() {
        if max >= n {
            return Err(Error::IndexOutOfRange { index: max, bound: n });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Sub-gradient ascent
// ---------------------------------------------------------------------------

pub(crate) enum Incumbent<F: Scalar> {
    Mssc(MsscState<F>),
    KMedoids(KMedoidsState<F>),
}

impl<F: Scalar> Incumbent<F> {
    pub(crate) fn compute(
        problem: &DualProblem<'_, F>,
        k: usize,
        config: &LagrangianConfig<F>,
        seed: u64,
    ) -> Result<Self> {
        Ok(match problem {
            DualProblem::Mssc { data } => {
                Incumbent::Mssc(kmeans_multistart(data, k, config.incumbent_restarts, seed)?)
            }
            DualProblem::KMedoids { matrix, mode } => Incumbent::KMedoids(kmedoids_solve(
                matrix,
                k,
                *mode,
                config.incumbent_restarts,
                seed,
            )?),
        })
    }

    fn objective(&self) -> F {
        match self {
            Incumbent::Mssc(s) => s.objective,
            Incumbent::KMedoids(s) => s.objective,
        }
    }
}

/// Maximizes the Lagrangian dual with projected sub-gradient ascent.
///
/// Multipliers start at zero, so iteration 1 reproduces the unconstrained
/// solve. Steps follow the Polyak rule `theta = mu * (UB - L) / |g|^2`
/// against a feasibility-repair upper bound, with `mu` halved after
/// `halving_patience` non-improving iterations (floor [`MU_FLOOR`]); each
/// halving pulls the iterate back to the best point and re-evaluates it
/// there before stepping again. The ascent stops on the time limit,
/// `max_iterations`, step collapse ([`STEP_COLLAPSE`]), or a
/// projected-stationary point (every further update would be a no-op;
/// reported as `converged`). `dual_bound` is the value of the best point
/// under the strongest inner search that visited it and the returned
/// multipliers are the ones that achieved it: with exact inner solves that
/// is exactly the running maximum of evaluated L values, while approximate
/// inner solves (local-search k-medoids) re-anchor the bound whenever the
/// best point is re-evaluated with a richer warm-start pool, so an early
/// over-estimate cannot stand as an unbeatable target.
///
/// `seed` drives the incumbent clustering that warm-starts the inner
/// evaluations (`incumbent_restarts` restarts).
pub fn subgradient_solve<F: Scalar>(
    problem: &DualProblem<'_, F>,
    k: usize,
    constraints: &ConstraintSet,
    config: &LagrangianConfig<F>,
    seed: u64,
) -> Result<DualSolution<F>> {
    config.validate()?;
    check_problem(problem.n(), k, constraints)?;
    let incumbent = Incumbent::compute(problem, k, config, seed)?;
    solve_with_incumbent(problem, k, constraints, config, &incumbent)
}

pub(crate) fn solve_with_incumbent<F: Scalar>(
    problem: &DualProblem<'_, F>,
    k: usize,
    constraints: &ConstraintSet,
    config: &LagrangianConfig<F>,
    incumbent: &Incumbent<F>,
) -> Result<DualSolution<F>> {
    config.validate()?;
    check_problem(problem.n(), k, constraints)?;
    let mut multipliers = MultiplierSet::zeros(constraints, k);
    let mut best = multipliers.clone();
    let mut dual_bound = F::neg_infinity();
    let mut upper_bound = repair_upper_bound(problem, k, constraints, incumbent);
    let mut mu = config.initial_mu;
    let mu_floor = flt::<F>(MU_FLOOR);
    let step_collapse = flt::<F>(STEP_COLLAPSE);
    let mut stale = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut reanchor = false;
    // The k-medoids inner search warm-starts from the previous iterate's
    // medoid set plus the lowest-raw-cost ("elite") set discovered so far,
    // so every evaluation covers every good basin already known instead of
    // only the one the trajectory happens to sit in.
    let (mut elite_medoids, mut elite_raw): (Vec<usize>, F) = match incumbent {
        Incumbent::KMedoids(s) => (s.medoids.clone(), s.objective),
        Incumbent::Mssc(_) => (Vec::new(), F::infinity()),
    };
    let mut warm_medoids: Vec<Vec<usize>> = match incumbent {
        Incumbent::KMedoids(s) => vec![s.medoids.clone()],
        Incumbent::Mssc(_) => Vec::new(),
    };
    let start = Instant::now();

    for _ in 0..config.max_iterations {
        iterations += 1;
        let eval = match (problem, incumbent) {
            (DualProblem::Mssc { data }, Incumbent::Mssc(state)) => evaluate_mssc_from_centers(
                data,
                k,
                constraints,
                &multipliers,
                state.centers(),
                config,
            ),
            (DualProblem::KMedoids { matrix, mode }, Incumbent::KMedoids(_)) => {
                let eval = evaluate_kmedoids_with_starts(
                    matrix,
                    k,
                    constraints,
                    &multipliers,
                    *mode,
                    config,
                    &warm_medoids,
                )?;
                if let Some(m) = &eval.medoids {
                    let raw = raw_medoid_cost(matrix, m);
                    if raw < elite_raw {
                        elite_raw = raw;
                        elite_medoids = m.clone();
                    }
                    warm_medoids = if *m == elite_medoids {
                        vec![m.clone()]
                    } else {
                        vec![m.clone(), elite_medoids.clone()]
                    };
                }
                eval
            }
            _ => return Err(Error::DualMismatch("incumbent does not match problem".into())),
        };

        if eval.feasible {
            upper_bound = upper_bound.min(eval.inner_objective);
        }
        // Each inner minimizer offers a feasible solution after repair; the
        // running minimum keeps the Polyak gap — and with it the step size —
        // calibrated to the instance instead of to the initial incumbent.
        upper_bound = upper_bound.min(repair_from_evaluation(problem, k, constraints, &eval));

        if std::env::var_os("DUALCLUST_TRACE").is_some() {
            let g = &eval.subgradients;
            eprintln!(
                "t={iterations:4} mu={:9.3e} L={:12.5} best={:12.5} UB={:12.3} normsq={:9.3} reanchor={} stale={stale}",
                mu.to_f64().unwrap_or(f64::NAN),
                eval.value.to_f64().unwrap_or(f64::NAN),
                dual_bound.to_f64().unwrap_or(f64::NAN),
                upper_bound.to_f64().unwrap_or(f64::NAN),
                g.norm_sq().to_f64().unwrap_or(f64::NAN),
                reanchor,
            );
        }
        if reanchor {
            // This evaluation re-visits the best point right after a halving
            // pulled the iterate back to it. The warm-start pool can only
            // have grown since the bound was recorded, so the fresh value
            // supersedes the stored one: an early evaluation that missed a
            // better inner basin would otherwise stand as an unbeatable
            // target and pin the ascent at its starting point. Exact inner
            // solves reproduce the stored value exactly.
            reanchor = false;
            dual_bound = eval.value;
            best = multipliers.clone();
            stale = 0;
        } else if eval.value > dual_bound {
            dual_bound = eval.value;
            best = multipliers.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.halving_patience {
                // Pull the iterate back to the best point before continuing
                // with the halved step scale; otherwise an early overshoot
                // can strand the ascent in a region the shrinking steps can
                // no longer leave. The next iteration evaluates at that
                // point (re-anchoring the bound) and steps along its own
                // sub-gradient rather than the abandoned iterate's.
                mu = (mu / flt(2.0)).max(mu_floor);
                multipliers = best.clone();
                stale = 0;
                reanchor = true;
                if start.elapsed().as_secs_f64() > config.time_limit_seconds {
                    break;
                }
                continue;
            }
        }

        let g = &eval.subgradients;
        if multipliers.projected_stationary(g) {
            converged = true;
            break;
        }
        let norm_sq = g.norm_sq();
        debug_assert!(norm_sq > F::zero(), "non-stationary point has a non-zero slack");
        let mut gap = upper_bound - eval.value;
        if !(gap > F::zero()) {
            // The estimate overtook the heuristic upper bound (possible with
            // approximate inner solves); keep ascending with a small lift.
            gap = flt::<F>(1e-3) * (F::one() + eval.value.abs());
        }
        let theta = mu * gap / norm_sq;
        if theta < step_collapse {
            converged = true;
            break;
        }
        multipliers.axpy_project(theta, g);

        if start.elapsed().as_secs_f64() > config.time_limit_seconds {
            break;
        }
    }

    Ok(DualSolution {
        k,
        dual_bound,
        iterations,
        converged,
        must_link: best.must_link,
        cannot_link: best.cannot_link,
    })
}

/// Objective of a constraint-respecting assignment built greedily on the
/// incumbent's geometry: must-link groups (union-find) are placed whole,
/// avoiding slots taken by cannot-link-adjacent groups, cheapest slot first.
/// Falls back to the incumbent objective when the greedy placement gets
/// stuck; the ascent lifts the gap if that value is ever undercut.
fn repair_upper_bound<F: Scalar>(
    problem: &DualProblem<'_, F>,
    k: usize,
    constraints: &ConstraintSet,
    incumbent: &Incumbent<F>,
) -> F {
    let slot_cost = |i: usize, c: usize| -> F {
        match (problem, incumbent) {
            (DualProblem::Mssc { data }, Incumbent::Mssc(state)) => {
                sq_euclidean(data.point(i), &state.centers()[c])
            }
            (DualProblem::KMedoids { matrix, .. }, Incumbent::KMedoids(state)) => {
                matrix.get(i, state.medoids[c])
            }
            _ => F::infinity(),
        }
    };
    match repair_assignment(problem.n(), k, constraints, slot_cost) {
        Some(assignment) => feasible_assignment_cost(problem, k, &assignment),
        None => incumbent.objective(),
    }
}

/// [`repair_upper_bound`] against the geometry of an inner minimizer instead
/// of the incumbent: the evaluation's medoid set (k-medoids) or centers
/// (MSSC). Returns infinity when the placement gets stuck, so callers only
/// ever tighten their bound with it.
fn repair_from_evaluation<F: Scalar>(
    problem: &DualProblem<'_, F>,
    k: usize,
    constraints: &ConstraintSet,
    eval: &LagrangianEvaluation<F>,
) -> F {
    let assignment = match problem {
        DualProblem::Mssc { data } => {
            let Some(centers) = &eval.minimizer.centers else {
                return F::infinity();
            };
            let slot_cost = |i: usize, c: usize| sq_euclidean(data.point(i), &centers[c]);
            repair_assignment(data.n(), k, constraints, slot_cost)
        }
        DualProblem::KMedoids { matrix, .. } => {
            let Some(medoids) = &eval.medoids else {
                return F::infinity();
            };
            let slot_cost = |i: usize, c: usize| matrix.get(i, medoids[c]);
            repair_assignment(matrix.n(), k, constraints, slot_cost)
        }
    };
    match assignment {
        Some(assignment) => feasible_assignment_cost(problem, k, &assignment),
        None => F::infinity(),
    }
}

/// Unconstrained k-medoids objective of a medoid set: every point served by
/// its nearest medoid.
fn raw_medoid_cost<F: Scalar>(matrix: &DissimilarityMatrix<F>, medoids: &[usize]) -> F {
    let mut total = F::zero();
    for i in 0..matrix.n() {
        let mut best = matrix.get(i, medoids[0]);
        for &m in &medoids[1..] {
            best = best.min(matrix.get(i, m));
        }
        total = total + best;
    }
    total
}

/// Objective of a feasible assignment with its cluster representatives
/// re-optimized: per-slot centroids for MSSC, per-slot best member medoid
/// for k-medoids. Empty slots contribute nothing. Always an upper bound on
/// the constrained optimum, and never worse than costing the assignment
/// against the geometry that guided its construction.
fn feasible_assignment_cost<F: Scalar>(
    problem: &DualProblem<'_, F>,
    k: usize,
    assignment: &[usize],
) -> F {
    let mut total = F::zero();
    match problem {
        DualProblem::Mssc { data } => {
            let dim = data.dim();
            let mut sums = vec![vec![F::zero(); dim]; k];
            let mut counts = vec![0usize; k];
            for (i, &c) in assignment.iter().enumerate() {
                counts[c] += 1;
                for (s, &x) in sums[c].iter_mut().zip(data.point(i)) {
                    *s = *s + x;
                }
            }
            for (sum, &count) in sums.iter_mut().zip(&counts) {
                if count > 0 {
                    let inv = F::one() / flt::<F>(count as f64);
                    for s in sum.iter_mut() {
                        *s = *s * inv;
                    }
                }
            }
            for (i, &c) in assignment.iter().enumerate() {
                total = total + sq_euclidean(data.point(i), &sums[c]);
            }
        }
        DualProblem::KMedoids { matrix, .. } => {
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
            for (i, &c) in assignment.iter().enumerate() {
                members[c].push(i);
            }
            for slot in &members {
                if slot.is_empty() {
                    continue;
                }
                let mut best = F::infinity();
                for &m in slot {
                    let cost = slot.iter().fold(F::zero(), |acc, &i| acc + matrix.get(i, m));
                    if cost < best {
                        best = cost;
                    }
                }
                total = total + best;
            }
        }
    }
    total
}

/// Greedy constraint-respecting placement against fixed per-slot costs;
/// `None` when a cannot-link sits inside a must-link group or a group ends
/// up with every slot blocked.
fn repair_assignment<F: Scalar>(
    n: usize,
    k: usize,
    constraints: &ConstraintSet,
    slot_cost: impl Fn(usize, usize) -> F,
) -> Option<Vec<usize>> {
    // Union-find with union-by-minimum, so each root is its group's
    // smallest member (gives a deterministic group order).
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j) in constraints.must_link() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }
    let mut members: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        members.entry(r).or_default().push(i);
    }
    // Cannot-link adjacency between group roots.
    let mut adjacency: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    for &(i, j) in constraints.cannot_link() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a == b {
            // A cannot-link inside a must-link group: unrepairable.
            return None;
        }
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }

    let constrained = |root: &usize| -> bool {
        members[root].len() > 1 || adjacency.contains_key(root)
    };
    let mut slot_of: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    let mut assignment = vec![0usize; n];
    // Constrained groups first (deterministic root order), then free points.
    let roots: Vec<usize> = members.keys().copied().collect();
    for root in roots.iter().filter(|r| constrained(r)) {
        let blocked: Vec<usize> = adjacency
            .get(root)
            .map(|neigh| neigh.iter().filter_map(|g| slot_of.get(g).copied()).collect())
            .unwrap_or_default();
        let mut best: Option<(F, usize)> = None;
        for c in 0..k {
            if blocked.contains(&c) {
                continue;
            }
            let cost = members[root]
                .iter()
                .fold(F::zero(), |acc, &i| acc + slot_cost(i, c));
            if best.map_or(true, |(b, _)| cost < b) {
                best = Some((cost, c));
            }
        }
        // Every slot blocked by a neighbor: give up on repair.
        let (_, c) = best?;
        slot_of.insert(*root, c);
        for &i in &members[root] {
            assignment[i] = c;
        }
    }
    for root in roots.iter().filter(|r| !constrained(r)) {
        let i = members[root][0];
        let mut best = (slot_cost(i, 0), 0);
        for c in 1..k {
            let cost = slot_cost(i, c);
            if cost < best.0 {
                best = (cost, c);
            }
        }
        assignment[i] = best.1;
    }
    Some(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{pairwise_matrix, Metric};
    use crate::types::validate_constraints;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn line_data() -> (Dataset<f64>, DissimilarityMatrix<f64>) {
        let data =
            Dataset::new(vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]], None, None).unwrap();
        let matrix = pairwise_matrix(&data, &Metric::Manhattan).unwrap();
        (data, matrix)
    }

    fn config() -> LagrangianConfig<f64> {
        LagrangianConfig { time_limit_seconds: 30.0, ..LagrangianConfig::default() }
    }

    #[test]
    fn config_validation() {
        assert!(config().validate().is_ok());
        let bad = LagrangianConfig { epsilon: 1.0, ..config() };
        assert!(matches!(bad.validate(), Err(Error::InvalidEpsilon(_))));
        let bad = LagrangianConfig { epsilon: 0.0, ..config() };
        assert!(bad.validate().is_err());
        let bad = LagrangianConfig { max_iterations: 0, ..config() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_multipliers_reproduce_the_unconstrained_mssc_value() {
        let data = Dataset::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![10.0, 0.0], vec![11.0, 0.0]],
            None,
            None,
        )
        .unwrap();
        let constraints = validate_constraints(&[(0, 1)], &[(0, 2)], 4).unwrap();
        let incumbent = kmeans_multistart(&data, 2, 8, 7).unwrap();
        let zeros = MultiplierSet::zeros(&constraints, 2);
        let eval = evaluate_lagrangian_mssc(
            &data,
            2,
            &constraints,
            &zeros,
            &incumbent.partition,
            &config(),
        )
        .unwrap();
        assert_abs_diff_eq!(eval.value, incumbent.objective, epsilon = 1e-12);
        assert_abs_diff_eq!(eval.penalty, 0.0, epsilon = 1e-12);
        assert!(eval.feasible);
    }

    #[test]
    fn cannot_link_coassigned_penalty_is_half() {
        // One cluster, one cannot-link pair, eta = -1 on that cluster,
        // epsilon = 0.5: the pair is necessarily co-assigned, slack is
        // 1 + 0.5 - 2 = -0.5, and the penalty is (-1)(-0.5) = +0.5.
        let data = Dataset::new(vec![vec![0.0], vec![0.0]], None, None).unwrap();
        let constraints = validate_constraints(&[], &[(0, 1)], 2).unwrap();
        let mut mult = MultiplierSet::zeros(&constraints, 1);
        mult.cannot_link[0].eta[0] = -1.0;
        let incumbent = kmeans_multistart(&data, 1, 1, 0).unwrap();
        let eval = evaluate_lagrangian_mssc(
            &data,
            1,
            &constraints,
            &mult,
            &incumbent.partition,
            &config(),
        )
        .unwrap();
        assert_abs_diff_eq!(eval.penalty, 0.5, epsilon = 1e-12);
        assert!(!eval.feasible);
    }

    #[test]
    fn must_link_split_penalty_single_cluster_contribution() {
        // k = 2, a must-link pair forced apart. With lambda = gamma = -1 on
        // the cluster holding point i only, the contribution is
        // (-1)(0.5 + 1) + (-1)(0.5 - 1) = -1.
        let (_, matrix) = line_data();
        let constraints = validate_constraints(&[(0, 2)], &[], 4).unwrap();
        let mut mult = MultiplierSet::zeros(&constraints, 2);
        let eval0 = evaluate_lagrangian_kmedoids(
            &matrix,
            2,
            &constraints,
            &mult,
            KMedoidsMode::Exact,
            &config(),
        )
        .unwrap();
        // Unconstrained optimum splits 0 and 2 across slots.
        let slot_i = eval0.minimizer.assignment[0];
        assert_ne!(slot_i, eval0.minimizer.assignment[2]);
        mult.must_link[0].lambda[slot_i] = -1.0;
        mult.must_link[0].gamma[slot_i] = -1.0;
        let slacks = &eval0.subgradients.must_link[0];
        let contribution =
            -1.0 * slacks.lambda[slot_i] + -1.0 * slacks.gamma[slot_i];
        assert_abs_diff_eq!(contribution, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn mssc_value_bounds_the_exhaustive_inner_minimum() {
        // Brute-force the true inner minimum over all assignments and check
        // the library value is an upper bound.
        let mut rng = crate::rng::stream(3, 99);
        for trial in 0..6u64 {
            let n = 6 + (trial as usize % 3);
            let data = Dataset::new(
                (0..n)
                    .map(|_| (0..2).map(|_| rng.random_range(-3.0..3.0)).collect())
                    .collect(),
                None,
                None,
            )
            .unwrap();
            let constraints = validate_constraints(&[(0, 1)], &[(1, 2)], n).unwrap();
            let mut mult = MultiplierSet::zeros(&constraints, 2);
            for m in &mut mult.must_link {
                for c in 0..2 {
                    m.lambda[c] = -rng.random_range(0.0..2.0);
                    m.gamma[c] = -rng.random_range(0.0..2.0);
                }
            }
            for cl in &mut mult.cannot_link {
                for c in 0..2 {
                    cl.eta[c] = -rng.random_range(0.0..2.0);
                }
            }
            let incumbent = kmeans_multistart(&data, 2, 8, trial).unwrap();
            let eval = evaluate_lagrangian_mssc(
                &data,
                2,
                &constraints,
                &mult,
                &incumbent.partition,
                &config(),
            )
            .unwrap();
            // Oracle: minimize f(x) + penalty(x) over every assignment,
            // with centroids optimal for each assignment.
            let mut best = f64::INFINITY;
            for code in 0..(1usize << n) {
                let assignment: Vec<usize> = (0..n).map(|i| (code >> i) & 1).collect();
                let mut sizes = vec![0usize; 2];
                for &a in &assignment {
                    sizes[a] += 1;
                }
                let centers = crate::clustering::centroids(&data, &assignment, 2, &sizes);
                let f = crate::clustering::assignment_cost(&data, &assignment, &centers);
                let slacks = slacks_for(&assignment, &constraints, 2, 0.5);
                best = best.min(f + mult.dot(&slacks));
            }
            assert!(
                best <= eval.value + 1e-9,
                "library value {} undercuts the exhaustive inner minimum {best}",
                eval.value
            );
        }
    }

    #[test]
    fn kmedoids_zero_multipliers_match_the_plain_solver() {
        let (_, matrix) = line_data();
        let constraints = validate_constraints(&[], &[(0, 1)], 4).unwrap();
        let zeros = MultiplierSet::zeros(&constraints, 2);
        for mode in [KMedoidsMode::Exact, KMedoidsMode::LocalSearch] {
            let eval = evaluate_lagrangian_kmedoids(
                &matrix,
                2,
                &constraints,
                &zeros,
                mode,
                &config(),
            )
            .unwrap();
            let plain = kmedoids_solve(&matrix, 2, KMedoidsMode::Exact, 1, 0).unwrap();
            assert_abs_diff_eq!(eval.value, plain.objective, epsilon = 1e-12);
            assert_abs_diff_eq!(eval.penalty, 0.0, epsilon = 1e-12);
        }
    }

    /// Brute-force constrained k-medoids optimum: every medoid set crossed
    /// with every constraint-feasible slot assignment.
    fn constrained_optimum(
        matrix: &DissimilarityMatrix<f64>,
        k: usize,
        constraints: &ConstraintSet,
    ) -> f64 {
        let n = matrix.n();
        let mut best = f64::INFINITY;
        for_each_combination(n, k, |set| {
            let mut assignment = vec![0usize; n];
            loop {
                if assignment_feasible(&assignment, constraints) {
                    let cost: f64 =
                        (0..n).map(|i| matrix.get(i, set[assignment[i]])).sum();
                    best = best.min(cost);
                }
                // Odometer over assignments.
                let mut pos = 0;
                loop {
                    if pos == n {
                        return;
                    }
                    assignment[pos] += 1;
                    if assignment[pos] < k {
                        break;
                    }
                    assignment[pos] = 0;
                    pos += 1;
                }
            }
        });
        best
    }

    #[test]
    fn weak_duality_on_a_hand_instance() {
        let (_, matrix) = line_data();
        let constraints = validate_constraints(&[], &[(0, 1)], 4).unwrap();
        let optimum = constrained_optimum(&matrix, 2, &constraints);
        assert_abs_diff_eq!(optimum, 10.0, epsilon = 1e-12);

        let problem = DualProblem::KMedoids { matrix: &matrix, mode: KMedoidsMode::Exact };
        let cfg = LagrangianConfig { max_iterations: 300, ..config() };
        let solution = subgradient_solve(&problem, 2, &constraints, &cfg, 1).unwrap();
        // Weak duality, and the bound must improve on the unconstrained
        // optimum (2.0) once the violated pair is penalized.
        assert!(solution.dual_bound <= optimum + 1e-9);
        assert!(solution.dual_bound > 2.0 + 0.5, "bound {} never rose", solution.dual_bound);
        solution.validate_for(&constraints, 2).unwrap();
    }

    #[test]
    fn satisfied_constraints_keep_multipliers_at_zero() {
        let (_, matrix) = line_data();
        // The unconstrained optimum pairs {0,1} and {10,11}; these
        // constraints agree with it.
        let constraints = validate_constraints(&[(0, 1), (2, 3)], &[(0, 2)], 4).unwrap();
        let problem = DualProblem::KMedoids { matrix: &matrix, mode: KMedoidsMode::Exact };
        let solution = subgradient_solve(&problem, 2, &constraints, &config(), 5).unwrap();
        assert!(solution.converged);
        assert_eq!(solution.iterations, 1);
        let tau = config().tau_for(solution.dual_bound);
        for m in &solution.must_link {
            assert!(m.lambda.iter().chain(&m.gamma).all(|v| v.abs() <= tau));
        }
        for c in &solution.cannot_link {
            assert!(c.eta.iter().all(|v| v.abs() <= tau));
        }
        assert_abs_diff_eq!(solution.dual_bound, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn empty_constraint_set_returns_the_unconstrained_objective() {
        let (data, matrix) = line_data();
        let constraints = validate_constraints(&[], &[], 4).unwrap();
        let problem = DualProblem::KMedoids { matrix: &matrix, mode: KMedoidsMode::Exact };
        let solution = subgradient_solve(&problem, 2, &constraints, &config(), 3).unwrap();
        assert!(solution.converged);
        assert!(solution.must_link.is_empty() && solution.cannot_link.is_empty());
        assert_abs_diff_eq!(solution.dual_bound, 2.0, epsilon = 1e-12);

        let mssc = DualProblem::Mssc { data: &data };
        let solution = subgradient_solve(&mssc, 2, &constraints, &config(), 3).unwrap();
        let incumbent = kmeans_multistart(&data, 2, 10, 3).unwrap();
        assert_abs_diff_eq!(solution.dual_bound, incumbent.objective, epsilon = 1e-12);
    }

    #[test]
    fn multipliers_stay_non_positive_along_the_ascent() {
        let mut rng = crate::rng::stream(11, 5);
        for trial in 0..5u64 {
            let n = 8;
            let data = Dataset::new(
                (0..n)
                    .map(|_| (0..2).map(|_| rng.random_range(-4.0..4.0)).collect())
                    .collect(),
                None,
                None,
            )
            .unwrap();
            let matrix = pairwise_matrix(&data, &Metric::Euclidean).unwrap();
            let constraints = validate_constraints(&[(0, 3)], &[(1, 2), (4, 5)], n).unwrap();
            let problem =
                DualProblem::KMedoids { matrix: &matrix, mode: KMedoidsMode::Exact };
            let cfg = LagrangianConfig { max_iterations: 80, ..config() };
            let solution = subgradient_solve(&problem, 2, &constraints, &cfg, trial).unwrap();
            // validate_for enforces the sign restriction on every multiplier.
            solution.validate_for(&constraints, 2).unwrap();
            assert!(solution.iterations >= 1);
        }
    }

    #[test]
    fn evaluation_value_matches_its_minimizer_bookkeeping() {
        let (data, matrix) = line_data();
        let constraints = validate_constraints(&[(0, 2)], &[(0, 1)], 4).unwrap();
        let mut mult = MultiplierSet::zeros(&constraints, 2);
        mult.must_link[0].lambda[0] = -0.7;
        mult.must_link[0].gamma[1] = -0.3;
        mult.cannot_link[0].eta[0] = -1.1;

        let eval = evaluate_lagrangian_kmedoids(
            &matrix,
            2,
            &constraints,
            &mult,
            KMedoidsMode::Exact,
            &config(),
        )
        .unwrap();
        let recomputed = eval.inner_objective + mult.dot(&eval.subgradients);
        assert_abs_diff_eq!(eval.value, recomputed, epsilon = 1e-9 * (1.0 + eval.value.abs()));

        let incumbent = kmeans_multistart(&data, 2, 8, 2).unwrap();
        let eval = evaluate_lagrangian_mssc(
            &data,
            2,
            &constraints,
            &mult,
            &incumbent.partition,
            &config(),
        )
        .unwrap();
        let slack_dot = mult.dot(&eval.subgradients);
        assert_abs_diff_eq!(
            eval.value,
            eval.inner_objective + slack_dot,
            epsilon = 1e-9 * (1.0 + eval.value.abs())
        );
        // The minimizer partition carries the centers used for the value.
        let f = crate::clustering::mssc_objective(&data, &eval.minimizer).unwrap();
        assert_abs_diff_eq!(eval.inner_objective, f, epsilon = 1e-9 * (1.0 + f));
    }

    #[test]
    fn positive_multipliers_are_rejected() {
        let (_, matrix) = line_data();
        let constraints = validate_constraints(&[], &[(0, 1)], 4).unwrap();
        let mut mult = MultiplierSet::zeros(&constraints, 2);
        mult.cannot_link[0].eta[1] = 0.25;
        let err = evaluate_lagrangian_kmedoids(
            &matrix,
            2,
            &constraints,
            &mult,
            KMedoidsMode::Exact,
            &config(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::PositiveMultiplier { .. }));
    }

    #[test]
    fn repair_upper_bound_hits_the_constrained_optimum_here() {
        let (_, matrix) = line_data();
        let constraints = validate_constraints(&[], &[(0, 1)], 4).unwrap();
        let cfg = config();
        let incumbent = Incumbent::compute(
            &DualProblem::KMedoids { matrix: &matrix, mode: KMedoidsMode::Exact },
            2,
            &cfg,
            0,
        )
        .unwrap();
        let ub = repair_upper_bound(
            &DualProblem::KMedoids { matrix: &matrix, mode: KMedoidsMode::Exact },
            2,
            &constraints,
            &incumbent,
        );
        assert_abs_diff_eq!(ub, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn unrepairable_constraints_fall_back_to_the_incumbent_objective() {
        let (_, matrix) = line_data();
        // Transitive must-links joining a cannot-link pair.
        let constraints = validate_constraints(&[(0, 1), (1, 2)], &[(0, 2)], 4).unwrap();
        let cfg = config();
        let problem = DualProblem::KMedoids { matrix: &matrix, mode: KMedoidsMode::Exact };
        let incumbent = Incumbent::compute(&problem, 2, &cfg, 0).unwrap();
        let ub = repair_upper_bound(&problem, 2, &constraints, &incumbent);
        assert_abs_diff_eq!(ub, incumbent.objective(), epsilon = 1e-12);
    }

    #[test]
    fn scaled_multiplier_helpers_behave() {
        let constraints = validate_constraints(&[(0, 1)], &[(2, 3)], 4).unwrap();
        let mut m = MultiplierSet::zeros(&constraints, 3);
        m.must_link[0].lambda[1] = -0.5;
        m.cannot_link[0].eta[2] = -2.0;
        let doubled = m.scaled(2.0);
        assert_eq!(doubled.must_link[0].lambda[1], -1.0);
        assert_eq!(doubled.cannot_link[0].eta[2], -4.0);
        assert_abs_diff_eq!(m.norm_sq(), 0.25 + 4.0, epsilon = 1e-15);
    }
}
