//! Unconstrained clustering solvers and single-point move costs.
//!
//! * MSSC (minimum sum of squared distances to cluster centroids) via
//!   Lloyd's algorithm with uniform random restarts,
//! * k-medoids over a precomputed dissimilarity matrix, either exactly by
//!   enumerating medoid sets (with partial-sum pruning against the
//!   incumbent) or by best-improvement swap local search,
//! * the closed-form cost of moving one point between MSSC clusters,
//!   with a guarded variant that prices forbidden moves at infinity.

use rayon::prelude::*;

use crate::metrics::sq_euclidean;
use crate::rng::{self, TAG_KMEANS_RESTART, TAG_KMEDOIDS_RESTART};
use crate::transform::ForbiddenList;
use crate::types::{Dataset, DissimilarityMatrix, Partition};
use crate::{flt, Error, Result, Scalar};

/// Cap on Lloyd iterations per restart; reached only on pathological inputs.
const MAX_LLOYD_ITERATIONS: usize = 500;
/// Cap on swap sweeps per local-search start.
const MAX_SWAP_SWEEPS: usize = 200;
/// Largest number of medoid sets the exact solver will enumerate.
pub const EXACT_ENUMERATION_BUDGET: u128 = 10_000_000;

/// An MSSC solution: a partition with centers, its objective, and the
/// cluster sizes. All clusters are non-empty.
#[derive(Clone, Debug, PartialEq)]
pub struct MsscState<F: Scalar> {
    pub partition: Partition<F>,
    pub objective: F,
    pub cluster_sizes: Vec<usize>,
}

impl<F: Scalar> MsscState<F> {
    /// Builds a state from an assignment by computing centroids, sizes, and
    /// the objective. Every cluster must be non-empty.
    pub fn from_partition(data: &Dataset<F>, partition: &Partition<F>) -> Result<Self> {
        partition.validate()?;
        if partition.n() != data.n() {
            return Err(Error::LengthMismatch { a: data.n(), b: partition.n() });
        }
        let sizes = partition.cluster_sizes();
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidK { k: partition.k, n: data.n() });
        }
        let centers = centroids(data, &partition.assignment, partition.k, &sizes);
        let objective = assignment_cost(data, &partition.assignment, &centers);
        Ok(MsscState {
            partition: Partition {
                assignment: partition.assignment.clone(),
                k: partition.k,
                centers: Some(centers),
            },
            objective,
            cluster_sizes: sizes,
        })
    }

    pub fn centers(&self) -> &[Vec<F>] {
        self.partition.centers.as_deref().expect("MsscState always has centers")
    }

    pub fn assignment(&self) -> &[usize] {
        &self.partition.assignment
    }

    /// Moves point `i` to cluster `c_to`, updating the assignment, sizes,
    /// centroids, and objective incrementally. Returns the objective change
    /// (the same value [`delta_move`] predicts).
    pub fn apply_move(&mut self, data: &Dataset<F>, i: usize, c_to: usize) -> Result<F> {
        let c_from = *self
            .partition
            .assignment
            .get(i)
            .ok_or(Error::IndexOutOfRange { index: i, bound: self.partition.n() })?;
        if c_to >= self.partition.k {
            return Err(Error::IndexOutOfRange { index: c_to, bound: self.partition.k });
        }
        if c_from == c_to {
            return Ok(F::zero());
        }
        let delta = delta_move(self, data, i, c_from, c_to)?;
        let o = data.point(i);
        let (nf, nt) = (self.cluster_sizes[c_from], self.cluster_sizes[c_to]);
        let centers = self.partition.centers.as_mut().expect("centers present");
        let nf_f = F::from(nf).expect("cluster size fits scalar");
        let nt_f = F::from(nt).expect("cluster size fits scalar");
        for d in 0..o.len() {
            centers[c_from][d] = (centers[c_from][d] * nf_f - o[d]) / (nf_f - F::one());
            centers[c_to][d] = (centers[c_to][d] * nt_f + o[d]) / (nt_f + F::one());
        }
        self.cluster_sizes[c_from] -= 1;
        self.cluster_sizes[c_to] += 1;
        self.partition.assignment[i] = c_to;
        self.objective = self.objective + delta;
        Ok(delta)
    }

    /// Consistency check for tests and debugging: sizes, centroid means, and
    /// the objective all agree with a from-scratch recomputation.
    pub fn validate(&self, data: &Dataset<F>) -> Result<()> {
        let recomputed = MsscState::from_partition(data, &self.partition)?;
        let tol = flt::<F>(1e-9);
        if recomputed.cluster_sizes != self.cluster_sizes {
            return Err(Error::InvalidConfig("cluster sizes out of sync".into()));
        }
        for (a, b) in self.centers().iter().zip(recomputed.centers()) {
            for (&x, &y) in a.iter().zip(b) {
                if (x - y).abs() > tol * (F::one() + y.abs()) {
                    return Err(Error::InvalidConfig("centers are not centroid means".into()));
                }
            }
        }
        let diff = (self.objective - recomputed.objective).abs();
        if diff > tol * (F::one() + recomputed.objective.abs()) {
            return Err(Error::InvalidConfig("objective out of sync".into()));
        }
        Ok(())
    }
}

/// A k-medoids solution over a dissimilarity matrix. `medoids` is sorted
/// ascending and `assignment[i]` indexes into it ("cluster slots").
#[derive(Clone, Debug, PartialEq)]
pub struct KMedoidsState<F: Scalar> {
    pub medoids: Vec<usize>,
    pub assignment: Vec<usize>,
    pub objective: F,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KMedoidsMode {
    /// Enumerate every medoid set (counts must stay within
    /// [`EXACT_ENUMERATION_BUDGET`]).
    Exact,
    /// Best-improvement swap local search from random starts.
    LocalSearch,
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

/// Lloyd's algorithm from `restarts` uniform random initializations (k
/// distinct data points each); returns the lowest-objective state. Runs are
/// independent and deterministic in `seed`; ties go to the earliest restart.
pub fn kmeans_multistart<F: Scalar>(
    data: &Dataset<F>,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<MsscState<F>> {
    if k == 0 || k > data.n() {
        return Err(Error::InvalidK { k, n: data.n() });
    }
    if restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be at least 1".into()));
    }
    let best = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let state = kmeans_single(data, k, seed, r as u64).0;
            (r, state)
        })
        .min_by(|(ra, a), (rb, b)| {
            a.objective
                .partial_cmp(&b.objective)
                .expect("objectives are finite")
                .then(ra.cmp(rb))
        })
        .expect("at least one restart");
    Ok(best.1)
}

/// One Lloyd run. Also returns the per-iteration objective trace (measured
/// after each centroid update), which is non-increasing.
fn kmeans_single<F: Scalar>(
    data: &Dataset<F>,
    k: usize,
    seed: u64,
    restart: u64,
) -> (MsscState<F>, Vec<F>) {
    let n = data.n();
    let mut rng = rng::stream2(seed, TAG_KMEANS_RESTART, restart);
    let init = rand::seq::index::sample(&mut rng, n, k);
    let centers: Vec<Vec<F>> = init.iter().map(|i| data.point(i).to_vec()).collect();
    lloyd(data, k, centers, Vec::new(), F::infinity())
}

/// Lloyd's algorithm re-converged from an existing assignment: recomputes
/// that assignment's centroids on `data` and iterates to a fixpoint. After
/// small coordinate edits this lands in the incumbent's local optimum rather
/// than hopping to a near-tied competitor, which is what coordinate-editing
/// loops need between edits.
pub fn kmeans_polish<F: Scalar>(
    data: &Dataset<F>,
    k: usize,
    assignment: &[usize],
) -> Result<MsscState<F>> {
    if k == 0 || k > data.n() {
        return Err(Error::InvalidK { k, n: data.n() });
    }
    if assignment.len() != data.n() {
        return Err(Error::LengthMismatch { a: assignment.len(), b: data.n() });
    }
    let mut sizes = vec![0usize; k];
    for &c in assignment {
        if c >= k {
            return Err(Error::IndexOutOfRange { index: c, bound: k });
        }
        sizes[c] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::IndexOutOfRange { index: empty, bound: k });
    }
    let centers = centroids(data, assignment, k, &sizes);
    let objective = assignment_cost(data, assignment, &centers);
    let (state, _) = lloyd(data, k, centers, assignment.to_vec(), objective);
    Ok(state)
}

/// The Lloyd loop shared by fresh restarts and warm starts: alternate
/// nearest-center assignment and centroid updates until the assignment is a
/// fixpoint. `assignment`/`objective` describe the starting point (empty and
/// +inf for a fresh start whose first assignment always differs).
fn lloyd<F: Scalar>(
    data: &Dataset<F>,
    k: usize,
    mut centers: Vec<Vec<F>>,
    mut assignment: Vec<usize>,
    mut objective: F,
) -> (MsscState<F>, Vec<F>) {
    let mut trace: Vec<F> = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let new_assignment = assign_nearest(data, &centers);
        if new_assignment == assignment {
            break;
        }
        assignment = new_assignment;
        let mut sizes = vec![0usize; k];
        for &c in &assignment {
            sizes[c] += 1;
        }
        repair_empty_clusters(data, &centers, &mut assignment, &mut sizes);
        centers = centroids(data, &assignment, k, &sizes);
        let obj = assignment_cost(data, &assignment, &centers);
        debug_assert!(
            obj <= objective * (F::one() + flt(1e-12)) + flt(1e-9),
            "Lloyd objective increased: {objective} -> {obj}"
        );
        objective = obj;
        trace.push(obj);
    }
    let sizes = {
        let mut s = vec![0usize; k];
        for &c in &assignment {
            s[c] += 1;
        }
        s
    };
    let state = MsscState {
        partition: Partition { assignment, k, centers: Some(centers) },
        objective,
        cluster_sizes: sizes,
    };
    (state, trace)
}

fn assign_nearest<F: Scalar>(data: &Dataset<F>, centers: &[Vec<F>]) -> Vec<usize> {
    (0..data.n())
        .map(|i| {
            let p = data.point(i);
            let mut best = 0usize;
            let mut best_d = sq_euclidean(p, &centers[0]);
            for (c, y) in centers.iter().enumerate().skip(1) {
                let d = sq_euclidean(p, y);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Classic repair: hand each empty cluster the point currently farthest
/// from its own centroid (only from donor clusters of size >= 2).
fn repair_empty_clusters<F: Scalar>(
    data: &Dataset<F>,
    centers: &[Vec<F>],
    assignment: &mut [usize],
    sizes: &mut [usize],
) {
    loop {
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut donor: Option<(usize, F)> = None;
        for i in 0..assignment.len() {
            let c = assignment[i];
            if sizes[c] < 2 {
                continue;
            }
            let d = sq_euclidean(data.point(i), &centers[c]);
            if donor.map_or(true, |(_, best)| d > best) {
                donor = Some((i, d));
            }
        }
        let (i, _) = donor.expect("k <= n guarantees a donor");
        sizes[assignment[i]] -= 1;
        assignment[i] = empty;
        sizes[empty] += 1;
    }
}

pub(crate) fn centroids<F: Scalar>(
    data: &Dataset<F>,
    assignment: &[usize],
    k: usize,
    sizes: &[usize],
) -> Vec<Vec<F>> {
    let d = data.dim();
    let mut centers = vec![vec![F::zero(); d]; k];
    for (i, &c) in assignment.iter().enumerate() {
        for (acc, &v) in centers[c].iter_mut().zip(data.point(i)) {
            *acc = *acc + v;
        }
    }
    for (c, center) in centers.iter_mut().enumerate() {
        if sizes[c] > 0 {
            let s = F::from(sizes[c]).expect("cluster size fits scalar");
            for v in center.iter_mut() {
                *v = *v / s;
            }
        }
    }
    centers
}

pub(crate) fn assignment_cost<F: Scalar>(
    data: &Dataset<F>,
    assignment: &[usize],
    centers: &[Vec<F>],
) -> F {
    let mut total = F::zero();
    for (i, &c) in assignment.iter().enumerate() {
        total = total + sq_euclidean(data.point(i), &centers[c]);
    }
    total
}

/// MSSC objective of a partition: squared Euclidean distances to the
/// partition's centers when present, else to the centroid means of its
/// assignment.
pub fn mssc_objective<F: Scalar>(data: &Dataset<F>, partition: &Partition<F>) -> Result<F> {
    partition.validate()?;
    if partition.n() != data.n() {
        return Err(Error::LengthMismatch { a: data.n(), b: partition.n() });
    }
    match &partition.centers {
        Some(centers) => {
            if centers.len() != partition.k || centers[0].len() != data.dim() {
                return Err(Error::DimensionMismatch {
                    expected: data.dim(),
                    found: centers[0].len(),
                });
            }
            Ok(assignment_cost(data, &partition.assignment, centers))
        }
        None => {
            let sizes = partition.cluster_sizes();
            let centers = centroids(data, &partition.assignment, partition.k, &sizes);
            Ok(assignment_cost(data, &partition.assignment, &centers))
        }
    }
}

// ---------------------------------------------------------------------------
// Move costs
// ---------------------------------------------------------------------------

/// Exact MSSC objective change for moving point `i` from cluster `c_from`
/// (current size n_f, including `i`) to `c_to` (size n_t):
///
/// ```text
/// delta = n_t/(n_t+1) * |o_i - y_to|^2  -  n_f/(n_f-1) * |o_i - y_from|^2
/// ```
///
/// which accounts for both centroids shifting to the new means.
pub fn delta_move<F: Scalar>(
    state: &MsscState<F>,
    data: &Dataset<F>,
    i: usize,
    c_from: usize,
    c_to: usize,
) -> Result<F> {
    let n = state.partition.n();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, bound: n });
    }
    let k = state.partition.k;
    if c_from >= k {
        return Err(Error::IndexOutOfRange { index: c_from, bound: k });
    }
    if c_to >= k {
        return Err(Error::IndexOutOfRange { index: c_to, bound: k });
    }
    let actual = state.partition.assignment[i];
    if actual != c_from {
        return Err(Error::ClusterMismatch { point: i, expected: c_from, found: actual });
    }
    if c_from == c_to {
        return Ok(F::zero());
    }
    let n_f = state.cluster_sizes[c_from];
    if n_f < 2 {
        return Err(Error::SoleMember { point: i, cluster: c_from });
    }
    let n_t = state.cluster_sizes[c_to];
    let o = data.point(i);
    let gain = sq_euclidean(o, &state.centers()[c_to])
        * F::from(n_t).expect("size fits scalar")
        / F::from(n_t + 1).expect("size fits scalar");
    let loss = sq_euclidean(o, &state.centers()[c_from])
        * F::from(n_f).expect("size fits scalar")
        / F::from(n_f - 1).expect("size fits scalar");
    Ok(gain - loss)
}

/// [`delta_move`] extended with a forbidden list: moving into a forbidden
/// (point, cluster) pair costs infinity, staying put costs zero.
pub fn delta_guarded<F: Scalar>(
    state: &MsscState<F>,
    data: &Dataset<F>,
    i: usize,
    c_from: usize,
    c_to: usize,
    forbidden: &ForbiddenList,
) -> Result<F> {
    if c_from == c_to {
        return Ok(F::zero());
    }
    if forbidden.contains(i, c_to) {
        return Ok(F::infinity());
    }
    delta_move(state, data, i, c_from, c_to)
}

// ---------------------------------------------------------------------------
// k-medoids
// ---------------------------------------------------------------------------

/// Number of k-subsets of n elements, saturating.
pub(crate) fn count_combinations(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if c == u128::MAX {
            return c;
        }
    }
    c
}

/// Visits every sorted k-subset of 0..n in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    debug_assert!(k >= 1 && k <= n);
    let mut comb: Vec<usize> = (0..k).collect();
    loop {
        visit(&comb);
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if comb[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        comb[i] += 1;
        for j in (i + 1)..k {
            comb[j] = comb[j - 1] + 1;
        }
    }
}

/// Serves every point by its cheapest slot in `medoids` (ties to the lowest
/// slot); returns the slot assignment and total cost.
pub(crate) fn assign_to_medoids<F: Scalar>(
    matrix: &DissimilarityMatrix<F>,
    medoids: &[usize],
) -> (Vec<usize>, F) {
    let n = matrix.n();
    let mut assignment = Vec::with_capacity(n);
    let mut total = F::zero();
    for i in 0..n {
        let mut slot = 0usize;
        let mut best = matrix.get(i, medoids[0]);
        for (c, &m) in medoids.iter().enumerate().skip(1) {
            let d = matrix.get(i, m);
            if d < best {
                best = d;
                slot = c;
            }
        }
        assignment.push(slot);
        total = total + best;
    }
    (assignment, total)
}

/// Total service cost of a medoid set, abandoning early once the partial
/// sum exceeds `cap` (sound because distances are non-negative).
fn medoid_cost_capped<F: Scalar>(matrix: &DissimilarityMatrix<F>, medoids: &[usize], cap: F) -> F {
    let n = matrix.n();
    let mut total = F::zero();
    for i in 0..n {
        let mut best = matrix.get(i, medoids[0]);
        for &m in &medoids[1..] {
            let d = matrix.get(i, m);
            if d < best {
                best = d;
            }
        }
        total = total + best;
        if total > cap {
            return total;
        }
    }
    total
}

/// Best-improvement swap local search over medoid sets. `cost_of` sees the
/// candidate set sorted ascending. Starts are tried in order; ties keep the
/// earlier result, so the search is deterministic.
pub(crate) fn medoid_local_search<F: Scalar>(
    n: usize,
    k: usize,
    cost_of: &dyn Fn(&[usize]) -> F,
    starts: &[Vec<usize>],
) -> (Vec<usize>, F) {
    debug_assert!(!starts.is_empty());
    let mut best_set: Option<Vec<usize>> = None;
    let mut best_cost = F::infinity();
    let mut cand: Vec<usize> = Vec::with_capacity(k);
    for start in starts {
        let mut set = start.clone();
        set.sort_unstable();
        let mut in_set = vec![false; n];
        for &m in &set {
            in_set[m] = true;
        }
        let mut cost = cost_of(&set);
        for _ in 0..MAX_SWAP_SWEEPS {
            let mut sweep_best: Option<(F, usize, usize)> = None;
            for s in 0..k {
                for p in 0..n {
                    if in_set[p] {
                        continue;
                    }
                    cand.clear();
                    cand.extend_from_slice(&set);
                    cand[s] = p;
                    cand.sort_unstable();
                    let c = cost_of(&cand);
                    if c < cost && sweep_best.map_or(true, |(b, _, _)| c < b) {
                        sweep_best = Some((c, s, p));
                    }
                }
            }
            let Some((c, s, p)) = sweep_best else {
                break;
            };
            in_set[set[s]] = false;
            in_set[p] = true;
            set[s] = p;
            set.sort_unstable();
            cost = c;
        }
        if best_set.is_none() || cost < best_cost {
            best_cost = cost;
            best_set = Some(set);
        }
    }
    (best_set.expect("at least one start"), best_cost)
}

/// Solves k-medoids over a dissimilarity matrix.
///
/// `Exact` enumerates all k-subsets with pruning and is certified optimal;
/// it refuses instances beyond [`EXACT_ENUMERATION_BUDGET`] sets.
/// `LocalSearch` runs best-improvement swaps from `restarts` random starts.
pub fn kmedoids_solve<F: Scalar>(
    matrix: &DissimilarityMatrix<F>,
    k: usize,
    mode: KMedoidsMode,
    restarts: usize,
    seed: u64,
) -> Result<KMedoidsState<F>> {
    let n = matrix.n();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let medoids = match mode {
        KMedoidsMode::Exact => {
            let combos = count_combinations(n, k);
            if combos > EXACT_ENUMERATION_BUDGET {
                return Err(Error::BudgetExceeded {
                    combinations: combos,
                    budget: EXACT_ENUMERATION_BUDGET,
                });
            }
            let mut best: Option<Vec<usize>> = None;
            let mut best_cost = F::infinity();
            for_each_combination(n, k, |set| {
                let cost = medoid_cost_capped(matrix, set, best_cost);
                if cost < best_cost {
                    best_cost = cost;
                    best = Some(set.to_vec());
                }
            });
            best.expect("combination enumeration is non-empty")
        }
        KMedoidsMode::LocalSearch => {
            if restarts == 0 {
                return Err(Error::InvalidConfig("restarts must be at least 1".into()));
            }
            let starts: Vec<Vec<usize>> = (0..restarts)
                .map(|r| {
                    let mut rng = rng::stream2(seed, TAG_KMEDOIDS_RESTART, r as u64);
                    let mut set = rand::seq::index::sample(&mut rng, n, k).into_vec();
                    set.sort_unstable();
                    set
                })
                .collect();
            medoid_local_search(n, k, &|set| medoid_cost_capped(matrix, set, F::infinity()), &starts)
                .0
        }
    };
    let (assignment, objective) = assign_to_medoids(matrix, &medoids);
    Ok(KMedoidsState { medoids, assignment, objective })
}

/// Service cost of an explicit (medoids, assignment) pair; the assignment
/// need not be nearest-medoid.
pub fn kmedoids_objective<F: Scalar>(
    matrix: &DissimilarityMatrix<F>,
    medoids: &[usize],
    assignment: &[usize],
) -> Result<F> {
    if assignment.len() != matrix.n() {
        return Err(Error::LengthMismatch { a: matrix.n(), b: assignment.len() });
    }
    for &m in medoids {
        if m >= matrix.n() {
            return Err(Error::IndexOutOfRange { index: m, bound: matrix.n() });
        }
    }
    let mut total = F::zero();
    for (i, &slot) in assignment.iter().enumerate() {
        let m = *medoids
            .get(slot)
            .ok_or(Error::IndexOutOfRange { index: slot, bound: medoids.len() })?;
        total = total + matrix.get(i, m);
    }
    Ok(total)
}
