//! Geometry-preserving metric learning by moving points of violated
//! constraints: the outer constraint-ordering loop (dual-guided or random
//! selection), the per-constraint move chooser, and the bisector-crossing
//! move formula.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::clustering::{delta_guarded, kmeans_multistart, MsscState};
use crate::dualtools::impact_scores;
use crate::experiments::adjusted_rand_index;
use crate::lagrangian::{solve_with_incumbent, DualProblem, Incumbent, LagrangianConfig};
use crate::types::{ConstraintKind, ConstraintSet, Dataset, Partition};
use crate::{flt, rng, Error, Result, Scalar};
use rand::Rng;

/// The list of (point, cluster) pairs that may no longer be used as a move
/// destination for that point. A pair is added when the point's coordinates
/// are changed while it is assigned to that cluster, and the list only ever
/// grows during a run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForbiddenList {
    entries: BTreeSet<(usize, usize)>,
}

impl ForbiddenList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true when the pair was newly added.
    pub fn insert(&mut self, point: usize, cluster: usize) -> bool {
        self.entries.insert((point, cluster))
    }

    pub fn contains(&self, point: usize, cluster: usize) -> bool {
        self.entries.contains(&(point, cluster))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().copied()
    }
}

/// How the outer loop picks which violated constraint to satisfy next.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Highest impact score first (ties by constraint order).
    DualGuided,
    /// Uniformly at random among the eligible violated constraints.
    RandomBaseline,
}

/// The bisector-crossing move: where the line through `o` parallel to
/// `y_to - y_from` meets the perpendicular bisector of the two centers
/// (`foot`), and the final location 1% past it (`destination`).
#[derive(Clone, Debug, PartialEq)]
pub struct MoveGeometry<F: Scalar> {
    pub foot: Vec<F>,
    pub destination: Vec<F>,
    /// Signed parameter of the foot along `u = y_to - y_from`: positive when
    /// `o` starts strictly closer to `y_from`.
    pub t: F,
}

/// Computes the full move geometry for relocating `o` from the influence of
/// `y_from` to the side of `y_to`:
///
/// ```text
/// u    = y_to - y_from
/// t    = (|y_to|^2 - |y_from|^2 - 2 o.u) / (2 u.u)
/// foot = o + t u                (on the perpendicular bisector)
/// dest = o + (101/100) t u      (1% past the bisector)
/// ```
pub fn move_point_geometry<F: Scalar>(
    o: &[F],
    y_from: &[F],
    y_to: &[F],
) -> Result<MoveGeometry<F>> {
    let d = o.len();
    if y_from.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: y_from.len() });
    }
    if y_to.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: y_to.len() });
    }
    let mut uu = F::zero();
    let mut ou = F::zero();
    let mut sq_to = F::zero();
    let mut sq_from = F::zero();
    for idx in 0..d {
        let u = y_to[idx] - y_from[idx];
        uu = uu + u * u;
        ou = ou + o[idx] * u;
        sq_to = sq_to + y_to[idx] * y_to[idx];
        sq_from = sq_from + y_from[idx] * y_from[idx];
    }
    if uu == F::zero() {
        return Err(Error::CoincidentCenters);
    }
    let two = flt::<F>(2.0);
    let t = (sq_to - sq_from - two * ou) / (two * uu);
    let overshoot = flt::<F>(1.01);
    let mut foot = Vec::with_capacity(d);
    let mut destination = Vec::with_capacity(d);
    for idx in 0..d {
        let u = y_to[idx] - y_from[idx];
        foot.push(o[idx] + t * u);
        destination.push(o[idx] + overshoot * t * u);
    }
    Ok(MoveGeometry { foot, destination, t })
}

/// New coordinates for a point moved from the side of `y_from` to 1% past
/// the perpendicular bisector toward `y_to`. See [`move_point_geometry`].
pub fn move_point<F: Scalar>(o: &[F], y_from: &[F], y_to: &[F]) -> Result<Vec<F>> {
    Ok(move_point_geometry(o, y_from, y_to)?.destination)
}

/// One executed point relocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: Deserialize<'de>"))]
pub struct AppliedMove<F: Scalar> {
    pub point: usize,
    /// Cluster the point was assigned to when it was moved.
    pub from_cluster: usize,
    /// Cluster whose centroid the point was moved toward.
    pub to_cluster: usize,
    pub old_coords: Vec<F>,
    pub new_coords: Vec<F>,
    /// Euclidean norm of `new_coords - old_coords`.
    pub displacement: F,
}

fn euclidean_displacement<F: Scalar>(a: &[F], b: &[F]) -> F {
    crate::metrics::sq_euclidean(a, b).sqrt()
}

/// Plans the moves that push a violated constraint toward satisfaction.
///
/// Cannot-link: among `u in {i, j}` and destinations `c in m_ij`, pick the
/// pair with the smallest guarded objective change and move that one point.
/// Must-link: pick the destination minimizing the sum of the two guarded
/// changes and move whichever of the pair is not already there. Ties prefer
/// the earlier point (`i`) and then the lowest cluster index. Candidates
/// whose change is infinite (forbidden destination) or whose source cluster
/// would be emptied are skipped; if nothing remains the call fails with
/// `AllMovesForbidden`.
///
/// The state is read, not modified: the returned moves carry the new
/// coordinates for the caller to apply.
pub fn satisfy_constraint<F: Scalar>(
    state: &MsscState<F>,
    data: &Dataset<F>,
    kind: ConstraintKind,
    i: usize,
    j: usize,
    m_ij: &[usize],
    forbidden: &ForbiddenList,
) -> Result<Vec<AppliedMove<F>>> {
    let n = data.n();
    let k = state.partition.k;
    for &idx in &[i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, bound: n });
        }
    }
    for &c in m_ij {
        if c >= k {
            return Err(Error::IndexOutOfRange { index: c, bound: k });
        }
    }
    let mut destinations: Vec<usize> = m_ij.to_vec();
    destinations.sort_unstable();
    destinations.dedup();

    // Guarded objective change, with un-movable candidates mapped to None.
    let scan = |u: usize, c: usize| -> Result<Option<F>> {
        let c_from = state.assignment()[u];
        match delta_guarded(state, data, u, c_from, c, forbidden) {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            Ok(_) => Ok(None),
            Err(Error::SoleMember { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let plan_move = |u: usize, c_star: usize| -> Result<Option<AppliedMove<F>>> {
        let c_from = state.assignment()[u];
        if c_from == c_star {
            return Ok(None);
        }
        let old = data.point(u).to_vec();
        let new = move_point(&old, &state.centers()[c_from], &state.centers()[c_star])?;
        let displacement = euclidean_displacement(&old, &new);
        Ok(Some(AppliedMove {
            point: u,
            from_cluster: c_from,
            to_cluster: c_star,
            old_coords: old,
            new_coords: new,
            displacement,
        }))
    };

    match kind {
        ConstraintKind::CannotLink => {
            let mut best: Option<(F, usize, usize)> = None;
            for &u in &[i, j] {
                for &c in &destinations {
                    if let Some(v) = scan(u, c)? {
                        if best.map_or(true, |(bv, _, _)| v < bv) {
                            best = Some((v, u, c));
                        }
                    }
                }
            }
            let Some((_, u, c_star)) = best else {
                return Err(Error::AllMovesForbidden);
            };
            Ok(plan_move(u, c_star)?.into_iter().collect())
        }
        ConstraintKind::MustLink => {
            let mut best: Option<(F, usize)> = None;
            for &c in &destinations {
                let (Some(di), Some(dj)) = (scan(i, c)?, scan(j, c)?) else {
                    continue;
                };
                let total = di + dj;
                if best.map_or(true, |(bv, _)| total < bv) {
                    best = Some((total, c));
                }
            }
            let Some((_, c_star)) = best else {
                return Err(Error::AllMovesForbidden);
            };
            let mut moves = Vec::new();
            for &u in &[i, j] {
                if let Some(mv) = plan_move(u, c_star)? {
                    moves.push(mv);
                }
            }
            Ok(moves)
        }
    }
}

/// One outer-loop iteration: the re-clustering statistics, the constraint
/// chosen, and the moves applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: Deserialize<'de>"))]
pub struct TransformIteration<F: Scalar> {
    /// 1-based iteration counter.
    pub iteration: usize,
    pub kind: ConstraintKind,
    pub i: usize,
    pub j: usize,
    /// Impact score of the selected constraint (dual-guided mode only).
    pub impact: Option<F>,
    /// Number of violated constraints at the start of the iteration.
    pub violated: usize,
    /// Clustering objective of this iteration's solution, before the moves.
    pub objective: F,
    /// Agreement with ground-truth labels, when the dataset has them.
    pub ari: Option<f64>,
    pub moves: Vec<AppliedMove<F>>,
    /// Cumulative Euclidean distance traveled, including this iteration.
    pub traveled: F,
}

/// The full record of a transform run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: Deserialize<'de>"))]
pub struct TransformTrace<F: Scalar> {
    pub iterations: Vec<TransformIteration<F>>,
    pub initial_objective: F,
    pub initial_ari: Option<f64>,
    pub initial_violated: usize,
    /// Statistics of the terminal re-clustering (after the last moves).
    pub final_objective: F,
    pub final_ari: Option<f64>,
    pub final_violated: usize,
    pub total_traveled: F,
}

/// The clustering a transform run starts from: identical to the solution of
/// the run's first iteration for the same `seed` and `kmeans_restarts`.
pub fn initial_state<F: Scalar>(
    data: &Dataset<F>,
    k: usize,
    kmeans_restarts: usize,
    seed: u64,
) -> Result<MsscState<F>> {
    kmeans_multistart(data, k, kmeans_restarts, kmeans_seed(seed))
}

/// Single k-means seed reused by every re-clustering pass of a run. Keeping
/// the multistart stream fixed while the data barely changes makes
/// consecutive passes land in the same local optimum, so a repaired
/// constraint stays repaired instead of being re-broken by an unrelated
/// restart winning the next pass.
fn kmeans_seed(seed: u64) -> u64 {
    rng::mix(seed, rng::TAG_TRANSFORM_KMEANS)
}

fn eligible_destinations(
    kind: ConstraintKind,
    i: usize,
    j: usize,
    assignment: &[usize],
    k: usize,
    forbidden: &ForbiddenList,
) -> Vec<usize> {
    match kind {
        ConstraintKind::MustLink => (0..k)
            .filter(|&c| !forbidden.contains(i, c) && !forbidden.contains(j, c))
            .collect(),
        ConstraintKind::CannotLink => (0..k)
            .filter(|&c| {
                assignment[i] != c
                    && assignment[j] != c
                    && !(forbidden.contains(i, c) && forbidden.contains(j, c))
            })
            .collect(),
    }
}

/// Iteratively relocates points of violated constraints until none of them
/// has an eligible destination cluster left.
///
/// The clustering is solved once by a seeded multistart and then maintained
/// incrementally: each iteration recomputes which constraints the current
/// solution violates, selects one — by impact score under
/// [`SelectionMode::DualGuided`], uniformly under
/// [`SelectionMode::RandomBaseline`] — applies the moves of
/// [`satisfy_constraint`], and reassigns the moved points to their target
/// clusters (centroids and objective are recomputed exactly). Every moved
/// point's (point, source cluster) pair is added to the forbidden list,
/// which therefore grows strictly each iteration and bounds the run length.
pub fn run_transform<F: Scalar>(
    dataset: &Dataset<F>,
    k: usize,
    constraints: &ConstraintSet,
    selection: SelectionMode,
    kmeans_restarts: usize,
    solver_config: &LagrangianConfig<F>,
    seed: u64,
) -> Result<(Dataset<F>, TransformTrace<F>)> {
    solver_config.validate()?;
    let n = dataset.n();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if let Some(max) = constraints.max_index() {
        if max >= n {
            return Err(Error::IndexOutOfRange { index: max, bound: n });
        }
    }
    let all: Vec<(ConstraintKind, usize, usize)> = constraints.iter_all().collect();
    let labels = dataset.labels().map(|l| l.to_vec());

    let mut data = dataset.clone();
    let mut forbidden = ForbiddenList::new();
    let mut select_rng = rng::stream(seed, rng::TAG_TRANSFORM_SELECT);
    let mut iterations: Vec<TransformIteration<F>> = Vec::new();
    let mut traveled = F::zero();
    let mut initial: Option<(F, Option<f64>, usize)> = None;
    // Defensive bound: the forbidden list can grow at most n*k times and
    // every iteration moves at least one point, so a well-behaved run stays
    // far below this. Hitting it ends the run with constraints left
    // violated rather than spinning.
    let safety_cap = 2 * (all.len() + n * k) + 64;

    // The clustering solution is built once by a seeded multistart and then
    // maintained move by move: a repaired point is reassigned to the cluster
    // it was moved toward, everyone else keeps their cluster, and centroids
    // and objective are recomputed exactly after each iteration. Re-solving
    // from scratch between iterations would let near-tied local optima trade
    // places after every edit, silently undoing earlier repairs; maintaining
    // the solution incrementally is what makes each applied move actually
    // satisfy its constraint and makes the forbidden list grow strictly
    // (a point re-enters a barred cluster only through a move, and moves
    // into barred clusters are priced as unavailable).
    let mut state = kmeans_multistart(&data, k, kmeans_restarts, kmeans_seed(seed))?;

    let (final_objective, final_ari, final_violated) = loop {
        let assignment = state.assignment().to_vec();
        let ari = match &labels {
            Some(l) => Some(adjusted_rand_index(&assignment, l)?),
            None => None,
        };
        let violated: Vec<usize> = (0..all.len())
            .filter(|&idx| {
                let (kind, i, j) = all[idx];
                match kind {
                    ConstraintKind::MustLink => assignment[i] != assignment[j],
                    ConstraintKind::CannotLink => assignment[i] == assignment[j],
                }
            })
            .collect();
        if initial.is_none() {
            initial = Some((state.objective, ari, violated.len()));
        }
        let candidates: Vec<(usize, Vec<usize>)> = violated
            .iter()
            .map(|&idx| {
                let (kind, i, j) = all[idx];
                (idx, eligible_destinations(kind, i, j, &assignment, k, &forbidden))
            })
            .filter(|(_, m)| !m.is_empty())
            .collect();
        if candidates.is_empty() || iterations.len() >= safety_cap {
            break (state.objective, ari, violated.len());
        }

        let impacts = match selection {
            SelectionMode::DualGuided => {
                let problem = DualProblem::Mssc { data: &data };
                let incumbent = Incumbent::Mssc(state.clone());
                let dual =
                    solve_with_incumbent(&problem, k, constraints, solver_config, &incumbent)?;
                Some(impact_scores(&dual, constraints)?)
            }
            SelectionMode::RandomBaseline => None,
        };
        // A candidate can have eligible destination clusters while every
        // concrete move is still priced as unavailable (forbidden entries or
        // sole-member guards). Such a constraint is unrepairable in this
        // pass: drop it and reselect. When nothing is repairable the run
        // ends, because the pass state is deterministic and the next pass
        // would reach the identical dead end.
        let mut candidates = candidates;
        let mut applied = None;
        while !candidates.is_empty() {
            let chosen = match &impacts {
                Some(table) => {
                    let mut best = 0usize;
                    for pos in 1..candidates.len() {
                        if table.entries[candidates[pos].0].impact
                            > table.entries[candidates[best].0].impact
                        {
                            best = pos;
                        }
                    }
                    best
                }
                None => select_rng.random_range(0..candidates.len()),
            };
            let (constraint_idx, m_ij) = &candidates[chosen];
            let (kind, ci, cj) = all[*constraint_idx];
            match satisfy_constraint(&state, &data, kind, ci, cj, m_ij, &forbidden) {
                Ok(moves) => {
                    let impact = impacts
                        .as_ref()
                        .map(|table| table.entries[*constraint_idx].impact);
                    applied = Some((kind, ci, cj, impact, moves));
                    break;
                }
                Err(Error::AllMovesForbidden) => {
                    candidates.remove(chosen);
                }
                Err(e) => return Err(e),
            }
        }
        let Some((kind, ci, cj, impact, moves)) = applied else {
            break (state.objective, ari, violated.len());
        };
        let mut next_assignment = assignment;
        for mv in &moves {
            data.set_point(mv.point, mv.new_coords.clone())?;
            forbidden.insert(mv.point, mv.from_cluster);
            traveled = traveled + mv.displacement;
            next_assignment[mv.point] = mv.to_cluster;
        }
        state = MsscState::from_partition(
            &data,
            &Partition { assignment: next_assignment, k, centers: None },
        )?;
        // The recorded ARI and objective describe the solution after this
        // iteration's moves, so the trace shows the per-iteration progression
        // and its last row matches the final state.
        let ari_after = match &labels {
            Some(l) => Some(adjusted_rand_index(state.assignment(), l)?),
            None => None,
        };
        iterations.push(TransformIteration {
            iteration: iterations.len() + 1,
            kind,
            i: ci,
            j: cj,
            impact,
            violated: violated.len(),
            objective: state.objective,
            ari: ari_after,
            moves,
            traveled,
        });
    };

    let (initial_objective, initial_ari, initial_violated) =
        initial.expect("first pass always records initial statistics");
    Ok((
        data,
        TransformTrace {
            iterations,
            initial_objective,
            initial_ari,
            initial_violated,
            final_objective,
            final_ari,
            final_violated,
            total_traveled: traveled,
        },
    ))
}
