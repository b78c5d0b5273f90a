//! Consumers of a dual solution: the fitness score of a metric, per-
//! constraint impact scores, the impact-ranked constraint filter, and the
//! soft-assignment loss formulas used by constrained deep-embedding
//! pipelines.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::types::{ConstraintKind, ConstraintSet, DualSolution, Partition};
use crate::{flt, Error, Result, Scalar};

/// Fitness of a metric for a constraint set: how many (constraint, cluster)
/// multiplier groups came back zero, i.e. were satisfied for free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    /// Caller-supplied label for the metric that produced the dual.
    pub metric_name: Option<String>,
    /// Total count of zero multiplier groups.
    pub score: usize,
    /// Largest possible score: k * (number of constraints).
    pub max_score: usize,
    pub per_constraint: Vec<ConstraintFitness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFitness {
    pub kind: ConstraintKind,
    pub i: usize,
    pub j: usize,
    /// Number of clusters whose multipliers for this constraint are zero
    /// (within tau). A cluster of a must-link counts only when both its
    /// lambda and gamma are zero.
    pub zero_clusters: usize,
    /// True when every cluster's multipliers are zero.
    pub satisfied_inherently: bool,
}

/// Counts zero multiplier groups: each cannot-link (i, j) contributes one
/// per cluster c with |eta_c| <= tau, each must-link one per cluster with
/// |lambda_c| <= tau AND |gamma_c| <= tau.
pub fn fitness_score<F: Scalar>(
    dual: &DualSolution<F>,
    constraints: &ConstraintSet,
    k: usize,
    tau: F,
) -> Result<FitnessReport> {
    if tau < F::zero() {
        return Err(Error::InvalidConfig("tau must be non-negative".into()));
    }
    if dual.k != k {
        return Err(Error::DualMismatch(format!(
            "dual solution is for k = {}, expected {k}",
            dual.k
        )));
    }
    dual.validate_for(constraints, k)?;
    let mut per_constraint = Vec::with_capacity(dual.must_link.len() + dual.cannot_link.len());
    let mut score = 0usize;
    for m in &dual.must_link {
        let zero_clusters = (0..k)
            .filter(|&c| m.lambda[c].abs() <= tau && m.gamma[c].abs() <= tau)
            .count();
        score += zero_clusters;
        per_constraint.push(ConstraintFitness {
            kind: ConstraintKind::MustLink,
            i: m.i,
            j: m.j,
            zero_clusters,
            satisfied_inherently: zero_clusters == k,
        });
    }
    for cl in &dual.cannot_link {
        let zero_clusters = (0..k).filter(|&c| cl.eta[c].abs() <= tau).count();
        score += zero_clusters;
        per_constraint.push(ConstraintFitness {
            kind: ConstraintKind::CannotLink,
            i: cl.i,
            j: cl.j,
            zero_clusters,
            satisfied_inherently: zero_clusters == k,
        });
    }
    let max_score = k * (dual.must_link.len() + dual.cannot_link.len());
    Ok(FitnessReport { metric_name: None, score, max_score, per_constraint })
}

/// A constraint's impact: the sum of its dual values across clusters.
/// Values closer to zero mark constraints that are cheaper to enforce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: Deserialize<'de>"))]
pub struct ImpactEntry<F: Scalar> {
    pub kind: ConstraintKind,
    pub i: usize,
    pub j: usize,
    pub impact: F,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: Deserialize<'de>"))]
pub struct ImpactTable<F: Scalar> {
    /// One entry per constraint, in constraint order (must-links first).
    pub entries: Vec<ImpactEntry<F>>,
}

impl<F: Scalar> ImpactTable<F> {
    pub fn impact_of(&self, kind: ConstraintKind, i: usize, j: usize) -> Option<F> {
        self.entries
            .iter()
            .find(|e| e.kind == kind && e.i == i && e.j == j)
            .map(|e| e.impact)
    }
}

/// Sums each constraint's multipliers: eta over clusters for a cannot-link,
/// lambda + gamma over clusters for a must-link.
pub fn impact_scores<F: Scalar>(
    dual: &DualSolution<F>,
    constraints: &ConstraintSet,
) -> Result<ImpactTable<F>> {
    dual.validate_for(constraints, dual.k)?;
    let mut entries = Vec::with_capacity(dual.must_link.len() + dual.cannot_link.len());
    for m in &dual.must_link {
        let impact = m
            .lambda
            .iter()
            .zip(&m.gamma)
            .fold(F::zero(), |acc, (&l, &g)| acc + l + g);
        entries.push(ImpactEntry { kind: ConstraintKind::MustLink, i: m.i, j: m.j, impact });
    }
    for cl in &dual.cannot_link {
        let impact = cl.eta.iter().fold(F::zero(), |acc, &e| acc + e);
        entries.push(ImpactEntry { kind: ConstraintKind::CannotLink, i: cl.i, j: cl.j, impact });
    }
    Ok(ImpactTable { entries })
}

/// Drops the hardest constraints by impact rank.
///
/// Omega is the set of constraints with impact strictly below -tau; sorted
/// by increasing impact (most negative first, ties by constraint order),
/// the first `floor(alpha * |Omega|)` are removed. Constraints with
/// near-zero impact (|impact| <= tau) are dropped from both outputs unless
/// `keep_zero_impact` is set, since a zero-impact constraint carries no
/// enforcement cost signal.
pub fn filter_constraints<F: Scalar>(
    impacts: &ImpactTable<F>,
    alpha: F,
    tau: F,
    keep_zero_impact: bool,
) -> Result<(ConstraintSet, ConstraintSet)> {
    let alpha_f = alpha.to_f64().unwrap_or(f64::NAN);
    if !(0.0..=1.0).contains(&alpha_f) {
        return Err(Error::InvalidAlpha(alpha_f));
    }
    if tau < F::zero() {
        return Err(Error::InvalidConfig("tau must be non-negative".into()));
    }
    let omega: Vec<usize> = (0..impacts.entries.len())
        .filter(|&idx| impacts.entries[idx].impact < -tau)
        .collect();
    let mut ranked = omega.clone();
    // Stable sort: ties keep constraint order.
    ranked.sort_by(|&a, &b| {
        impacts.entries[a]
            .impact
            .partial_cmp(&impacts.entries[b].impact)
            .expect("impacts are finite")
    });
    let remove_count = (alpha_f * omega.len() as f64).floor() as usize;
    let removed_idx: std::collections::BTreeSet<usize> =
        ranked.iter().take(remove_count).copied().collect();

    let mut kept_ml = Vec::new();
    let mut kept_cl = Vec::new();
    let mut removed_ml = Vec::new();
    let mut removed_cl = Vec::new();
    for (idx, entry) in impacts.entries.iter().enumerate() {
        let bucket = if removed_idx.contains(&idx) {
            Some(false)
        } else if entry.impact < -tau || keep_zero_impact {
            Some(true)
        } else {
            None // near-zero impact, silently dropped
        };
        let Some(keep) = bucket else { continue };
        let target = match (entry.kind, keep) {
            (ConstraintKind::MustLink, true) => &mut kept_ml,
            (ConstraintKind::MustLink, false) => &mut removed_ml,
            (ConstraintKind::CannotLink, true) => &mut kept_cl,
            (ConstraintKind::CannotLink, false) => &mut removed_cl,
        };
        target.push((entry.i, entry.j));
    }
    Ok((
        ConstraintSet::from_canonical(kept_ml, kept_cl),
        ConstraintSet::from_canonical(removed_ml, removed_cl),
    ))
}

// ---------------------------------------------------------------------------
// Soft assignments and losses
// ---------------------------------------------------------------------------

/// A row-stochastic n-by-k membership matrix (each row non-negative,
/// summing to 1 within 1e-9).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: Deserialize<'de>"))]
#[serde(try_from = "Vec<Vec<F>>", into = "Vec<Vec<F>>")]
pub struct SoftAssignment<F: Scalar> {
    rows: Vec<Vec<F>>,
}

impl<F: Scalar> TryFrom<Vec<Vec<F>>> for SoftAssignment<F> {
    type Error = Error;
    fn try_from(rows: Vec<Vec<F>>) -> Result<Self> {
        SoftAssignment::new(rows)
    }
}

impl<F: Scalar> From<SoftAssignment<F>> for Vec<Vec<F>> {
    fn from(s: SoftAssignment<F>) -> Self {
        s.rows
    }
}

impl<F: Scalar> SoftAssignment<F> {
    pub fn new(rows: Vec<Vec<F>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyDataset);
        }
        let k = rows[0].len();
        let tol = flt::<F>(1e-9);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, found: row.len() });
            }
            let mut sum = F::zero();
            for &v in row {
                if !v.is_finite() || v < F::zero() {
                    return Err(Error::NotRowStochastic { row: r });
                }
                sum = sum + v;
            }
            if (sum - F::one()).abs() > tol {
                return Err(Error::NotRowStochastic { row: r });
            }
        }
        Ok(SoftAssignment { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.rows[i]
    }

    /// Reads a plain numeric CSV (one row per point, one column per
    /// cluster). `#` lines are skipped; a non-numeric first record is
    /// treated as a header.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .flexible(true)
            .from_path(path.as_ref())?;
        let mut rows: Vec<Vec<F>> = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<F>, _> = record
                .iter()
                .map(|field| field.trim().parse::<f64>().map(flt::<F>))
                .collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(e) if idx == 0 => {
                    let _ = e; // header row
                }
                Err(e) => return Err(Error::Parse(format!("row {idx}: {e}"))),
            }
        }
        SoftAssignment::new(rows)
    }

    pub fn to_csv_path(&self, path: impl AsRef<Path>, preamble: Option<&str>) -> Result<()> {
        let mut out = String::new();
        if let Some(p) = preamble {
            for line in p.lines() {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
        }
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// The three soft-assignment losses:
///
/// * `l_c`  = sum over all (i, c) of `p * ln(p / q)` (KL divergence of P
///   from Q, with `0 * ln(0 / q) = 0`),
/// * `l_ml` = sum over must-link pairs of `ln(sum_c q_i^c * q_j^c)`,
/// * `l_cl` = sum over cannot-link pairs of `ln(1 - sum_c q_i^c * q_j^c)`.
pub fn dec_losses<F: Scalar>(
    q: &SoftAssignment<F>,
    p: &SoftAssignment<F>,
    ml: &[(usize, usize)],
    cl: &[(usize, usize)],
) -> Result<(F, F, F)> {
    if p.n() != q.n() {
        return Err(Error::LengthMismatch { a: q.n(), b: p.n() });
    }
    if p.k() != q.k() {
        return Err(Error::DimensionMismatch { expected: q.k(), found: p.k() });
    }
    let n = q.n();
    let k = q.k();

    let mut l_c = F::zero();
    for i in 0..n {
        for c in 0..k {
            let pv = p.row(i)[c];
            let qv = q.row(i)[c];
            if pv > F::zero() {
                if qv <= F::zero() {
                    return Err(Error::SupportViolation { row: i, cluster: c });
                }
                l_c = l_c + pv * (pv / qv).ln();
            }
        }
    }

    let pair_mass = |i: usize, j: usize| -> Result<F> {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, bound: n });
        }
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, bound: n });
        }
        let mut mass = F::zero();
        for c in 0..k {
            mass = mass + q.row(i)[c] * q.row(j)[c];
        }
        Ok(mass)
    };

    let mut l_ml = F::zero();
    for &(i, j) in ml {
        let mass = pair_mass(i, j)?;
        if mass <= F::zero() {
            return Err(Error::LogDomain("must-link pair has zero co-assignment mass"));
        }
        l_ml = l_ml + mass.ln();
    }

    let mut l_cl = F::zero();
    for &(i, j) in cl {
        let mass = pair_mass(i, j)?;
        if mass >= F::one() {
            return Err(Error::LogDomain("cannot-link pair has full co-assignment mass"));
        }
        l_cl = l_cl + (F::one() - mass).ln();
    }

    Ok((l_c, l_ml, l_cl))
}

/// Per-row argmax of the soft assignment, ties broken by the lowest cluster
/// index. The result may leave some clusters empty.
pub fn hard_assign<F: Scalar>(q: &SoftAssignment<F>) -> Partition<F> {
    let assignment = (0..q.n())
        .map(|i| {
            let row = q.row(i);
            let mut best = 0usize;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Partition { assignment, k: q.k(), centers: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{validate_constraints, CannotLinkDuals, MustLinkDuals};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn dual_for(
        constraints: &ConstraintSet,
        k: usize,
        mut fill: impl FnMut(usize) -> f64,
    ) -> DualSolution<f64> {
        let mut idx = 0;
        let mut next = || {
            let v = fill(idx);
            idx += 1;
            v
        };
        DualSolution {
            k,
            dual_bound: 1.0,
            iterations: 1,
            converged: true,
            must_link: constraints
                .must_link()
                .iter()
                .map(|&(i, j)| MustLinkDuals {
                    i,
                    j,
                    lambda: (0..k).map(|_| next()).collect(),
                    gamma: (0..k).map(|_| next()).collect(),
                })
                .collect(),
            cannot_link: constraints
                .cannot_link()
                .iter()
                .map(|&(i, j)| CannotLinkDuals { i, j, eta: (0..k).map(|_| next()).collect() })
                .collect(),
        }
    }

    #[test]
    fn zero_duals_give_the_maximum_fitness() {
        let constraints = validate_constraints(&[(0, 1), (2, 3)], &[(0, 4)], 5).unwrap();
        let dual = dual_for(&constraints, 3, |_| 0.0);
        let report = fitness_score(&dual, &constraints, 3, 1e-6).unwrap();
        assert_eq!(report.score, 3 * 3);
        assert_eq!(report.max_score, 9);
        assert!(report.per_constraint.iter().all(|c| c.satisfied_inherently));
    }

    #[test]
    fn strictly_negative_duals_give_zero_fitness() {
        let constraints = validate_constraints(&[(0, 1)], &[(2, 3)], 4).unwrap();
        let dual = dual_for(&constraints, 2, |_| -0.5);
        let report = fitness_score(&dual, &constraints, 2, 1e-6).unwrap();
        assert_eq!(report.score, 0);
        assert!(report.per_constraint.iter().all(|c| c.zero_clusters == 0));
    }

    #[test]
    fn must_link_requires_both_families_zero() {
        let constraints = validate_constraints(&[(0, 1)], &[], 2).unwrap();
        let mut dual = dual_for(&constraints, 2, |_| 0.0);
        // lambda zero but gamma negative on cluster 0: cluster 0 must not count.
        dual.must_link[0].gamma[0] = -1.0;
        let report = fitness_score(&dual, &constraints, 2, 1e-6).unwrap();
        assert_eq!(report.score, 1);
        assert_eq!(report.per_constraint[0].zero_clusters, 1);
        assert!(!report.per_constraint[0].satisfied_inherently);
    }

    #[test]
    fn fitness_is_invariant_under_input_constraint_order() {
        let a = validate_constraints(&[(0, 1), (2, 3)], &[(4, 5)], 6).unwrap();
        let b = validate_constraints(&[(2, 3), (0, 1)], &[(5, 4)], 6).unwrap();
        assert_eq!(a, b); // canonicalization sorts
        let dual = dual_for(&a, 2, |i| if i % 2 == 0 { 0.0 } else { -1.0 });
        let ra = fitness_score(&dual, &a, 2, 1e-6).unwrap();
        let rb = fitness_score(&dual, &b, 2, 1e-6).unwrap();
        assert_eq!(ra.score, rb.score);
    }

    #[test]
    fn fitness_rejects_mismatched_duals() {
        let constraints = validate_constraints(&[(0, 1)], &[], 2).unwrap();
        let other = validate_constraints(&[(0, 1)], &[(0, 2)], 3).unwrap();
        let dual = dual_for(&constraints, 2, |_| 0.0);
        assert!(fitness_score(&dual, &other, 2, 1e-6).is_err());
        assert!(fitness_score(&dual, &constraints, 3, 1e-6).is_err());
    }

    #[test]
    fn impact_sums_match_the_worked_examples() {
        let constraints = validate_constraints(&[(0, 1)], &[(2, 3)], 4).unwrap();
        let mut dual = dual_for(&constraints, 3, |_| 0.0);
        dual.cannot_link[0].eta = vec![-0.2, 0.0, -0.3];
        dual.must_link[0].lambda = vec![-0.1, 0.0, 0.0];
        dual.must_link[0].gamma = vec![0.0, -0.4, 0.0];
        let table = impact_scores(&dual, &constraints).unwrap();
        assert_abs_diff_eq!(
            table.impact_of(ConstraintKind::CannotLink, 2, 3).unwrap(),
            -0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            table.impact_of(ConstraintKind::MustLink, 0, 1).unwrap(),
            -0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn impact_is_linear_in_the_duals() {
        let constraints = validate_constraints(&[(0, 1), (1, 2)], &[(0, 3)], 4).unwrap();
        let mut rng = crate::rng::stream(1, 3);
        let dual = dual_for(&constraints, 3, |_| -rng.random_range(0.0..2.0));
        let table = impact_scores(&dual, &constraints).unwrap();
        for s in [0.0, 0.5, 2.0, 7.5] {
            let scaled = DualSolution {
                must_link: dual
                    .must_link
                    .iter()
                    .map(|m| MustLinkDuals {
                        i: m.i,
                        j: m.j,
                        lambda: m.lambda.iter().map(|v| v * s).collect(),
                        gamma: m.gamma.iter().map(|v| v * s).collect(),
                    })
                    .collect(),
                cannot_link: dual
                    .cannot_link
                    .iter()
                    .map(|c| CannotLinkDuals {
                        i: c.i,
                        j: c.j,
                        eta: c.eta.iter().map(|v| v * s).collect(),
                    })
                    .collect(),
                ..dual.clone()
            };
            let scaled_table = impact_scores(&scaled, &constraints).unwrap();
            for (a, b) in table.entries.iter().zip(&scaled_table.entries) {
                assert_abs_diff_eq!(a.impact * s, b.impact, epsilon = 1e-12);
            }
        }
    }

    fn impact_table(values: &[(ConstraintKind, usize, usize, f64)]) -> ImpactTable<f64> {
        ImpactTable {
            entries: values
                .iter()
                .map(|&(kind, i, j, impact)| ImpactEntry { kind, i, j, impact })
                .collect(),
        }
    }

    #[test]
    fn filter_drops_zero_impact_and_removes_nothing_at_alpha_zero() {
        use ConstraintKind::*;
        let table = impact_table(&[
            (MustLink, 0, 1, -3.0),
            (CannotLink, 2, 3, -1.0),
            (CannotLink, 4, 5, 0.0),
        ]);
        let (kept, removed) = filter_constraints(&table, 0.0, 1e-6, false).unwrap();
        assert_eq!(kept.must_link(), &[(0, 1)]);
        assert_eq!(kept.cannot_link(), &[(2, 3)]);
        assert_eq!(removed.len(), 0);

        let (kept, _) = filter_constraints(&table, 0.0, 1e-6, true).unwrap();
        assert_eq!(kept.cannot_link(), &[(2, 3), (4, 5)]);
    }

    #[test]
    fn filter_removes_all_of_omega_at_alpha_one() {
        use ConstraintKind::*;
        let table = impact_table(&[
            (MustLink, 0, 1, -3.0),
            (CannotLink, 2, 3, -1.0),
            (CannotLink, 4, 5, 0.0),
        ]);
        let (kept, removed) = filter_constraints(&table, 1.0, 1e-6, false).unwrap();
        assert_eq!(kept.len(), 0);
        assert_eq!(removed.len(), 2);
    }

    #[test]
    fn filter_removes_the_most_negative_prefix() {
        use ConstraintKind::*;
        // |Omega| = 10 with distinct impacts; alpha = 0.7 removes exactly
        // the 7 most negative.
        let entries: Vec<(ConstraintKind, usize, usize, f64)> = (0..10)
            .map(|idx| (CannotLink, idx, idx + 20, -((idx + 1) as f64)))
            .collect();
        let table = impact_table(&entries);
        let (kept, removed) = filter_constraints(&table, 0.7, 1e-6, false).unwrap();
        assert_eq!(removed.len(), 7);
        assert_eq!(kept.len(), 3);
        // Removed: impacts -10..-4, i.e. indices 3..=9; kept: -3, -2, -1.
        assert_eq!(kept.cannot_link(), &[(0, 20), (1, 21), (2, 22)]);
        let max_removed = removed
            .cannot_link()
            .iter()
            .map(|&(i, j)| table.impact_of(CannotLink, i, j).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let min_kept = kept
            .cannot_link()
            .iter()
            .map(|&(i, j)| table.impact_of(CannotLink, i, j).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(max_removed <= min_kept);
    }

    #[test]
    fn filter_ties_resolve_by_constraint_order() {
        use ConstraintKind::*;
        let table = impact_table(&[
            (CannotLink, 0, 1, -1.0),
            (CannotLink, 2, 3, -1.0),
            (CannotLink, 4, 5, -1.0),
        ]);
        let (kept, removed) = filter_constraints(&table, 0.5, 1e-6, false).unwrap();
        // floor(0.5 * 3) = 1: the earliest tied entry goes.
        assert_eq!(removed.cannot_link(), &[(0, 1)]);
        assert_eq!(kept.cannot_link(), &[(2, 3), (4, 5)]);
    }

    #[test]
    fn filter_rejects_bad_alpha() {
        let table = impact_table(&[]);
        assert!(matches!(
            filter_constraints(&table, -0.1, 1e-6, false),
            Err(Error::InvalidAlpha(_))
        ));
        assert!(matches!(
            filter_constraints(&table, 1.1, 1e-6, false),
            Err(Error::InvalidAlpha(_))
        ));
    }

    fn soft(rows: Vec<Vec<f64>>) -> SoftAssignment<f64> {
        SoftAssignment::new(rows).unwrap()
    }

    #[test]
    fn soft_assignment_validation() {
        assert!(SoftAssignment::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(SoftAssignment::new(vec![vec![0.5, -0.5, 1.0]]).is_err());
        assert!(SoftAssignment::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(SoftAssignment::new(Vec::<Vec<f64>>::new()).is_err());
        assert!(SoftAssignment::new(vec![vec![0.25, 0.75]]).is_ok());
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let q = soft(vec![vec![0.2, 0.8], vec![0.6, 0.4]]);
        let (l_c, _, _) = dec_losses(&q, &q, &[], &[]).unwrap();
        assert_abs_diff_eq!(l_c, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn coassigned_one_hot_must_link_contributes_zero() {
        let q = soft(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let (_, l_ml, _) = dec_losses(&q, &q, &[(0, 1)], &[]).unwrap();
        assert_abs_diff_eq!(l_ml, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn loss_domain_errors() {
        let q = soft(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        // Cannot-link between identical one-hot rows: log(1 - 1).
        assert!(matches!(
            dec_losses(&q, &q, &[], &[(0, 1)]),
            Err(Error::LogDomain(_))
        ));
        // Must-link with disjoint one-hot support: log(0).
        let q2 = soft(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            dec_losses(&q2, &q2, &[(0, 1)], &[]),
            Err(Error::LogDomain(_))
        ));
        // Support violation: p > 0 where q = 0.
        let q3 = soft(vec![vec![1.0, 0.0]]);
        let p3 = soft(vec![vec![0.5, 0.5]]);
        assert!(matches!(
            dec_losses(&q3, &p3, &[], &[]),
            Err(Error::SupportViolation { row: 0, cluster: 1 })
        ));
    }

    #[test]
    fn losses_match_an_independent_summation_oracle() {
        let mut rng = crate::rng::stream(17, 23);
        for _ in 0..20 {
            let n = 5;
            let k = 3;
            let random_soft = |rng: &mut rand_chacha::ChaCha8Rng| {
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|_| {
                        let raw: Vec<f64> =
                            (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
                        let s: f64 = raw.iter().sum();
                        raw.iter().map(|v| v / s).collect()
                    })
                    .collect();
                soft(rows)
            };
            let q = random_soft(&mut rng);
            let p = random_soft(&mut rng);
            let ml = [(0, 1), (2, 3)];
            let cl = [(0, 4), (1, 2)];
            let (l_c, l_ml, l_cl) = dec_losses(&q, &p, &ml, &cl).unwrap();

            // Oracle: term-by-term evaluation straight from the formulas.
            let mut o_c = 0.0;
            for i in 0..n {
                for c in 0..k {
                    let (pv, qv) = (p.row(i)[c], q.row(i)[c]);
                    if pv > 0.0 {
                        o_c += pv * (pv / qv).ln();
                    }
                }
            }
            let mass =
                |i: usize, j: usize| (0..k).map(|c| q.row(i)[c] * q.row(j)[c]).sum::<f64>();
            let o_ml: f64 = ml.iter().map(|&(i, j)| mass(i, j).ln()).sum();
            let o_cl: f64 = cl.iter().map(|&(i, j)| (1.0 - mass(i, j)).ln()).sum();

            assert_abs_diff_eq!(l_c, o_c, epsilon = 1e-12);
            assert_abs_diff_eq!(l_ml, o_ml, epsilon = 1e-12);
            assert_abs_diff_eq!(l_cl, o_cl, epsilon = 1e-12);
            assert!(l_c >= -1e-12, "KL divergence went negative: {l_c}");
        }
    }

    #[test]
    fn hard_assign_takes_the_argmax_with_low_index_ties() {
        let q = soft(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.5, 0.5, 0.0],
            vec![0.1, 0.8, 0.1],
        ]);
        let p = hard_assign(&q);
        assert_eq!(p.assignment, vec![0, 2, 0, 1]);
        assert_eq!(p.k, 3);
        p.validate().unwrap();
    }

    #[test]
    fn soft_assignment_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        let q = soft(vec![vec![0.25, 0.75], vec![0.5, 0.5]]);
        q.to_csv_path(&path, Some("soft assignment")).unwrap();
        let back = SoftAssignment::<f64>::from_csv_path(&path).unwrap();
        assert_eq!(q, back);
    }
}
