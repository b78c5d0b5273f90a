//! Domain types: datasets, pairwise constraints, partitions, dissimilarity
//! matrices, and dual solutions, together with their on-disk formats.
//!
//! File formats:
//! * `Dataset` — CSV with a header row; optional leading `id` column
//!   (strings), numeric feature columns, optional trailing `label` column.
//!   Lines starting with `#` are skipped.
//! * `ConstraintSet` — JSON `{"must_link": [[i,j],...], "cannot_link": [...]}`
//!   (extra keys are ignored when reading).
//! * `Partition` — JSON with `assignment`, `k`, optional `centers`.
//! * `DissimilarityMatrix` — CSV, header `c0..c{n-1}`, n rows of n values.
//! * `DualSolution` — JSON with per-constraint per-cluster multipliers.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// A fixed-dimension point cloud with optional ground-truth labels and
/// optional display names. Coordinates are finite by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<F: Scalar> {
    points: Vec<Vec<F>>,
    labels: Option<Vec<usize>>,
    ids: Option<Vec<String>>,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(
        points: Vec<Vec<F>>,
        labels: Option<Vec<usize>>,
        ids: Option<Vec<String>>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        for p in &points {
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("dataset coordinate"));
            }
        }
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(Error::LengthMismatch { a: points.len(), b: l.len() });
            }
        }
        if let Some(i) = &ids {
            if i.len() != points.len() {
                return Err(Error::LengthMismatch { a: points.len(), b: i.len() });
            }
        }
        Ok(Dataset { points, labels, ids })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, i: usize) -> &[F] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<F>] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// Replaces one point, preserving the dimension/finiteness invariants.
    pub fn set_point(&mut self, i: usize, coords: Vec<F>) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, bound: self.n() });
        }
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: coords.len() });
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset coordinate"));
        }
        self.points[i] = coords;
        Ok(())
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|_| Error::EmptyDataset)?
            .clone();
        if headers.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let has_ids = headers.get(0) == Some("id");
        let has_labels = headers.get(headers.len() - 1) == Some("label");
        let first_feature = usize::from(has_ids);
        let feature_end = headers.len() - usize::from(has_labels);
        if feature_end <= first_feature {
            return Err(Error::Parse("csv header has no feature columns".into()));
        }

        let mut points = Vec::new();
        let mut labels = Vec::new();
        let mut ids = Vec::new();
        for record in rdr.records() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::DimensionMismatch {
                    expected: headers.len(),
                    found: record.len(),
                });
            }
            if has_ids {
                ids.push(record[0].to_string());
            }
            let mut row = Vec::with_capacity(feature_end - first_feature);
            for field in record.iter().take(feature_end).skip(first_feature) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("feature value {field:?}")))?;
                row.push(F::from(v).ok_or(Error::NonFinite("dataset coordinate"))?);
            }
            points.push(row);
            if has_labels {
                let field = &record[headers.len() - 1];
                labels.push(
                    field
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("label value {field:?}")))?,
                );
            }
        }
        Dataset::new(
            points,
            if has_labels { Some(labels) } else { None },
            if has_ids { Some(ids) } else { None },
        )
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_csv_reader(BufReader::new(File::open(path)?))
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = Vec::new();
        if self.ids.is_some() {
            header.push("id".into());
        }
        header.extend((0..self.dim()).map(|j| format!("f{j}")));
        if self.labels.is_some() {
            header.push("label".into());
        }
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut record: Vec<String> = Vec::new();
            if let Some(ids) = &self.ids {
                record.push(ids[i].clone());
            }
            record.extend(self.points[i].iter().map(|v| {
                format!("{}", v.to_f64().expect("finite coordinate"))
            }));
            if let Some(labels) = &self.labels {
                record.push(labels[i].to_string());
            }
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.to_csv_writer(BufWriter::new(File::create(path)?))
    }
}

// ---------------------------------------------------------------------------
// Constraints
// ---------------------------------------------------------------------------

/// The two pairwise constraint kinds. Ordered must-link first, matching the
/// listing order used everywhere constraints are enumerated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    MustLink,
    CannotLink,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintKind::MustLink => write!(f, "must_link"),
            ConstraintKind::CannotLink => write!(f, "cannot_link"),
        }
    }
}

/// Canonical pairwise constraints: every pair is stored as (i, j) with
/// i < j, sorted ascending, deduplicated, with no pair in both lists.
/// Construction goes through [`validate_constraints`], so a value of this
/// type is canonical by definition.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConstraintSet {
    must_link: Vec<(usize, usize)>,
    cannot_link: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct RawConstraints {
    #[serde(default)]
    must_link: Vec<(usize, usize)>,
    #[serde(default)]
    cannot_link: Vec<(usize, usize)>,
}

/// Canonicalizes raw pair lists against a dataset of `n` points: orders each
/// pair as (min, max), sorts, removes duplicates, and rejects self-pairs,
/// out-of-range indices, and pairs present in both lists.
pub fn validate_constraints(
    must_link: &[(usize, usize)],
    cannot_link: &[(usize, usize)],
    n: usize,
) -> Result<ConstraintSet> {
    let canon = |pairs: &[(usize, usize)]| -> Result<Vec<(usize, usize)>> {
        let mut out: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            if a == b {
                return Err(Error::SelfPair { index: a });
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, bound: n });
            }
            out.push((i, j));
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    };
    let ml = canon(must_link)?;
    let cl = canon(cannot_link)?;
    // Both lists are sorted; a linear sweep finds any shared pair.
    let (mut a, mut b) = (0, 0);
    while a < ml.len() && b < cl.len() {
        match ml[a].cmp(&cl[b]) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                return Err(Error::ConflictingPair { i: ml[a].0, j: ml[a].1 })
            }
        }
    }
    Ok(ConstraintSet { must_link: ml, cannot_link: cl })
}

impl ConstraintSet {
    pub fn new(
        must_link: &[(usize, usize)],
        cannot_link: &[(usize, usize)],
        n: usize,
    ) -> Result<Self> {
        validate_constraints(must_link, cannot_link, n)
    }

    /// For pair lists that are already canonical (subsets of an existing
    /// set, as produced by the constraint filter).
    pub(crate) fn from_canonical(
        must_link: Vec<(usize, usize)>,
        cannot_link: Vec<(usize, usize)>,
    ) -> Self {
        debug_assert!(must_link.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(cannot_link.windows(2).all(|w| w[0] < w[1]));
        ConstraintSet { must_link, cannot_link }
    }

    pub fn must_link(&self) -> &[(usize, usize)] {
        &self.must_link
    }

    pub fn cannot_link(&self) -> &[(usize, usize)] {
        &self.cannot_link
    }

    pub fn len(&self) -> usize {
        self.must_link.len() + self.cannot_link.len()
    }

    pub fn is_empty(&self) -> bool {
        self.must_link.is_empty() && self.cannot_link.is_empty()
    }

    /// All constraints in canonical order: must-link first, then cannot-link.
    /// Positions in this iteration define the "constraint index" used for
    /// deterministic tie-breaking throughout the crate.
    pub fn iter_all(&self) -> impl Iterator<Item = (ConstraintKind, usize, usize)> + '_ {
        self.must_link
            .iter()
            .map(|&(i, j)| (ConstraintKind::MustLink, i, j))
            .chain(
                self.cannot_link
                    .iter()
                    .map(|&(i, j)| (ConstraintKind::CannotLink, i, j)),
            )
    }

    /// Largest point index referenced, if any constraint exists.
    pub fn max_index(&self) -> Option<usize> {
        self.iter_all().map(|(_, _, j)| j).max()
    }

    pub fn from_json_str(text: &str, n: usize) -> Result<Self> {
        let raw: RawConstraints = serde_json::from_str(text)?;
        validate_constraints(&raw.must_link, &raw.cannot_link, n)
    }

    pub fn from_json_path<P: AsRef<Path>>(path: P, n: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, n)
    }

    pub fn to_json_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Partition
// ---------------------------------------------------------------------------

/// A hard assignment of every point to one of `k` clusters (0-based), with
/// optional cluster centers. Clusters may be empty — the clustering solvers
/// promise non-empty clusters, but e.g. a hard-assigned soft clustering may
/// legitimately leave some cluster unused.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition<F: Scalar> {
    pub assignment: Vec<usize>,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<F>>>,
}

impl<F: Scalar> Partition<F> {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        let p = Partition { assignment, k, centers: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_centers(assignment: Vec<usize>, k: usize, centers: Vec<Vec<F>>) -> Result<Self> {
        let p = Partition { assignment, k, centers: Some(centers) };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidK { k: 0, n: self.assignment.len() });
        }
        if self.assignment.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for &c in &self.assignment {
            if c >= self.k {
                return Err(Error::IndexOutOfRange { index: c, bound: self.k });
            }
        }
        if let Some(centers) = &self.centers {
            if centers.len() != self.k {
                return Err(Error::LengthMismatch { a: self.k, b: centers.len() });
            }
            let d = centers.first().map_or(0, |c| c.len());
            for c in centers {
                if c.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: c.len() });
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("cluster center"));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// True when every cluster in 0..k holds at least one point.
    pub fn all_clusters_nonempty(&self) -> bool {
        self.cluster_sizes().iter().all(|&s| s > 0)
    }
}

impl<F: Scalar + Serialize> Partition<F> {
    pub fn to_json_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

impl<F: Scalar + for<'de> Deserialize<'de>> Partition<F> {
    pub fn from_json_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let p: Partition<F> = serde_json::from_str(&text)?;
        p.validate()?;
        Ok(p)
    }
}

// ---------------------------------------------------------------------------
// DissimilarityMatrix
// ---------------------------------------------------------------------------

/// A symmetric n-by-n matrix of non-negative dissimilarities with a zero
/// diagonal. Stored flat, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DissimilarityMatrix<F: Scalar> {
    n: usize,
    values: Vec<F>,
}

impl<F: Scalar> DissimilarityMatrix<F> {
    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut values = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row length {} in a {n}-row matrix",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        let m = DissimilarityMatrix { n, values };
        m.validate()?;
        Ok(m)
    }

    pub(crate) fn from_flat(n: usize, values: Vec<F>) -> Result<Self> {
        debug_assert_eq!(values.len(), n * n);
        let m = DissimilarityMatrix { n, values };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            if self.values[i * self.n + i] != F::zero() {
                return Err(Error::InvalidMatrix(format!("non-zero diagonal at {i}")));
            }
            for j in 0..self.n {
                let v = self.values[i * self.n + j];
                if !v.is_finite() {
                    return Err(Error::NonFinite("dissimilarity"));
                }
                if v < F::zero() {
                    return Err(Error::InvalidMatrix(format!("negative value at ({i}, {j})")));
                }
                if v != self.values[j * self.n + i] {
                    return Err(Error::InvalidMatrix(format!("asymmetry at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.values[i * self.n + j]
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .from_reader(reader);
        let n = rdr.headers().map_err(|_| Error::EmptyDataset)?.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut rows: Vec<Vec<F>> = Vec::with_capacity(n);
        for record in rdr.records() {
            let record = record?;
            let mut row = Vec::with_capacity(n);
            for field in record.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("dissimilarity value {field:?}")))?;
                row.push(F::from(v).ok_or(Error::NonFinite("dissimilarity"))?);
            }
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_csv_reader(BufReader::new(File::open(path)?))
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record((0..self.n).map(|j| format!("c{j}")))?;
        for i in 0..self.n {
            wtr.write_record(
                (0..self.n).map(|j| format!("{}", self.get(i, j).to_f64().expect("finite"))),
            )?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.to_csv_writer(BufWriter::new(File::create(path)?))
    }
}

// ---------------------------------------------------------------------------
// DualSolution
// ---------------------------------------------------------------------------

/// Multipliers for one cannot-link pair: `eta[c] <= 0` for cluster `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CannotLinkDuals<F: Scalar> {
    pub i: usize,
    pub j: usize,
    pub eta: Vec<F>,
}

/// Multipliers for one must-link pair: `lambda[c]` prices splitting with `i`
/// in cluster `c`, `gamma[c]` the mirror-image split; both `<= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MustLinkDuals<F: Scalar> {
    pub i: usize,
    pub j: usize,
    pub lambda: Vec<F>,
    pub gamma: Vec<F>,
}

/// Best Lagrangian multipliers found by a subgradient solve, together with
/// the best (largest) relaxation value seen. Pair lists mirror the
/// originating [`ConstraintSet`] order; `converged` is false when the run
/// stopped on the time limit or the iteration cap rather than at a
/// fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSolution<F: Scalar> {
    pub k: usize,
    pub dual_bound: F,
    pub iterations: usize,
    pub converged: bool,
    pub must_link: Vec<MustLinkDuals<F>>,
    pub cannot_link: Vec<CannotLinkDuals<F>>,
}

impl<F: Scalar> DualSolution<F> {
    /// Checks this solution against the constraint set it claims to price:
    /// same pairs in the same canonical order, `k` values per cluster list,
    /// and every multiplier finite and non-positive.
    pub fn validate_for(&self, constraints: &ConstraintSet, k: usize) -> Result<()> {
        if self.k != k {
            return Err(Error::DualMismatch(format!("k is {}, expected {k}", self.k)));
        }
        if self.must_link.len() != constraints.must_link().len()
            || self.cannot_link.len() != constraints.cannot_link().len()
        {
            return Err(Error::DualMismatch("constraint counts differ".into()));
        }
        for (d, &(i, j)) in self.must_link.iter().zip(constraints.must_link()) {
            if (d.i, d.j) != (i, j) {
                return Err(Error::DualMismatch(format!(
                    "must-link pair ({}, {}) vs ({i}, {j})",
                    d.i, d.j
                )));
            }
            check_multiplier_row(&d.lambda, k)?;
            check_multiplier_row(&d.gamma, k)?;
        }
        for (d, &(i, j)) in self.cannot_link.iter().zip(constraints.cannot_link()) {
            if (d.i, d.j) != (i, j) {
                return Err(Error::DualMismatch(format!(
                    "cannot-link pair ({}, {}) vs ({i}, {j})",
                    d.i, d.j
                )));
            }
            check_multiplier_row(&d.eta, k)?;
        }
        Ok(())
    }
}

fn check_multiplier_row<F: Scalar>(row: &[F], k: usize) -> Result<()> {
    if row.len() != k {
        return Err(Error::DualMismatch(format!(
            "multiplier row has {} entries, expected {k}",
            row.len()
        )));
    }
    for &v in row {
        if !v.is_finite() {
            return Err(Error::NonFinite("dual multiplier"));
        }
        if v > F::zero() {
            return Err(Error::PositiveMultiplier { value: v.to_f64().unwrap_or(f64::NAN) });
        }
    }
    Ok(())
}

impl<F: Scalar + Serialize> DualSolution<F> {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_json_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

impl<F: Scalar + for<'de> Deserialize<'de>> DualSolution<F> {
    pub fn from_json_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraints_are_canonicalized() {
        let set = validate_constraints(&[(2, 1), (1, 2)], &[(0, 3)], 4).unwrap();
        assert_eq!(set.must_link(), &[(1, 2)]);
        assert_eq!(set.cannot_link(), &[(0, 3)]);
    }

    #[test]
    fn canonicalization_is_idempotent() {
        let set = validate_constraints(&[(5, 0), (3, 4), (0, 5)], &[(1, 2)], 6).unwrap();
        let again =
            validate_constraints(set.must_link(), set.cannot_link(), 6).unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn conflicting_pair_is_rejected_even_mirrored() {
        let err = validate_constraints(&[(1, 2)], &[(2, 1)], 3).unwrap_err();
        assert!(matches!(err, Error::ConflictingPair { i: 1, j: 2 }));
    }

    #[test]
    fn self_pair_is_rejected() {
        let err = validate_constraints(&[(0, 0)], &[], 3).unwrap_err();
        assert!(matches!(err, Error::SelfPair { index: 0 }));
    }

    #[test]
    fn out_of_range_is_rejected() {
        let err = validate_constraints(&[(0, 7)], &[], 5).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 7, bound: 5 }));
    }

    #[test]
    fn constraint_json_roundtrip() {
        let set = validate_constraints(&[(1, 2), (0, 4)], &[(2, 3)], 5).unwrap();
        let json = serde_json::to_string(&set).unwrap();
        let back = ConstraintSet::from_json_str(&json, 5).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn constraint_json_ignores_extra_keys() {
        let text = r#"{"must_link": [[0,1]], "cannot_link": [], "version": "x"}"#;
        let set = ConstraintSet::from_json_str(text, 2).unwrap();
        assert_eq!(set.must_link(), &[(0, 1)]);
    }

    #[test]
    fn dataset_rejects_ragged_rows() {
        let err = Dataset::new(vec![vec![1.0, 2.0], vec![3.0]], None, None).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 1 }));
    }

    #[test]
    fn dataset_rejects_non_finite() {
        let err = Dataset::new(vec![vec![f64::NAN]], None, None).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn dataset_csv_roundtrip_with_labels_and_ids() {
        let data = Dataset::new(
            vec![vec![0.25, -1.5], vec![3.125, 2.0], vec![0.1, 0.2]],
            Some(vec![0, 1, 1]),
            Some(vec!["a".into(), "b".into(), "c".into()]),
        )
        .unwrap();
        let mut buf = Vec::new();
        data.to_csv_writer(&mut buf).unwrap();
        let back = Dataset::<f64>::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(data, back);
    }

    #[test]
    fn dataset_csv_parses_150x4_with_label_column() {
        let mut text = String::from("sepal_l,sepal_w,petal_l,petal_w,label\n");
        for i in 0..150 {
            let x = i as f64;
            text.push_str(&format!("{},{},{},{},{}\n", x, x * 0.5, x * 0.25, x * 0.125, i % 3));
        }
        let data = Dataset::<f64>::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(data.n(), 150);
        assert_eq!(data.dim(), 4);
        assert_eq!(data.labels().unwrap().len(), 150);
    }

    #[test]
    fn dataset_csv_empty_is_an_error() {
        assert!(Dataset::<f64>::from_csv_reader("".as_bytes()).is_err());
        assert!(matches!(
            Dataset::<f64>::from_csv_reader("f0,f1\n".as_bytes()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn partition_validates_range() {
        assert!(Partition::<f64>::new(vec![0, 1, 2], 3).is_ok());
        let err = Partition::<f64>::new(vec![0, 3], 3).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 3, bound: 3 }));
    }

    #[test]
    fn partition_json_roundtrip() {
        let p = Partition::with_centers(vec![0, 1, 0], 2, vec![vec![0.5], vec![2.0]]).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: Partition<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn matrix_validation_catches_defects() {
        assert!(matches!(
            DissimilarityMatrix::from_rows(vec![vec![0.0, 1.0], vec![2.0, 0.0]]),
            Err(Error::InvalidMatrix(_))
        ));
        assert!(matches!(
            DissimilarityMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 0.0]]),
            Err(Error::InvalidMatrix(_))
        ));
        assert!(matches!(
            DissimilarityMatrix::from_rows(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]),
            Err(Error::InvalidMatrix(_))
        ));
    }

    #[test]
    fn matrix_csv_roundtrip() {
        let m = DissimilarityMatrix::from_rows(vec![
            vec![0.0, 1.25, 3.5],
            vec![1.25, 0.0, 0.75],
            vec![3.5, 0.75, 0.0],
        ])
        .unwrap();
        let mut buf = Vec::new();
        m.to_csv_writer(&mut buf).unwrap();
        let back = DissimilarityMatrix::<f64>::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn dual_solution_validation() {
        let set = validate_constraints(&[(0, 1)], &[(1, 2)], 3).unwrap();
        let dual = DualSolution {
            k: 2,
            dual_bound: -1.0,
            iterations: 5,
            converged: true,
            must_link: vec![MustLinkDuals { i: 0, j: 1, lambda: vec![0.0, -0.5], gamma: vec![0.0, 0.0] }],
            cannot_link: vec![CannotLinkDuals { i: 1, j: 2, eta: vec![-0.25, 0.0] }],
        };
        dual.validate_for(&set, 2).unwrap();

        let mut bad = dual.clone();
        bad.cannot_link[0].eta[0] = 0.5;
        assert!(matches!(
            bad.validate_for(&set, 2),
            Err(Error::PositiveMultiplier { .. })
        ));

        let mut wrong_pair = dual;
        wrong_pair.must_link[0].j = 2;
        assert!(matches!(wrong_pair.validate_for(&set, 2), Err(Error::DualMismatch(_))));
    }
}
