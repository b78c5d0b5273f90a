//! Distance metrics and pairwise dissimilarity matrices.
//!
//! `Metric` covers the geometric family (Euclidean and friends, Mahalanobis,
//! cosine) plus two sequence-flavoured members: restricted Damerau-
//! Levenshtein (optimal string alignment: adjacent transpositions count one
//! edit, but no substring is edited twice) over coordinates compared as
//! symbols, and `Segmented`, which chops fixed-length windows out of a flat
//! vector and sums an inner metric over them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::types::{Dataset, DissimilarityMatrix};
use crate::{flt, Error, Result, Scalar};

/// A validated symmetric positive-semidefinite quadratic form for the
/// Mahalanobis distance. Eigenvalues down to -1e-9 are tolerated to absorb
/// roundoff in user-supplied matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MahalanobisForm<F: Scalar> {
    matrix: Vec<Vec<F>>,
}

impl<F: Scalar> MahalanobisForm<F> {
    pub fn new(matrix: Vec<Vec<F>>) -> Result<Self> {
        let d = matrix.len();
        if d == 0 {
            return Err(Error::InvalidMatrix("empty Mahalanobis matrix".into()));
        }
        let mut scale = F::zero();
        for row in &matrix {
            if row.len() != d {
                return Err(Error::InvalidMatrix(format!(
                    "Mahalanobis matrix row of length {} in dimension {d}",
                    row.len()
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::NonFinite("Mahalanobis matrix entry"));
                }
                scale = scale.max(v.abs());
            }
        }
        let sym_tol = (F::one() + scale) * flt(1e-9);
        for i in 0..d {
            for j in (i + 1)..d {
                if (matrix[i][j] - matrix[j][i]).abs() > sym_tol {
                    return Err(Error::InvalidMatrix(format!("asymmetry at ({i}, {j})")));
                }
            }
        }
        let min_eig = linalg::symmetric_eigenvalues(&matrix)
            .into_iter()
            .fold(F::infinity(), F::min);
        if min_eig < flt(-1e-9) {
            return Err(Error::NotPositiveSemidefinite);
        }
        Ok(MahalanobisForm { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &[Vec<F>] {
        &self.matrix
    }

    /// sqrt((a-b)^T A (a-b)), clamped at zero against roundoff.
    fn distance(&self, a: &[F], b: &[F]) -> F {
        let d = self.matrix.len();
        let mut quad = F::zero();
        for i in 0..d {
            let mut row = F::zero();
            for j in 0..d {
                row = row + self.matrix[i][j] * (a[j] - b[j]);
            }
            quad = quad + (a[i] - b[i]) * row;
        }
        quad.max(F::zero()).sqrt()
    }
}

/// The distance metrics understood by the library.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric<F: Scalar> {
    Euclidean,
    SquaredEuclidean,
    Manhattan,
    Chebyshev,
    Cosine,
    /// Restricted Damerau-Levenshtein over coordinates compared as symbols.
    DamerauLevenshtein,
    Mahalanobis(MahalanobisForm<F>),
    /// Sums `inner` over consecutive windows of `segment_length` coordinates.
    Segmented {
        inner: Box<Metric<F>>,
        segment_length: usize,
    },
}

impl<F: Scalar> Metric<F> {
    pub fn distance(&self, a: &[F], b: &[F]) -> Result<F> {
        match self {
            // Damerau-Levenshtein is the one member defined for sequences of
            // different lengths.
            Metric::DamerauLevenshtein => {
                return F::from(damerau_levenshtein(a, b))
                    .ok_or(Error::NonFinite("edit distance"));
            }
            _ => {
                if a.len() != b.len() {
                    return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
                }
            }
        }
        match self {
            Metric::Euclidean => Ok(sq_euclidean(a, b).sqrt()),
            Metric::SquaredEuclidean => Ok(sq_euclidean(a, b)),
            Metric::Manhattan => Ok(a
                .iter()
                .zip(b)
                .fold(F::zero(), |s, (&x, &y)| s + (x - y).abs())),
            Metric::Chebyshev => Ok(a
                .iter()
                .zip(b)
                .fold(F::zero(), |s, (&x, &y)| s.max((x - y).abs()))),
            Metric::Cosine => {
                let (mut dot, mut na, mut nb) = (F::zero(), F::zero(), F::zero());
                for (&x, &y) in a.iter().zip(b) {
                    dot = dot + x * y;
                    na = na + x * x;
                    nb = nb + y * y;
                }
                if na == F::zero() || nb == F::zero() {
                    return Err(Error::ZeroVector);
                }
                let sim = dot / (na.sqrt() * nb.sqrt());
                // Roundoff can push |sim| a hair past 1.
                Ok((F::one() - sim).max(F::zero()).min(flt(2.0)))
            }
            Metric::DamerauLevenshtein => unreachable!("handled above"),
            Metric::Mahalanobis(form) => {
                if a.len() != form.dim() {
                    return Err(Error::DimensionMismatch { expected: form.dim(), found: a.len() });
                }
                Ok(form.distance(a, b))
            }
            Metric::Segmented { inner, segment_length } => {
                if *segment_length == 0 || a.len() % segment_length != 0 {
                    return Err(Error::SegmentLength { dim: a.len(), segment: *segment_length });
                }
                let mut total = F::zero();
                for (sa, sb) in a.chunks(*segment_length).zip(b.chunks(*segment_length)) {
                    total = total + inner.distance(sa, sb)?;
                }
                Ok(total)
            }
        }
    }
}

/// Squared Euclidean distance without the error plumbing; the workhorse of
/// the MSSC code paths.
#[inline]
pub(crate) fn sq_euclidean<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut s = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        s = s + d * d;
    }
    s
}

/// Restricted Damerau-Levenshtein (optimal string alignment) with unit
/// costs: insertions, deletions, substitutions, and transpositions of
/// adjacent symbols, where no substring is edited more than once.
pub fn damerau_levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let cols = b.len() + 1;
    let mut two_back: Vec<usize> = vec![0; cols];
    let mut prev: Vec<usize> = (0..cols).collect();
    let mut cur: Vec<usize> = vec![0; cols];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = usize::from(a[i - 1] != b[j - 1]);
            let mut best = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + sub);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                best = best.min(two_back[j - 2] + 1);
            }
            cur[j] = best;
        }
        std::mem::swap(&mut two_back, &mut prev);
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Full pairwise dissimilarity matrix of a dataset under a metric. The
/// result is exactly symmetric with a zero diagonal: each unordered pair is
/// computed once and mirrored.
pub fn pairwise_matrix<F: Scalar>(
    data: &Dataset<F>,
    metric: &Metric<F>,
) -> Result<DissimilarityMatrix<F>> {
    let n = data.n();
    let upper: Vec<Vec<F>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| metric.distance(data.point(i), data.point(j)))
                .collect::<Result<Vec<F>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![F::zero(); n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    DissimilarityMatrix::from_flat(n, values)
}

/// Inverse-covariance Mahalanobis form for a dataset: A = (S + rI)^-1 with
/// the default ridge r = 1e-6 * trace(S) / d, S the unbiased sample
/// covariance.
pub fn mahalanobis_from_covariance<F: Scalar>(data: &Dataset<F>) -> Result<MahalanobisForm<F>> {
    let trace = covariance(data)?
        .iter()
        .enumerate()
        .fold(F::zero(), |s, (i, row)| s + row[i]);
    let d = data.dim();
    let ridge = flt::<F>(1e-6) * trace / F::from(d).expect("small dimension");
    mahalanobis_from_covariance_with_ridge(data, ridge)
}

/// Same as [`mahalanobis_from_covariance`] with an explicit ridge.
pub fn mahalanobis_from_covariance_with_ridge<F: Scalar>(
    data: &Dataset<F>,
    ridge: F,
) -> Result<MahalanobisForm<F>> {
    let d = data.dim();
    let mut sigma = covariance(data)?;
    let trace = (0..d).fold(F::zero(), |s, i| s + sigma[i][i]);
    if trace == F::zero() {
        return Err(Error::DegenerateDataset("all points identical"));
    }
    for (i, row) in sigma.iter_mut().enumerate() {
        row[i] = row[i] + ridge;
    }
    let mut inv = linalg::invert(&sigma)?;
    // Exact symmetry for the PSD validation; inversion is symmetric only up
    // to roundoff.
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = (inv[i][j] + inv[j][i]) / flt(2.0);
            inv[i][j] = avg;
            inv[j][i] = avg;
        }
    }
    MahalanobisForm::new(inv)
}

/// Unbiased sample covariance (denominator n-1). Requires n > d so the
/// estimate has any chance of being invertible.
fn covariance<F: Scalar>(data: &Dataset<F>) -> Result<Vec<Vec<F>>> {
    let (n, d) = (data.n(), data.dim());
    if n <= d {
        return Err(Error::DegenerateDataset("need more points than dimensions"));
    }
    let nf = F::from(n).expect("dataset size fits the scalar");
    let mut mean = vec![F::zero(); d];
    for p in data.points() {
        for (m, &v) in mean.iter_mut().zip(p) {
            *m = *m + v;
        }
    }
    for m in &mut mean {
        *m = *m / nf;
    }
    let denom = F::from(n - 1).expect("dataset size fits the scalar");
    let mut sigma = vec![vec![F::zero(); d]; d];
    for p in data.points() {
        for i in 0..d {
            let di = p[i] - mean[i];
            for j in i..d {
                sigma[i][j] = sigma[i][j] + di * (p[j] - mean[j]) / denom;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            sigma[i][j] = sigma[j][i];
        }
    }
    Ok(sigma)
}
