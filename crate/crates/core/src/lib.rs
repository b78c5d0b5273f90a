//! Lagrangian dual information for pairwise-constrained clustering.
//!
//! Minimum-sum-of-squares (MSSC) and k-medoids clustering under must-link /
//! cannot-link constraints admit a Lagrangian relaxation whose multipliers
//! say, per constraint and per cluster, how much a constraint "costs". This
//! crate computes those multipliers with a projected subgradient method and
//! puts them to work three ways:
//!
//! * **metric fitness** ([`dualtools::fitness_score`]) — count the
//!   (constraint, cluster) pairs whose multipliers stay at zero; a distance
//!   metric under which the constraints are nearly free fits the data,
//! * **dual-guided transforms** ([`transform::run_transform`]) — move points
//!   minimally, one constraint at a time in dual-impact order, until a plain
//!   k-means run satisfies every constraint,
//! * **constraint filtering** ([`dualtools::filter_constraints`]) — drop the
//!   constraints whose dual impact says they distort the geometry most.
//!
//! Numeric kernels are generic over the scalar type through [`Scalar`]
//! (any `num_traits::Float`, in practice `f32` or `f64`). The concrete
//! aliases at the crate root fix `f64`, which is the precision all stated
//! tolerances are calibrated for.
//!
//! ```
//! use dualclust::experiments::{generate_synthetic, MetricKind, SyntheticSpec};
//! use dualclust::clustering::kmeans_multistart;
//!
//! let spec = SyntheticSpec { metric: MetricKind::Euclidean, seed: 7 };
//! let data: dualclust::Dataset = generate_synthetic(&spec).unwrap();
//! let state = kmeans_multistart(&data, 3, 20, 7).unwrap();
//! assert_eq!(state.partition.k, 3);
//! ```

pub mod clustering;
pub mod dualtools;
mod error;
pub mod experiments;
pub mod lagrangian;
mod linalg;
pub mod metrics;
mod rng;
pub mod transform;
pub mod types;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Scalar type the numeric kernels are generic over.
///
/// Blanket-implemented for every `num_traits::Float` that is also printable
/// and thread-safe — in practice `f32` and `f64`. Tolerance contracts in the
/// documentation (1e-9 and tighter) assume `f64`.
pub trait Scalar:
    num_traits::Float + std::fmt::Debug + std::fmt::Display + Default + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: num_traits::Float + std::fmt::Debug + std::fmt::Display + Default + Send + Sync + 'static
{
}

/// Converts an `f64` literal into the working scalar type.
pub(crate) fn flt<F: Scalar>(x: f64) -> F {
    F::from(x).expect("f64 constant must be representable in the scalar type")
}

// Concrete double-precision aliases. Library code is generic; most callers
// (including the CLI) want these.
pub type Dataset = types::Dataset<f64>;
pub type DissimilarityMatrix = types::DissimilarityMatrix<f64>;
pub type Partition = types::Partition<f64>;
pub type DualSolution = types::DualSolution<f64>;
pub type Metric = metrics::Metric<f64>;
pub type MsscState = clustering::MsscState<f64>;
pub type KMedoidsState = clustering::KMedoidsState<f64>;
pub type LagrangianConfig = lagrangian::LagrangianConfig<f64>;
