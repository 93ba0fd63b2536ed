//! Crate-wide error type.

use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Input rows do not span a subspace of the requested dimension.
    #[error("input rows are rank deficient (row {row} has no component outside the span)")]
    RankDeficient { row: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Subset enumeration would exceed the explicit cap.
    #[error("subset enumeration too large: {count} subsets exceeds cap {cap}")]
    TooManySubsets { count: u128, cap: u64 },

    /// Every candidate subset determinant vanished; the projection to the
    /// orthogonal complement is singular beyond repair.
    #[error("degenerate subspace: all subset determinants below tolerance")]
    DegenerateSubspace,

    /// The sweep direction lies on a cone facet for some tile, so face signs
    /// are ambiguous.
    #[error("degenerate sweep direction after {attempts} attempt(s)")]
    DegenerateDirection { attempts: u32 },

    /// Direction argument must be a unit vector up to tolerance.
    #[error("direction vector is not unit length (|θ| = {norm})")]
    NotUnit { norm: f64 },

    /// Direction argument must lie in the subspace up to tolerance.
    #[error("direction vector is not inside the subspace (residual {residual})")]
    NotInSubspace { residual: f64 },

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry})")]
    AsymmetricInput { max_asymmetry: f64 },

    /// Rejection sampling guard: acceptance rate collapsed.
    #[error("rejection acceptance rate too low: {accepted} of {proposals} proposals")]
    AcceptanceTooLow { accepted: u64, proposals: u64 },

    #[error("sample batch too small: need at least {min} points, got {got}")]
    EmptyBatch { min: usize, got: usize },

    /// A numerical procedure failed in a way distinct from its ordinary
    /// negative answer (e.g. the feasibility LP hit its pivot cap).
    #[error("numerical failure: {0}")]
    NumericalFailure(&'static str),
}
