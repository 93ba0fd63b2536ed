//! Exact geometry and probability of hypercube shadows.
//!
//! Let `E` be an `(n-k)`-dimensional subspace of ℝⁿ and `K = P_E(B∞ⁿ)` the
//! orthogonal projection ("shadow") of the unit cube onto it. `K` is a
//! zonotope, and the uniform probability measure on `K` admits an exact
//! decomposition over the projections of finitely many `(n-k)`-faces of the
//! cube, which tile `K`. This crate computes that tiling and everything that
//! follows from it in closed form:
//!
//! * [`subspace`] — subspaces as orthonormal bases, projectors, Haar-random
//!   draws from the Grassmannian, and projector distances;
//! * [`tiling`] — the face tiling of the shadow, tile geometries
//!   (`P_E(F) = a_F + T_F(B∞^{n-k})`), weights, volumes, point location,
//!   and the independent determinant-sum zonotope volume;
//! * [`moments`] — exact first and second moments of `|x|²` per tile and for
//!   the whole shadow, the covariance matrix, its largest eigenvalue, and
//!   the variance-conjecture ratio `Var|x|² / (λ² · E|x|²)`;
//! * [`sampler`] — exact uniform sampling on `K` through the tiling, an
//!   independent LP-feasibility membership test with a rejection sampler on
//!   top of it, and Monte Carlo estimators with standard errors;
//! * [`simplex`] — the bounded-variable phase-1 simplex behind the
//!   membership test;
//! * [`linalg`] — the small dense kernels (MGS, LU, Jacobi eigenvalues)
//!   everything is built on.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default
//! `std` feature and enable `libm` to build without the standard library.
//! All randomness is ChaCha8 with explicit stream derivation (see [`rng`]),
//! so every result is reproducible bit-for-bit from a single `u64` seed.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("cube-shadows-core requires either the `std` or the `libm` feature");

pub mod combinatorics;
pub mod error;
pub mod linalg;
pub(crate) mod math;
pub mod moments;
pub mod rng;
pub mod sampler;
pub mod simplex;
pub mod subspace;
pub mod tiling;

pub use error::{Error, Result};
pub use moments::{body_report, streaming_report, BoundFlags, MomentReport};
pub use sampler::{
    contains, mc_moments, rejection_sample, sample_uniform, MCMoments, SampleBatch, SampleMethod,
};
pub use subspace::{ProjectorDistance, Subspace};
pub use tiling::{
    enumerate_tiling, locate, tile_geometry, zonotope_volume, Face, LocateOutcome, Tile,
    TileGeometry, Tiling, TilingTolerances,
};
