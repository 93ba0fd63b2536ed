//! Experiments, file formats and CLI around `cube-shadows-core`.
//!
//! The core crate owns all the geometry; this crate adds everything that
//! needs an operating system: Haar-ensemble experiment harnesses with
//! wall-clock timing and append-only result streaming, deterministic
//! parallel drivers for the tile scan, stable JSON/CSV artifact formats
//! with metadata headers, the plain-text subspace ingestion format, the
//! built-in verification suite, and the `cube-shadows` binary.

pub mod cli;
pub mod formats;
pub mod grassmann;
pub mod parallel;
pub mod selftest;
pub mod stats;
