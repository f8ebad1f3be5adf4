//! Structure-based visual place recognition under similar and opposing
//! viewpoints.
//!
//! The pipeline accumulates stereo-VO structure into a world-frame point
//! cloud, emits equi-spaced keyframes, describes each keyframe as a
//! birds-eye-view max-height grid, and matches queries against a reference
//! database through a pair of streaming distance matrices searched for
//! low-sum sequence lines (positive slope for same-direction revisits,
//! negative slope for opposing-direction revisits).
//!
//! Modules follow the processing stages:
//!
//! - [`io`]: on-disk formats (trajectories, point blocks, ground truth,
//!   reference databases, match/eval reports).
//! - [`mapping`]: point-cloud accumulation and keyframe selection.
//! - [`descriptor`]: the Cartesian max-height grid and its double flip.
//! - [`distance`]: descriptor distances (variable-offset, aligned variants)
//!   and batched query-vs-database columns.
//! - [`matching`]: streaming distance matrices and the sequence matchers.
//! - [`eval`]: query labelling, precision-recall curves, MR100 and AUC.
//! - [`synthworld`]: deterministic synthetic corridors plus brute-force
//!   reference implementations used for cross-checking.
//! - [`config`], [`pipeline`]: end-to-end orchestration shared by the CLI.
//!
//! Grid and distance math is generic over the scalar type (any
//! [`scalar::Scalar`], i.e. `f32` or `f64`); the pipeline itself runs in
//! `f64` and persists descriptors as `f32`.

pub mod config;
pub mod descriptor;
pub mod distance;
pub mod eval;
pub mod io;
pub mod mapping;
pub mod matching;
pub mod pipeline;
pub mod scalar;
pub mod synthworld;

pub use scalar::Scalar;

/// Scalar type used by the end-to-end pipeline.
pub type Real = f64;

/// Descriptor grid at pipeline precision.
pub type Descriptor = descriptor::CartContext<Real>;

/// Descriptor grid at storage precision (reference databases persist `f32`).
pub type StoredDescriptor = descriptor::CartContext<f32>;
