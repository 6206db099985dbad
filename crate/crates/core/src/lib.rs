//! Synchrosqueezed curvelet transform for 2D mode decomposition.
//!
//! The crate builds a generalized curvelet tight frame on an `L x L`
//! periodic grid, computes coefficients and their spatial gradients,
//! reassigns coefficient energy to estimated local wave-vectors
//! (synchrosqueezing), clusters the squeezed phase-space energy and
//! reconstructs one mode per cluster.
//!
//! Pipeline overview:
//!
//! 1. [`tiling::build_tiling`] partitions the Fourier grid into fan-shaped
//!    windows with radial extent `a^t` and angular extent `a^s`.
//! 2. [`transform::forward`] / [`transform::gradient`] evaluate coefficients
//!    on an `L_B x L_B` position grid; [`transform::transpose`] inverts them.
//! 3. [`synchro`] estimates local wave-vectors and stacks energy on a
//!    Cartesian wave-vector grid.
//! 4. [`cluster`] groups the squeezed energy with the polar adjacency rule.
//! 5. [`pipeline::decompose`] ties the stages together.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod error;
pub mod export;
pub mod pipeline;
pub mod signal;
pub mod synchro;
pub mod synth;
pub mod tiling;
pub mod transform;

mod fft;

pub use cluster::{AdjacencyParams, Clustering, PhasePoint};
pub use error::{Result, SsctError};
pub use pipeline::{DecomposeConfig, ModeSet};
pub use signal::{SpatialField, SpectrumField};
pub use synchro::{SqueezeField, VectorField2, WaveVectorEstimates};
pub use tiling::{Tile, Tiling, TilingParams};
pub use transform::CoefficientSet;

pub use num_complex::Complex64;
