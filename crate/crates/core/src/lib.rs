//! High-frame-rate visual-token aligner.
//!
//! Per-frame encoder features are grouped into processing windows of `w`
//! frames, concatenated along the feature dimension, compressed by a
//! two-layer GELU MLP and reduced by a 2x2 spatial max pool. The aligner can
//! be initialized from a single-frame aligner with block-matrix weights so
//! that its initial output is the per-frame average, and it can be decoded
//! at lower frame rates by frame repetition or by weight trimming.
//!
//! Modules:
//! - [`numerics`]: dense kernels with backward passes, finite-difference
//!   oracle, binary tensor container.
//! - [`features`]: frame sampling, synthetic rotating-dot videos, encoder
//!   stub, window partitioning, feature files.
//! - [`aligner`]: block-matrix init and window forward/backward.
//! - [`decoding`]: repeat and trim decoding.
//! - [`trainer`]: toy classifier pipeline for the frame-rate experiment.
//! - [`analysis`]: cosine-similarity reports, token budget, MAC cost model.
//! - [`verify`]: averaging-identity and gradient self-checks.

pub mod aligner;
pub mod analysis;
pub mod decoding;
pub mod error;
pub mod features;
pub mod numerics;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::{Scalar, Tensor};
