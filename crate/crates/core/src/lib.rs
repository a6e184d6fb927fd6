//! Collaborative visual tracking.
//!
//! A target in a grayscale sequence is located by a particle filter whose
//! candidates are scored by the product of two models:
//!
//! * a shallow generative model: a 4×4 grid of incrementally updated PCA
//!   subspaces, one per 8×8 block of the 32×32 observation, with a binary
//!   occlusion mask that drops blocks the subspaces cannot explain;
//! * a deep discriminative model: a 1024-256-64-16-1 logistic network
//!   initialized by greedy RBM pretraining and fine-tuned online.
//!
//! The crate is `no_std` (with `alloc`) so the algorithms can be embedded
//! anywhere; file formats, configuration and the command line live in the
//! `collabtrack` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod filter;
pub mod imagery;
pub mod linalg;
pub mod model_format;
pub mod network;
pub mod sampling;
pub mod subspace;
pub mod tracker;

pub use error::{Error, Result};
pub use eval::{center_error, evaluate, overlap, Rect, SequenceReport};
pub use filter::{CandidateSet, MotionModel};
pub use imagery::{AffineState, GrayFrame, PatchVector, PATCH_DIM, PATCH_SIDE};
pub use network::{NetworkParams, RbmParams, TrainBatch, ARCHITECTURE};
pub use subspace::{BlockSubspace, BlockSubspaceSet, GlobalSubspace, OcclusionMask};
pub use tracker::{TrackResult, Tracker, TrackerConfig};

/// Seeded generator used wherever the crate owns its randomness.
pub type TrackRng = rand_chacha::ChaCha8Rng;
