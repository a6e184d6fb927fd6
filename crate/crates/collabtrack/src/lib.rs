//! Files, configuration, synthetic data and commands around
//! `collabtrack-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod pgm;
pub mod synth;

pub use config::RunConfig;
pub use error::{AppError, AppResult};

/// Name of the ground-truth file inside a sequence directory.
pub const GROUND_TRUTH_FILE: &str = "groundtruth.txt";
