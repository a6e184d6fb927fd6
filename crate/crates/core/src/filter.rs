//! Particle propagation and MAP candidate selection.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::imagery::AffineState;

/// Lower bound for scale and aspect after diffusion.
pub const MIN_SCALE: f64 = 0.05;

/// Diagonal Gaussian random walk over the six affine parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    /// Variances in the order (cx, cy, scale, rotation, aspect, skew).
    pub variances: [f64; 6],
    pub particle_count: usize,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            variances: [6.0, 6.0, 0.01, 0.0, 0.0, 0.0],
            particle_count: 600,
        }
    }
}

impl MotionModel {
    pub fn validate(&self) -> Result<()> {
        if self.variances.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("motion variances must be finite and nonnegative"));
        }
        if self.particle_count == 0 {
            return Err(Error::InvalidConfig("particle count must be positive"));
        }
        Ok(())
    }
}

/// Draws `particle_count` states around `prev`.
pub fn propagate<R: Rng + ?Sized>(prev: &AffineState, model: &MotionModel, rng: &mut R) -> Vec<AffineState> {
    let sigmas = model.variances.map(libm::sqrt);
    let base = prev.to_array();
    (0..model.particle_count)
        .map(|_| {
            let mut p = base;
            for (v, &s) in p.iter_mut().zip(&sigmas) {
                if s > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += s * z;
                }
            }
            let mut state = AffineState::from_array(p);
            state.scale = state.scale.max(MIN_SCALE);
            state.aspect = state.aspect.max(MIN_SCALE);
            state
        })
        .collect()
}

/// `φₖ = Ĝₖ·fₖ`
pub fn collaborative_scores(generative: &[f64], discriminative: &[f64]) -> Result<Vec<f64>> {
    if generative.len() != discriminative.len() {
        return Err(Error::DimensionMismatch {
            expected: generative.len(),
            actual: discriminative.len(),
        });
    }
    Ok(generative.iter().zip(discriminative).map(|(g, f)| g * f).collect())
}

/// Scored particles of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub states: Vec<AffineState>,
    pub generative: Vec<f64>,
    pub discriminative: Vec<f64>,
    pub collaborative: Vec<f64>,
}

impl CandidateSet {
    pub fn new(states: Vec<AffineState>, generative: Vec<f64>, discriminative: Vec<f64>) -> Result<Self> {
        if states.len() != generative.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                actual: generative.len(),
            });
        }
        let collaborative = collaborative_scores(&generative, &discriminative)?;
        Ok(Self {
            states,
            generative,
            discriminative,
            collaborative,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn max_discriminative(&self) -> f64 {
        self.discriminative.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Index of the largest score, lowest index on ties. NaN never wins.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).or_else(|| (!scores.is_empty()).then_some(0))
}

/// The candidate with maximal collaborative score.
pub fn select_map(candidates: &CandidateSet) -> Result<(usize, AffineState)> {
    let i = argmax(&candidates.collaborative).ok_or(Error::Empty("candidate set"))?;
    Ok((i, candidates.states[i]))
}
