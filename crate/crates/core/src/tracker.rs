//! The online tracking loop.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::eval::Rect;
use crate::filter::{propagate, select_map, CandidateSet, MotionModel};
use crate::imagery::{box_to_state, state_to_box, warp_patch, AffineState, GrayFrame, PatchVector};
use crate::network::{self, LossWeights, NetworkParams, SgdConfig, TrainBatch, TrainConfig, ARCHITECTURE};
use crate::sampling::{negative_states, positive_states, PositiveReservoir};
use crate::subspace::{
    block_scores, compute_mask, ipca_update, masked_sum, partition_blocks, BlockSubspaceSet, OcclusionMask,
    BLOCK_COUNT, DEFAULT_MASK_DELTA, DEFAULT_MAX_RANK,
};
use crate::TrackRng;

/// Smallest accepted side of the initial box, in pixels.
pub const MIN_BOX_SIDE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Block similarity at or below which a block is masked out.
    pub mask_delta: f64,
    /// Fine-tune when the best candidate's network score falls below this.
    pub tau: f64,
    /// Minimum occlusion rate for a subspace update.
    pub chi: f64,
    pub update_interval: usize,
    pub eigenvectors: usize,
    pub forgetting: f64,
    pub motion: MotionModel,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub loss: LossWeights,
    pub online_epochs: usize,
    pub online_batch_size: usize,
    pub positives_per_frame: usize,
    pub negatives_per_finetune: usize,
    /// With this off every candidate's generative score is taken as 1, so
    /// only the network decides.
    pub generative_enabled: bool,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            mask_delta: DEFAULT_MASK_DELTA,
            tau: 0.8,
            chi: 0.8,
            update_interval: 5,
            eigenvectors: DEFAULT_MAX_RANK,
            forgetting: 0.95,
            motion: MotionModel::default(),
            learning_rate: 0.002,
            momentum: 0.9,
            weight_decay: 0.002,
            loss: LossWeights::default(),
            online_epochs: 20,
            online_batch_size: 50,
            positives_per_frame: 5,
            negatives_per_finetune: 100,
            generative_enabled: true,
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidConfig("tau must be in (0, 1]"));
        }
        if !(self.chi > 0.0 && self.chi <= 1.0) {
            return Err(Error::InvalidConfig("chi must be in (0, 1]"));
        }
        if !(self.mask_delta > 0.0) {
            return Err(Error::InvalidConfig("mask_delta must be positive"));
        }
        if self.update_interval == 0 {
            return Err(Error::InvalidConfig("update_interval must be at least 1"));
        }
        if self.eigenvectors == 0 {
            return Err(Error::InvalidConfig("eigenvectors must be at least 1"));
        }
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::InvalidConfig("forgetting must be in (0, 1]"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must be in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig("weight_decay must be nonnegative"));
        }
        if self.online_batch_size == 0 {
            return Err(Error::InvalidConfig("online batch size must be positive"));
        }
        if self.positives_per_frame == 0 {
            return Err(Error::InvalidConfig("positives_per_frame must be positive"));
        }
        self.motion.validate()
    }

    fn online_training(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.online_epochs,
            batch_size: self.online_batch_size,
            learning_rate: self.learning_rate,
            sgd: SgdConfig {
                momentum: self.momentum,
                weight_decay: self.weight_decay,
            },
            loss: self.loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackResult {
    pub frame: usize,
    pub state: AffineState,
    pub bbox: Rect,
    /// Collaborative score of the chosen candidate.
    pub score: f64,
    /// Best network score among all candidates of the frame.
    pub max_discriminative: f64,
    pub occlusion_rate: f64,
    pub finetuned: bool,
    pub subspace_updated: bool,
}

/// Tracker state between frames.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    network: NetworkParams,
    subspaces: BlockSubspaceSet,
    mask: OcclusionMask,
    reservoir: PositiveReservoir,
    state: AffineState,
    /// Blocks of recent targets with the mask each was accepted under.
    pending: VecDeque<(Vec<Vec<f64>>, OcclusionMask)>,
    frame_width: usize,
    frame_height: usize,
    frame_index: usize,
    rng: TrackRng,
}

impl Tracker {
    /// Starts tracking `init_box` in `first_frame`; also returns the result
    /// for frame 0.
    pub fn init(
        first_frame: &GrayFrame,
        init_box: &Rect,
        pretrained: NetworkParams,
        config: TrackerConfig,
    ) -> Result<(Self, TrackResult)> {
        config.validate()?;
        let arch = pretrained.architecture();
        if arch != ARCHITECTURE {
            return Err(Error::ArchitectureMismatch {
                expected: ARCHITECTURE.to_vec(),
                actual: arch,
            });
        }
        if !(init_box.w >= MIN_BOX_SIDE && init_box.h >= MIN_BOX_SIDE) || !init_box.x.is_finite() || !init_box.y.is_finite() {
            return Err(Error::DegenerateBox {
                w: init_box.w,
                h: init_box.h,
            });
        }

        let mut rng = TrackRng::seed_from_u64(config.seed);
        let state = box_to_state(init_box);
        let (bw, bh) = (init_box.w, init_box.h);
        let patch = warp_patch(first_frame, &state, bw, bh);
        let subspaces = BlockSubspaceSet::from_patch(&patch, bw, bh);

        let mut reservoir = PositiveReservoir::default();
        reservoir.push(
            positive_states(&state, config.positives_per_frame, &mut rng)
                .iter()
                .map(|s| warp_patch(first_frame, s, bw, bh)),
        );

        let mask = OcclusionMask::all_visible();
        let f = network::score(&pretrained, core::slice::from_ref(&patch))?[0];
        let g = if config.generative_enabled {
            masked_sum(&block_scores(&patch, &subspaces), &mask)
        } else {
            1.0
        };

        let tracker = Self {
            config,
            network: pretrained,
            subspaces,
            mask,
            reservoir,
            state,
            pending: VecDeque::new(),
            frame_width: first_frame.width(),
            frame_height: first_frame.height(),
            frame_index: 0,
            rng,
        };
        let first = TrackResult {
            frame: 0,
            state,
            bbox: *init_box,
            score: g * f,
            max_discriminative: f,
            occlusion_rate: mask.rate(),
            finetuned: false,
            subspace_updated: false,
        };
        Ok((tracker, first))
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn network(&self) -> &NetworkParams {
        &self.network
    }

    pub fn subspaces(&self) -> &BlockSubspaceSet {
        &self.subspaces
    }

    /// Mask that will score the next frame's candidates.
    pub fn mask(&self) -> &OcclusionMask {
        &self.mask
    }

    pub fn reservoir(&self) -> &PositiveReservoir {
        &self.reservoir
    }

    pub fn state(&self) -> &AffineState {
        &self.state
    }

    /// Number of target observations waiting for the next subspace update.
    pub fn pending_frames(&self) -> usize {
        self.pending.len()
    }

    fn base(&self) -> (f64, f64) {
        (self.subspaces.base_width, self.subspaces.base_height)
    }

    fn score_candidates(&self, frame: &GrayFrame, states: Vec<AffineState>) -> Result<CandidateSet> {
        let (bw, bh) = self.base();
        let gen = self.config.generative_enabled;
        let eval = |s: &AffineState| {
            let patch = warp_patch(frame, s, bw, bh);
            let g = if gen {
                masked_sum(&block_scores(&patch, &self.subspaces), &self.mask)
            } else {
                1.0
            };
            (patch, g)
        };
        #[cfg(feature = "parallel")]
        let scored: Vec<(PatchVector, f64)> = {
            use rayon::prelude::*;
            states.par_iter().map(eval).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let scored: Vec<(PatchVector, f64)> = states.iter().map(eval).collect();

        let (patches, generative): (Vec<PatchVector>, Vec<f64>) = scored.into_iter().unzip();
        let discriminative = network::score(&self.network, &patches)?;
        CandidateSet::new(states, generative, discriminative)
    }

    /// Processes the next frame.
    pub fn step(&mut self, frame: &GrayFrame) -> Result<TrackResult> {
        if frame.width() != self.frame_width || frame.height() != self.frame_height {
            return Err(Error::InvalidFrame("frame size differs from the first frame"));
        }
        self.frame_index += 1;
        let (bw, bh) = self.base();

        let states = propagate(&self.state, &self.config.motion, &mut self.rng);
        let candidates = self.score_candidates(frame, states)?;
        let (best, state) = select_map(&candidates)?;
        self.state = state;
        let patch = warp_patch(frame, &state, bw, bh);

        let scores = block_scores(&patch, &self.subspaces);
        let mask = compute_mask(&scores, self.config.mask_delta);
        self.mask = mask;

        self.reservoir.push(
            positive_states(&state, self.config.positives_per_frame, &mut self.rng)
                .iter()
                .map(|s| warp_patch(frame, s, bw, bh)),
        );

        let max_f = candidates.max_discriminative();
        let finetuned = max_f < self.config.tau;
        if finetuned {
            self.finetune(frame)?;
        }

        let subspace_updated = self.accumulate(&patch, mask)?;

        Ok(TrackResult {
            frame: self.frame_index,
            state,
            bbox: state_to_box(&state, bw, bh),
            score: candidates.collaborative[best],
            max_discriminative: max_f,
            occlusion_rate: mask.rate(),
            finetuned,
            subspace_updated,
        })
    }

    fn finetune(&mut self, frame: &GrayFrame) -> Result<()> {
        let (bw, bh) = self.base();
        let negatives = negative_states(
            self.frame_width,
            self.frame_height,
            &self.state,
            bw,
            bh,
            self.config.negatives_per_finetune,
            &mut self.rng,
        );
        let mut patches: Vec<PatchVector> = self.reservoir.iter().cloned().collect();
        let mut labels = alloc::vec![1.0; patches.len()];
        patches.extend(negatives.iter().map(|s| warp_patch(frame, s, bw, bh)));
        labels.resize(patches.len(), 0.0);
        let data = TrainBatch::from_patches(&patches, labels)?;
        network::train(&mut self.network, &data, &self.config.online_training(), &mut self.rng)?;
        Ok(())
    }

    /// Buffers the accepted target and, at update boundaries, either merges
    /// the buffer into the block subspaces or drops its oldest entry.
    fn accumulate(&mut self, patch: &PatchVector, mask: OcclusionMask) -> Result<bool> {
        let interval = self.config.update_interval;
        self.pending.push_back((partition_blocks(patch), mask));
        if !self.frame_index.is_multiple_of(interval) {
            while self.pending.len() > interval {
                self.pending.pop_front();
            }
            return Ok(false);
        }
        if mask.rate() < self.config.chi {
            self.pending.pop_front();
            while self.pending.len() > interval {
                self.pending.pop_front();
            }
            return Ok(false);
        }
        for b in 0..BLOCK_COUNT {
            let samples: Vec<Vec<f64>> = self
                .pending
                .iter()
                .filter(|(_, m)| m.is_visible(b))
                .map(|(blocks, _)| blocks[b].clone())
                .collect();
            if samples.is_empty() {
                continue;
            }
            let merged = ipca_update(
                self.subspaces.block(b),
                &samples,
                self.config.forgetting,
                self.config.eigenvectors,
            )?;
            self.subspaces.set_block(b, merged);
        }
        self.pending.clear();
        Ok(true)
    }
}

/// Tracks `init_box` through `frames`: one result per frame.
pub fn run(frames: &[GrayFrame], init_box: &Rect, model: NetworkParams, config: TrackerConfig) -> Result<Vec<TrackResult>> {
    let (first, rest) = frames.split_first().ok_or(Error::Empty("sequence has no frames"))?;
    let (mut tracker, r0) = Tracker::init(first, init_box, model, config)?;
    let mut out = Vec::with_capacity(frames.len());
    out.push(r0);
    for f in rest {
        out.push(tracker.step(f)?);
    }
    Ok(out)
}
