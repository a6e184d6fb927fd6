//! Training patches for the discriminative model: jittered positives on the
//! target, annular negatives around it, and the FIFO positive reservoir
//! used during online tracking.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::Rng;

use crate::error::{Error, Result};
use crate::eval::{overlap, Rect};
use crate::imagery::{box_to_state, state_to_box, warp_patch, AffineState, GrayFrame, PatchVector};

/// Positive jitter: translation in pixels and relative scale.
pub const POSITIVE_SHIFT: f64 = 2.0;
pub const POSITIVE_SCALE: f64 = 0.02;
/// Negatives must overlap the target less than this.
pub const NEGATIVE_MAX_IOU: f64 = 0.3;
/// Rejections allowed per negative before the annulus is widened.
pub const NEGATIVE_MAX_TRIES: usize = 100;
pub const RESERVOIR_CAPACITY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Negative => 0.0,
            Label::Positive => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPatch {
    pub patch: PatchVector,
    pub label: Label,
    pub frame: usize,
    /// Box the patch was warped from.
    pub source: Rect,
}

/// The unjittered state followed by `count − 1` jittered copies.
pub fn positive_states<R: Rng + ?Sized>(state: &AffineState, count: usize, rng: &mut R) -> Vec<AffineState> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(*state);
    for _ in 1..count {
        let mut s = *state;
        s.cx += rng.random_range(-POSITIVE_SHIFT..=POSITIVE_SHIFT);
        s.cy += rng.random_range(-POSITIVE_SHIFT..=POSITIVE_SHIFT);
        s.scale *= rng.random_range(1.0 - POSITIVE_SCALE..=1.0 + POSITIVE_SCALE);
        out.push(s);
    }
    out
}

pub fn sample_positives<R: Rng + ?Sized>(
    frame: &GrayFrame,
    state: &AffineState,
    base_width: f64,
    base_height: f64,
    count: usize,
    rng: &mut R,
) -> Vec<PatchVector> {
    positive_states(state, count, rng)
        .iter()
        .map(|s| warp_patch(frame, s, base_width, base_height))
        .collect()
}

/// States drawn from an annulus around the target.
///
/// Centers are offset by a radius uniform in `[0.5·d, 1.5·d]` (`d` the
/// larger side of the target box) at a uniform angle and clamped into the
/// frame; a draw is rejected while its box overlaps the target by
/// `NEGATIVE_MAX_IOU` or more. After `NEGATIVE_MAX_TRIES` rejections the
/// annulus is doubled and the search restarts; frames too small to host any
/// valid negative end up with the least-overlapping draw seen.
pub fn negative_states<R: Rng + ?Sized>(
    frame_width: usize,
    frame_height: usize,
    state: &AffineState,
    base_width: f64,
    base_height: f64,
    count: usize,
    rng: &mut R,
) -> Vec<AffineState> {
    const MAX_WIDENINGS: usize = 4;
    let target = state_to_box(state, base_width, base_height);
    let d = target.w.max(target.h);
    let max_x = (frame_width.max(1) - 1) as f64;
    let max_y = (frame_height.max(1) - 1) as f64;

    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best: Option<(f64, AffineState)> = None;
        let mut widen = 1.0;
        'search: for _ in 0..=MAX_WIDENINGS {
            for _ in 0..NEGATIVE_MAX_TRIES {
                let radius = widen * d * rng.random_range(0.5..=1.5);
                let angle = rng.random_range(0.0..TAU);
                let (sin, cos) = libm::sincos(angle);
                let mut s = *state;
                s.cx = (state.cx + radius * cos).clamp(0.0, max_x);
                s.cy = (state.cy + radius * sin).clamp(0.0, max_y);
                let iou = overlap(&state_to_box(&s, base_width, base_height), &target);
                if best.is_none_or(|(b, _)| iou < b) {
                    best = Some((iou, s));
                }
                if iou < NEGATIVE_MAX_IOU {
                    break 'search;
                }
            }
            widen *= 2.0;
        }
        out.push(best.map(|(_, s)| s).unwrap_or(*state));
    }
    out
}

pub fn sample_negatives<R: Rng + ?Sized>(
    frame: &GrayFrame,
    state: &AffineState,
    base_width: f64,
    base_height: f64,
    count: usize,
    rng: &mut R,
) -> Vec<PatchVector> {
    negative_states(frame.width(), frame.height(), state, base_width, base_height, count, rng)
        .iter()
        .map(|s| warp_patch(frame, s, base_width, base_height))
        .collect()
}

/// One annotated sequence: frames and a ground-truth box per frame.
#[derive(Debug, Clone, Copy)]
pub struct AnnotatedSequence<'a> {
    pub frames: &'a [GrayFrame],
    pub boxes: &'a [Rect],
}

/// Positives and negatives from every frame of every sequence, frame by
/// frame, positives first.
pub fn harvest_offline<R: Rng + ?Sized>(
    sequences: &[AnnotatedSequence<'_>],
    per_frame_pos: usize,
    per_frame_neg: usize,
    rng: &mut R,
) -> Result<Vec<LabeledPatch>> {
    let mut out = Vec::new();
    for seq in sequences {
        if seq.frames.len() != seq.boxes.len() {
            return Err(Error::DimensionMismatch {
                expected: seq.frames.len(),
                actual: seq.boxes.len(),
            });
        }
        for (index, (frame, gt)) in seq.frames.iter().zip(seq.boxes).enumerate() {
            if !gt.is_valid() {
                return Err(Error::InvalidState("ground-truth box must have positive size"));
            }
            let state = box_to_state(gt);
            for s in positive_states(&state, per_frame_pos, rng) {
                out.push(LabeledPatch {
                    patch: warp_patch(frame, &s, gt.w, gt.h),
                    label: Label::Positive,
                    frame: index,
                    source: state_to_box(&s, gt.w, gt.h),
                });
            }
            for s in negative_states(frame.width(), frame.height(), &state, gt.w, gt.h, per_frame_neg, rng) {
                out.push(LabeledPatch {
                    patch: warp_patch(frame, &s, gt.w, gt.h),
                    label: Label::Negative,
                    frame: index,
                    source: state_to_box(&s, gt.w, gt.h),
                });
            }
        }
    }
    Ok(out)
}

/// Most recent positives, oldest evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveReservoir {
    patches: VecDeque<PatchVector>,
    capacity: usize,
}

impl Default for PositiveReservoir {
    fn default() -> Self {
        Self::with_capacity(RESERVOIR_CAPACITY)
    }
}

impl PositiveReservoir {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            patches: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push<I: IntoIterator<Item = PatchVector>>(&mut self, patches: I) {
        for p in patches {
            if self.patches.len() == self.capacity {
                self.patches.pop_front();
            }
            if self.capacity > 0 {
                self.patches.push_back(p);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &PatchVector> {
        self.patches.iter()
    }
}
