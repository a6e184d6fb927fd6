//! Seeded synthetic sequences with exact ground truth.
//!
//! A square target covered by a bright mosaic drifts over a static, darker
//! mosaic along a linear-plus-sinusoidal path. An optional black bar
//! sweeps across the target for a span of frames.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use collabtrack_core::{GrayFrame, Rect, TrackRng};
use rand::{Rng, SeedableRng};

use crate::error::{AppError, AppResult};
use crate::{formats, pgm, GROUND_TRUTH_FILE};

/// Intensity byte of the occluder; the textures never reach it.
pub const OCCLUDER_VALUE: u8 = 0;
const MARGIN: f64 = 4.0;
const TARGET_CELL: usize = 4;
const BACKGROUND_CELL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub target: usize,
    pub occluder_fraction: f64,
    /// First and last occluded frame, inclusive.
    pub occluder_start: usize,
    pub occluder_end: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            frames: 100,
            width: 160,
            height: 120,
            target: 32,
            occluder_fraction: 0.0,
            occluder_start: 40,
            occluder_end: 60,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.frames == 0 {
            return Err("synth_frames must be at least 1".into());
        }
        if self.target < 4 {
            return Err("synth_target_size must be at least 4".into());
        }
        if self.width < self.target + 2 * MARGIN as usize || self.height < self.target + 2 * MARGIN as usize {
            return Err("synthetic frame too small for the target".into());
        }
        if !(0.0..=1.0).contains(&self.occluder_fraction) {
            return Err("synth_occluder_fraction must be in [0, 1]".into());
        }
        if self.occluder_start > self.occluder_end {
            return Err("synth_occluder_start must not exceed synth_occluder_end".into());
        }
        Ok(())
    }

    fn occluder_width(&self) -> usize {
        ((self.occluder_fraction * self.target as f64).ceil() as usize).min(self.target)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSequence {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Vec<u8>>,
    pub boxes: Vec<Rect>,
}

impl SynthSequence {
    pub fn gray_frames(&self) -> Vec<GrayFrame> {
        self.frames
            .iter()
            .map(|f| GrayFrame::from_bytes(self.width, self.height, f).expect("synthetic frame"))
            .collect()
    }
}

/// Random levels on a grid of square cells.
struct Mosaic {
    cell: usize,
    cols: usize,
    levels: Vec<f64>,
}

impl Mosaic {
    fn random(rng: &mut TrackRng, side: usize, cell: usize, lo: f64, hi: f64) -> Self {
        let cols = side.div_ceil(cell);
        let levels = (0..cols * cols).map(|_| rng.random_range(lo..=hi)).collect();
        Self { cell, cols, levels }
    }

    fn byte(&self, u: usize, v: usize) -> u8 {
        let level = self.levels[(v / self.cell) * self.cols + u / self.cell];
        (level * 255.0).round() as u8
    }
}

/// Integer offsets along one axis, all within `[lo, lo + room]`.
fn axis_path(rng: &mut TrackRng, frames: usize, room: f64) -> Vec<f64> {
    let drift = rng.random_range(0.2..0.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let amp = rng.random_range(6.0..16.0);
    // Peak sinusoidal speed stays below 1.2 px/frame.
    let omega = rng.random_range(0.5..1.0) * 1.2 / amp;
    let phase = rng.random_range(0.0..TAU);
    let raw: Vec<f64> = (0..frames)
        .map(|t| {
            let t = t as f64;
            drift * t + amp * ((omega * t + phase).sin() - phase.sin())
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let extent = hi - lo;
    let shrink = if extent > room { room / extent } else { 1.0 };
    let start = rng.random_range(0.0..=(room - extent * shrink));
    raw.iter().map(|r| (start + (r - lo) * shrink).round()).collect()
}

pub fn generate(params: &SynthParams, seed: u64) -> SynthSequence {
    let mut rng = TrackRng::seed_from_u64(seed);
    let (w, h, n) = (params.width, params.height, params.target);
    let background = Mosaic::random(&mut rng, w.max(h), BACKGROUND_CELL, 0.05, 0.45);
    let target = Mosaic::random(&mut rng, n, TARGET_CELL, 0.35, 1.0);
    let xs = axis_path(&mut rng, params.frames, w as f64 - n as f64 - 2.0 * MARGIN);
    let ys = axis_path(&mut rng, params.frames, h as f64 - n as f64 - 2.0 * MARGIN);

    let backdrop: Vec<u8> = (0..w * h)
        .map(|i| background.byte(i % w, i / w))
        .collect();
    let skin: Vec<u8> = (0..n * n).map(|i| target.byte(i % n, i / n)).collect();
    let bar = params.occluder_width();

    let mut frames = Vec::with_capacity(params.frames);
    let mut boxes = Vec::with_capacity(params.frames);
    for t in 0..params.frames {
        let x0 = (MARGIN + xs[t]) as usize;
        let y0 = (MARGIN + ys[t]) as usize;
        let mut px = backdrop.clone();
        for v in 0..n {
            px[(y0 + v) * w + x0..(y0 + v) * w + x0 + n].copy_from_slice(&skin[v * n..(v + 1) * n]);
        }
        if bar > 0 && (params.occluder_start..=params.occluder_end).contains(&t) {
            let span = (params.occluder_end - params.occluder_start).max(1) as f64;
            let progress = (t - params.occluder_start) as f64 / span;
            let bx = x0 + ((n - bar) as f64 * progress).round() as usize;
            for v in 0..n {
                px[(y0 + v) * w + bx..(y0 + v) * w + bx + bar].fill(OCCLUDER_VALUE);
            }
        }
        frames.push(px);
        boxes.push(Rect::new(x0 as f64, y0 as f64, n as f64, n as f64));
    }
    SynthSequence {
        width: w,
        height: h,
        frames,
        boxes,
    }
}

/// Writes `00000.pgm`, `00001.pgm`, ... and the ground-truth file.
pub fn write_sequence(dir: &Path, seq: &SynthSequence) -> AppResult<()> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    for (i, f) in seq.frames.iter().enumerate() {
        pgm::write(&dir.join(format!("{i:05}.pgm")), seq.width, seq.height, f)?;
    }
    formats::write_ground_truth(&dir.join(GROUND_TRUTH_FILE), &seq.boxes)
}
