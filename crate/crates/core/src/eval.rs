//! Trajectory scoring: center location error and PASCAL VOC overlap.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Axis-aligned rectangle, top-left corner plus extent, in pixels.
/// Treated as a continuous region, so areas are real-valued.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.x.is_finite() && self.y.is_finite()
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Euclidean distance between box centers.
pub fn center_error(a: &Rect, b: &Rect) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    libm::hypot(ax - bx, ay - by)
}

/// Intersection over union; 0 for disjoint boxes.
pub fn overlap(a: &Rect, b: &Rect) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceReport {
    pub center_errors: Vec<f64>,
    pub overlaps: Vec<f64>,
    pub mean_center_error: f64,
    pub mean_overlap: f64,
}

impl SequenceReport {
    pub fn frame_count(&self) -> usize {
        self.center_errors.len()
    }
}

pub fn evaluate(trajectory: &[Rect], ground_truth: &[Rect]) -> Result<SequenceReport> {
    if trajectory.len() != ground_truth.len() {
        return Err(Error::DimensionMismatch {
            expected: ground_truth.len(),
            actual: trajectory.len(),
        });
    }
    if trajectory.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    let center_errors: Vec<f64> = trajectory
        .iter()
        .zip(ground_truth)
        .map(|(t, g)| center_error(t, g))
        .collect();
    let overlaps: Vec<f64> = trajectory
        .iter()
        .zip(ground_truth)
        .map(|(t, g)| overlap(t, g))
        .collect();
    let n = trajectory.len() as f64;
    Ok(SequenceReport {
        mean_center_error: center_errors.iter().sum::<f64>() / n,
        mean_overlap: overlaps.iter().sum::<f64>() / n,
        center_errors,
        overlaps,
    })
}
