//! Frames, observation patches and the affine warp between them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::Rect;

/// Side of the normalized observation patch.
pub const PATCH_SIDE: usize = 32;
/// Length of a flattened observation patch.
pub const PATCH_DIM: usize = PATCH_SIDE * PATCH_SIDE;

const HALF: f64 = (PATCH_SIDE as f64 - 1.0) / 2.0;

/// A grayscale frame with row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame("width and height must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidFrame("intensity outside [0, 1]"));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// 8-bit samples, scaled by 1/255.
    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, alloc::vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Bilinear sample; coordinates outside the frame clamp to the border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        // NaN falls through clamp unchanged; map it to the origin.
        let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, max_x) };
        let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, max_y) };
        let x0 = libm::floor(x) as usize;
        let y0 = libm::floor(y) as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
        let bottom = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// A 32×32 observation flattened row-major to 1024 values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchVector(Vec<f64>);

impl PatchVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != PATCH_DIM {
            return Err(Error::DimensionMismatch {
                expected: PATCH_DIM,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidPatch("value outside [0, 1]"));
        }
        Ok(Self(values))
    }

    pub fn filled(value: f64) -> Result<Self> {
        Self::new(alloc::vec![value; PATCH_DIM])
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.0[row * PATCH_SIDE + col]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for PatchVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Six-parameter target pose.
///
/// `scale` multiplies the base box size, `aspect` additionally stretches the
/// vertical axis, `rotation` turns the horizontal template axis and `skew`
/// is an extra angle applied to the vertical one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineState {
    pub cx: f64,
    pub cy: f64,
    pub scale: f64,
    pub rotation: f64,
    pub aspect: f64,
    pub skew: f64,
}

impl AffineState {
    /// Upright state with unit scale and aspect.
    pub const fn at(cx: f64, cy: f64) -> Self {
        Self {
            cx,
            cy,
            scale: 1.0,
            rotation: 0.0,
            aspect: 1.0,
            skew: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidState("non-finite center"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidState("scale must be positive"));
        }
        if !(self.aspect > 0.0 && self.aspect.is_finite()) {
            return Err(Error::InvalidState("aspect must be positive"));
        }
        if !(self.rotation.is_finite() && self.skew.is_finite()) {
            return Err(Error::InvalidState("non-finite angle"));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.cx,
            self.cy,
            self.scale,
            self.rotation,
            self.aspect,
            self.skew,
        ]
    }

    pub fn from_array(p: [f64; 6]) -> Self {
        Self {
            cx: p[0],
            cy: p[1],
            scale: p[2],
            rotation: p[3],
            aspect: p[4],
            skew: p[5],
        }
    }
}

/// Linear part of the template-to-frame map: `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy)]
struct Warp {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    tx: f64,
    ty: f64,
}

impl Warp {
    fn new(state: &AffineState, base_width: f64, base_height: f64) -> Self {
        let sx = state.scale * base_width / PATCH_SIDE as f64;
        let sy = state.scale * state.aspect * base_height / PATCH_SIDE as f64;
        let (sin_r, cos_r) = libm::sincos(state.rotation);
        let (sin_k, cos_k) = libm::sincos(state.rotation + state.skew);
        Self {
            a: sx * cos_r,
            b: -sy * sin_k,
            c: sx * sin_r,
            d: sy * cos_k,
            tx: state.cx,
            ty: state.cy,
        }
    }

    #[inline]
    fn apply(&self, du: f64, dv: f64) -> (f64, f64) {
        (
            self.tx + self.a * du + self.b * dv,
            self.ty + self.c * du + self.d * dv,
        )
    }
}

/// Frame coordinates of template pixel `(u, v)`, measured from the template
/// center at 15.5.
pub fn affine_map(state: &AffineState, base_width: f64, base_height: f64, u: f64, v: f64) -> (f64, f64) {
    Warp::new(state, base_width, base_height).apply(u - HALF, v - HALF)
}

/// Extracts the normalized 32×32 observation for `state`.
pub fn warp_patch(frame: &GrayFrame, state: &AffineState, base_width: f64, base_height: f64) -> PatchVector {
    let warp = Warp::new(state, base_width, base_height);
    let mut values = Vec::with_capacity(PATCH_DIM);
    for v in 0..PATCH_SIDE {
        let dv = v as f64 - HALF;
        for u in 0..PATCH_SIDE {
            let (x, y) = warp.apply(u as f64 - HALF, dv);
            values.push(frame.sample_bilinear(x, y).clamp(0.0, 1.0));
        }
    }
    PatchVector(values)
}

/// Axis-aligned bounds of the warped template's outer corners.
pub fn state_to_box(state: &AffineState, base_width: f64, base_height: f64) -> Rect {
    let warp = Warp::new(state, base_width, base_height);
    let edge = PATCH_SIDE as f64 / 2.0;
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for (du, dv) in [(-edge, -edge), (edge, -edge), (-edge, edge), (edge, edge)] {
        let (x, y) = warp.apply(du, dv);
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    Rect::new(min_x, min_y, max_x - min_x, max_y - min_y)
}

/// Inverse of [`state_to_box`] for upright boxes.
pub fn box_to_state(rect: &Rect) -> AffineState {
    let (cx, cy) = rect.center();
    AffineState::at(cx, cy)
}
