//! Binary 8-bit PGM ("P5") frames and frame directories.

use std::fs;
use std::path::{Path, PathBuf};

use collabtrack_core::GrayFrame;

use crate::error::{AppError, AppResult};

/// Decoded 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Pgm {
    pub fn to_frame(&self) -> AppResult<GrayFrame> {
        Ok(GrayFrame::from_bytes(self.width, self.height, &self.pixels)?)
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("missing {what} in PGM header"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("bad {what} in PGM header"))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Pgm, String> {
    if !bytes.starts_with(b"P5") {
        return Err("not a binary PGM (expected P5 magic)".into());
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval} (only 255 is supported)"));
    }
    if width == 0 || height == 0 {
        return Err("PGM has zero size".into());
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("garbled PGM header".into());
    }
    let start = h.pos + 1;
    let len = width
        .checked_mul(height)
        .ok_or_else(|| "PGM dimensions overflow".to_string())?;
    let raster = bytes
        .get(start..)
        .filter(|r| r.len() >= len)
        .ok_or_else(|| format!("truncated PGM raster: need {len} bytes"))?;
    Ok(Pgm {
        width,
        height,
        pixels: raster[..len].to_vec(),
    })
}

pub fn encode(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn read(path: &Path) -> AppResult<Pgm> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode(&bytes).map_err(|msg| AppError::Format(format!("{}: {msg}", path.display())))
}

pub fn write(path: &Path, width: usize, height: usize, pixels: &[u8]) -> AppResult<()> {
    assert_eq!(pixels.len(), width * height);
    fs::write(path, encode(width, height, pixels)).map_err(|e| AppError::io(path, e))
}

/// `.pgm` files of `dir` in lexicographic order.
pub fn frame_paths(dir: &Path) -> AppResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| AppError::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| AppError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Every frame of a sequence directory, all of one size.
pub fn load_sequence(dir: &Path) -> AppResult<Vec<GrayFrame>> {
    let paths = frame_paths(dir)?;
    if paths.is_empty() {
        return Err(AppError::Format(format!("{}: no .pgm frames", dir.display())));
    }
    let mut frames: Vec<GrayFrame> = Vec::with_capacity(paths.len());
    for path in &paths {
        let pgm = read(path)?;
        if let Some(first) = frames.first() {
            if (first.width(), first.height()) != (pgm.width, pgm.height) {
                return Err(AppError::Format(format!(
                    "{}: frame is {}x{} but the sequence is {}x{}",
                    path.display(),
                    pgm.width,
                    pgm.height,
                    first.width(),
                    first.height()
                )));
            }
        }
        frames.push(pgm.to_frame()?);
    }
    Ok(frames)
}
