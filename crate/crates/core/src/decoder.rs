//! Deterministic-iteration decoder.
//!
//! Each sweep rebuilds every pixel from the previous buffer:
//! `new(x', y') = d(x', y') · (old(x, y) − g(x, y)) + h(x', y')`, where
//! `(x, y)` is the domain pixel that the leaf's planar map sends to
//! `(x', y')`. Leaves share their boundary rows and columns; a shared pixel
//! is written by the smallest leaf containing it, so every leaf corner is
//! written by a leaf for which it is a corner and thus reproduces its vertex
//! value exactly.

use rayon::prelude::*;

use crate::code::CompressedImage;
use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Clone, Copy, Debug)]
struct Tap {
    source: u32,
    d: f64,
    g: f64,
    h: f64,
}

/// Per-pixel sweep coefficients derived from a code.
#[derive(Clone, Debug)]
pub struct DecodePlan {
    width: u32,
    height: u32,
    taps: Vec<Tap>,
    max_d: f64,
}

impl DecodePlan {
    pub fn new(code: &CompressedImage) -> Result<Self> {
        let maps = code.maps()?;
        let (w, h) = (code.width, code.height);
        let npix = w as usize * h as usize;

        let mut order: Vec<usize> = (0..maps.len()).collect();
        // Larger leaves first so smaller ones overwrite shared edges.
        order.sort_by_key(|&k| std::cmp::Reverse(maps[k].region().area()));
        let mut owner = vec![usize::MAX; npix];
        for &k in &order {
            let r = maps[k].region();
            if r.x1 >= w || r.y1 >= h {
                return Err(Error::CorruptCode(format!("region {r:?} exceeds the image")));
            }
            for y in r.y0..=r.y1 {
                let row = y as usize * w as usize;
                owner[row + r.x0 as usize..=row + r.x1 as usize].fill(k);
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(Error::CorruptCode("leaves do not cover the image".into()));
        }

        let mut taps = vec![Tap { source: 0, d: 0.0, g: 0.0, h: 0.0 }; npix];
        let mut max_d: f64 = 0.0;
        for (k, map) in maps.iter().enumerate() {
            let r = *map.region();
            for ty in r.y0..=r.y1 {
                for tx in r.x0..=r.x1 {
                    let t = ty as usize * w as usize + tx as usize;
                    if owner[t] != k {
                        continue;
                    }
                    let (sx, sy) = map.planar.preimage_pixel(tx, ty);
                    let (fx, fy) = (f64::from(tx), f64::from(ty));
                    let d = map.field.eval_unchecked(fx, fy);
                    max_d = max_d.max(d.abs());
                    taps[t] = Tap {
                        source: sy * w + sx,
                        d,
                        g: map.g.eval_unchecked(f64::from(sx), f64::from(sy)),
                        h: map.h.eval_unchecked(fx, fy),
                    };
                }
            }
        }
        Ok(Self { width: w, height: h, taps, max_d })
    }

    /// `sup |d|` over all pixels; the sweep is a contraction with this factor
    /// in the sup norm.
    pub fn max_contraction(&self) -> f64 {
        self.max_d
    }

    pub fn apply(&self, old: &Image) -> Image {
        let src = old.data();
        let data: Vec<f64> = self
            .taps
            .par_iter()
            .map(|t| t.d * (src[t.source as usize] - t.g) + t.h)
            .collect();
        Image::from_vec(self.width, self.height, data).expect("plan matches its own dimensions")
    }

    pub fn sweep(&self, state: &DecodeState) -> Result<DecodeState> {
        if state.buffer.width() != self.width || state.buffer.height() != self.height {
            return Err(Error::DimensionMismatch(format!(
                "buffer is {}x{}, code is {}x{}",
                state.buffer.width(),
                state.buffer.height(),
                self.width,
                self.height
            )));
        }
        let buffer = self.apply(&state.buffer);
        let last_delta = buffer.sup_distance(&state.buffer);
        Ok(DecodeState { buffer, iteration: state.iteration + 1, last_delta })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeState {
    pub buffer: Image,
    pub iteration: usize,
    pub last_delta: f64,
}

impl DecodeState {
    pub fn new(buffer: Image) -> Self {
        Self { buffer, iteration: 0, last_delta: f64::INFINITY }
    }
}

pub fn decode_sweep(code: &CompressedImage, state: &DecodeState) -> Result<DecodeState> {
    DecodePlan::new(code)?.sweep(state)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Initial {
    Flat(f64),
    Buffer(Image),
}

impl Default for Initial {
    fn default() -> Self {
        Initial::Flat(128.0)
    }
}

pub const DEFAULT_MAX_ITER: usize = 16;
pub const DEFAULT_EPS: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    /// Final iterate, unclamped.
    pub buffer: Image,
    pub iterations: usize,
    /// `last_delta` after each sweep.
    pub deltas: Vec<f64>,
}

impl Decoded {
    pub fn last_delta(&self) -> f64 {
        self.deltas.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn to_gray8(&self) -> Vec<u8> {
        self.buffer.to_gray8()
    }
}

/// Sweeps until `last_delta < eps` or `max_iter` sweeps have run.
pub fn decode(code: &CompressedImage, max_iter: usize, eps: f64, initial: &Initial) -> Result<Decoded> {
    if max_iter == 0 {
        return Err(Error::Range("max_iter must be at least 1".into()));
    }
    if !(eps >= 0.0) {
        return Err(Error::Range(format!("eps must be non-negative, got {eps}")));
    }
    let plan = DecodePlan::new(code)?;
    let start = match initial {
        Initial::Flat(v) => Image::new(code.width, code.height, *v),
        Initial::Buffer(img) => img.clone(),
    };
    let mut state = DecodeState::new(start);
    let mut deltas = Vec::new();
    while state.iteration < max_iter {
        state = plan.sweep(&state)?;
        deltas.push(state.last_delta);
        if state.last_delta < eps {
            break;
        }
    }
    Ok(Decoded { buffer: state.buffer, iterations: state.iteration, deltas })
}

/// `sup |image − sweep(image)|`.
pub fn fixed_point_residual(code: &CompressedImage, image: &Image) -> Result<f64> {
    let plan = DecodePlan::new(code)?;
    Ok(plan.sweep(&DecodeState::new(image.clone()))?.last_delta)
}
