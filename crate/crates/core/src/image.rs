//! Grayscale intensity buffers.
//!
//! [`Image`] stores `f64` intensities so that decoder iterates and synthetic
//! test surfaces are not rounded between steps. [`Image::to_gray8`] clamps to
//! `[0, 255]` and rounds only at output.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: u32, height: u32, fill: f64) -> Self {
        Self { width, height, data: vec![fill; width as usize * height as usize] }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_gray8(width: u32, height: u32, pixels: &[u8]) -> Result<Self> {
        Self::from_vec(width, height, pixels.iter().map(|&p| f64::from(p)).collect())
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: f64) {
        let i = self.index(x, y);
        self.data[i] = v;
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y as usize * self.width as usize + x as usize
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Clamped, rounded 8-bit copy.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize_intensity(v)).collect()
    }

    pub fn sup_distance(&self, other: &Image) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}

#[inline]
pub fn quantize_intensity(v: f64) -> u8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}
