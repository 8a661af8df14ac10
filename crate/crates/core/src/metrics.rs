//! Quality and size measures.

use std::fmt;

use crate::bitstream::serialize;
use crate::code::CompressedImage;
use crate::error::{Error, Result};

/// `10·log10(255² / MSE)`; `f64::INFINITY` when the images are identical.
pub fn psnr(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!("{} vs {} pixels", a.len(), b.len())));
    }
    let sse: f64 = a
        .iter()
        .zip(b)
        .map(|(&p, &q)| {
            let d = f64::from(p) - f64::from(q);
            d * d
        })
        .sum();
    let mse = sse / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

/// Raw 8-bit size over stream size.
pub fn compression_ratio(code: &CompressedImage) -> Result<f64> {
    let bytes = serialize(code)?;
    Ok(ratio_for(code.width, code.height, bytes.len()))
}

pub fn ratio_for(width: u32, height: u32, stream_len: usize) -> f64 {
    f64::from(width) * f64::from(height) / stream_len as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityReport {
    pub psnr: f64,
    pub cr: f64,
    pub encode_seconds: f64,
    pub decode_seconds: f64,
}

impl QualityReport {
    /// `CT,PSNR,CR`, e.g. `32.00,47.6,11.7`.
    pub fn csv_line(&self) -> String {
        let psnr = if self.psnr.is_infinite() { "inf".to_string() } else { format!("{:.1}", self.psnr) };
        format!("{:.2},{},{:.1}", self.encode_seconds, psnr, self.cr)
    }
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.csv_line())
    }
}
