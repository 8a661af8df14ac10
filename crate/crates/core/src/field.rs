//! Vertical contractivity factor fields.
//!
//! A field is built by sampling how far the image departs from its
//! corner-anchored bilinear reference surface, once on a domain (`H^d`) and
//! once on the region it is mapped to (`H^r`). The per-sample ratio
//! `H^r / H^d`, signed by the product of the two deviation signs, is the
//! vertical scale that carries the domain's texture onto the region. The
//! samples are then interpolated bilinearly to give `d(x, y)` over the region.

use crate::error::{Error, Result};
use crate::grid::Rect;
use crate::image::Image;
use crate::rifs::{BilinearPatch, Orientation};

pub const DEFAULT_D_MAX: f64 = 0.95;
pub const DEFAULT_DELTA: u32 = 4;

/// Sampled vertical distances on a `(δx + 1) × (δy + 1)` lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceGrid {
    pub rect: Rect,
    pub delta_x: u32,
    pub delta_y: u32,
    pub step_x: u32,
    pub step_y: u32,
    /// `|I − B|`, indexed `l * (δx + 1) + k`.
    samples: Vec<f64>,
    /// Sign of `I − B` (+1 when zero).
    signs: Vec<f64>,
}

impl DistanceGrid {
    #[inline]
    pub fn nx(&self) -> usize {
        self.delta_x as usize + 1
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.delta_y as usize + 1
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.samples[l * self.nx() + k]
    }

    #[inline]
    pub fn sign(&self, k: usize, l: usize) -> f64 {
        self.signs[l * self.nx() + k]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Pixel position of sample `(k, l)`.
    pub fn position(&self, k: usize, l: usize) -> (u32, u32) {
        (self.rect.x0 + k as u32 * self.step_x, self.rect.y0 + l as u32 * self.step_y)
    }

    fn is_corner(&self, k: usize, l: usize) -> bool {
        (k == 0 || k == self.nx() - 1) && (l == 0 || l == self.ny() - 1)
    }

    /// Re-indexes this grid as seen through a planar map with the given
    /// orientation, so that entry `(k, l)` of the result is the sample that
    /// lands on target sample `(k, l)`.
    pub fn oriented(&self, orientation: Orientation) -> DistanceGrid {
        let (nx, ny) = (self.nx(), self.ny());
        let mut samples = vec![0.0; nx * ny];
        let mut signs = vec![1.0; nx * ny];
        for l in 0..ny {
            for k in 0..nx {
                let sk = if orientation.flip_x() { nx - 1 - k } else { k };
                let sl = if orientation.flip_y() { ny - 1 - l } else { l };
                samples[l * nx + k] = self.get(sk, sl);
                signs[l * nx + k] = self.sign(sk, sl);
            }
        }
        DistanceGrid { samples, signs, ..self.clone() }
    }

    /// Replaces zero interior entries using [`resample_on_zero`].
    pub fn resample_zeros(&mut self, image: &Image) {
        let nx = self.nx();
        for l in 0..self.ny() {
            for k in 0..nx {
                if self.get(k, l) == 0.0 && !self.is_corner(k, l) {
                    let dev = resampled_deviation(image, self, k, l);
                    self.samples[l * nx + k] = dev.abs();
                    self.signs[l * nx + k] = sign_of(dev);
                }
            }
        }
    }
}

#[inline]
fn sign_of(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Corner-anchored bilinear reference surface of `image` over `rect`.
pub fn reference_surface(image: &Image, rect: &Rect) -> BilinearPatch {
    let c = rect.corners();
    BilinearPatch::new(*rect, c.map(|(x, y)| image.get(x, y)))
}

/// Absolute vertical distances between `image` and its reference surface at
/// a `(δx + 1) × (δy + 1)` lattice spanning `rect`.
pub fn distance_grid(image: &Image, rect: &Rect, delta_x: u32, delta_y: u32) -> Result<DistanceGrid> {
    if delta_x < 2 || delta_y < 2 {
        return Err(Error::Sampling(format!("deltas must be at least 2, got {delta_x}x{delta_y}")));
    }
    if !rect.width().is_multiple_of(delta_x) || !rect.height().is_multiple_of(delta_y) {
        return Err(Error::Sampling(format!(
            "{}x{} rect cannot be sampled on a {delta_x}x{delta_y} lattice",
            rect.width(),
            rect.height()
        )));
    }
    if rect.x1 >= image.width() || rect.y1 >= image.height() {
        return Err(Error::Sampling("rect extends past the image".into()));
    }
    let reference = reference_surface(image, rect);
    let step_x = rect.width() / delta_x;
    let step_y = rect.height() / delta_y;
    let nx = delta_x as usize + 1;
    let ny = delta_y as usize + 1;
    let mut samples = Vec::with_capacity(nx * ny);
    let mut signs = Vec::with_capacity(nx * ny);
    for l in 0..ny as u32 {
        for k in 0..nx as u32 {
            let (x, y) = (rect.x0 + k * step_x, rect.y0 + l * step_y);
            let at_corner = (k == 0 || k == delta_x) && (l == 0 || l == delta_y);
            let dev = if at_corner {
                0.0
            } else {
                image.get(x, y) - reference.eval_unchecked(f64::from(x), f64::from(y))
            };
            samples.push(dev.abs());
            signs.push(sign_of(dev));
        }
    }
    Ok(DistanceGrid { rect: *rect, delta_x, delta_y, step_x, step_y, samples, signs })
}

fn resampled_deviation(image: &Image, grid: &DistanceGrid, k: usize, l: usize) -> f64 {
    let rect = grid.rect;
    let reference = reference_surface(image, &rect);
    let (x, y) = grid.position(k, l);
    let (cx, cy) = rect.center();
    let toward = |p: u32, c: f64| -> i64 {
        let p = f64::from(p);
        if p < c {
            1
        } else if p > c {
            -1
        } else {
            0
        }
    };
    let (sx, sy) = (toward(x, cx), toward(y, cy));
    if sx == 0 && sy == 0 {
        return 0.0;
    }
    for shift in 1..=2i64 {
        let nx = (i64::from(x) + sx * shift).clamp(i64::from(rect.x0), i64::from(rect.x1)) as u32;
        let ny = (i64::from(y) + sy * shift).clamp(i64::from(rect.y0), i64::from(rect.y1)) as u32;
        let dev = image.get(nx, ny) - reference.eval_unchecked(f64::from(nx), f64::from(ny));
        if dev != 0.0 {
            return dev;
        }
    }
    0.0
}

/// Distance at interior sample `(k, l)` of `grid` after shifting the sample
/// one pixel toward the rect centre, then two. Returns 0 if both shifts
/// still sit on the reference surface; corners are never resampled.
pub fn resample_on_zero(image: &Image, grid: &DistanceGrid, k: usize, l: usize) -> f64 {
    if grid.is_corner(k, l) {
        return 0.0;
    }
    resampled_deviation(image, grid, k, l).abs()
}

/// Elementwise sign product of two deviation grids in matching order.
pub fn sign_product(hr: &DistanceGrid, hd: &DistanceGrid) -> Vec<f64> {
    hr.signs.iter().zip(&hd.signs).map(|(a, b)| a * b).collect()
}

/// Sampled contractivity factors plus their bilinear interpolant.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractivityField {
    rect: Rect,
    delta_x: u32,
    delta_y: u32,
    /// Indexed `l * (δx + 1) + k`.
    ratios: Vec<f64>,
}

impl ContractivityField {
    /// Validates shape, zero corners and `|ratio| < 1`.
    pub fn new(rect: Rect, delta_x: u32, delta_y: u32, ratios: Vec<f64>) -> Result<Self> {
        let nx = delta_x as usize + 1;
        let ny = delta_y as usize + 1;
        if delta_x == 0 || delta_y == 0 || ratios.len() != nx * ny {
            return Err(Error::ShapeMismatch(format!(
                "{} ratios for a {nx}x{ny} lattice",
                ratios.len()
            )));
        }
        let field = Self { rect, delta_x, delta_y, ratios };
        for &(k, l) in &field.corner_indices() {
            if field.get(k, l) != 0.0 {
                return Err(Error::Range("field corners must be exactly 0".into()));
            }
        }
        Ok(field)
    }

    pub fn zero(rect: Rect, delta: u32) -> Self {
        let n = delta as usize + 1;
        Self { rect, delta_x: delta, delta_y: delta, ratios: vec![0.0; n * n] }
    }

    pub fn rect(&self) -> &Rect {
        &self.rect
    }

    pub fn delta(&self) -> (u32, u32) {
        (self.delta_x, self.delta_y)
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.delta_x as usize + 1
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.delta_y as usize + 1
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.ratios[l * self.nx() + k]
    }

    pub fn is_corner(&self, k: usize, l: usize) -> bool {
        (k == 0 || k == self.nx() - 1) && (l == 0 || l == self.ny() - 1)
    }

    fn corner_indices(&self) -> [(usize, usize); 4] {
        let (a, b) = (self.nx() - 1, self.ny() - 1);
        [(0, 0), (a, 0), (0, b), (a, b)]
    }

    pub fn sup_abs(&self) -> f64 {
        self.ratios.iter().fold(0.0, |m, r| f64::max(m, r.abs()))
    }

    /// Same field on another rect of equal lattice shape.
    pub fn with_rect(&self, rect: Rect) -> Self {
        Self { rect, ..self.clone() }
    }

    /// Bilinear interpolation of the samples at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if !self.rect.contains_point(x, y) {
            return Err(Error::OutOfRect { x, y });
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub fn eval_unchecked(&self, x: f64, y: f64) -> f64 {
        let u = (x - f64::from(self.rect.x0)) / f64::from(self.rect.width()) * f64::from(self.delta_x);
        let v = (y - f64::from(self.rect.y0)) / f64::from(self.rect.height()) * f64::from(self.delta_y);
        let k = (u.floor().max(0.0) as usize).min(self.delta_x as usize - 1);
        let l = (v.floor().max(0.0) as usize).min(self.delta_y as usize - 1);
        let fu = u - k as f64;
        let fv = v - l as f64;
        let top = self.get(k, l) * (1.0 - fu) + self.get(k + 1, l) * fu;
        let bottom = self.get(k, l + 1) * (1.0 - fu) + self.get(k + 1, l + 1) * fu;
        top * (1.0 - fv) + bottom * fv
    }

    /// Snaps every non-corner sample to the 8-bit lattice over
    /// `[−d_max, d_max]`.
    pub fn quantized(&self, d_max: f64) -> Self {
        let mut out = self.clone();
        let nx = self.nx();
        for l in 0..self.ny() {
            for k in 0..nx {
                if !self.is_corner(k, l) {
                    let r = self.get(k, l);
                    out.ratios[l * nx + k] = dequantize_ratio(quantize_ratio(r, d_max), d_max);
                }
            }
        }
        out
    }
}

/// Ratio field `H^r / H^d`. `hd` must already be in region order (see
/// [`DistanceGrid::oriented`]); `sign_grid` holds the per-sample sign.
/// Entries whose denominator is still zero after resampling are 0.
pub fn ratio_field(
    hr: &DistanceGrid,
    hd: &DistanceGrid,
    d_max: f64,
    sign_grid: &[f64],
) -> Result<ContractivityField> {
    if hr.nx() != hd.nx() || hr.ny() != hd.ny() || sign_grid.len() != hr.samples.len() {
        return Err(Error::ShapeMismatch(format!(
            "H^r is {}x{}, H^d is {}x{}, signs {}",
            hr.nx(),
            hr.ny(),
            hd.nx(),
            hd.ny(),
            sign_grid.len()
        )));
    }
    if !(d_max > 0.0 && d_max < 1.0) {
        return Err(Error::Range(format!("d_max must lie in (0, 1), got {d_max}")));
    }
    let nx = hr.nx();
    let mut ratios = vec![0.0; hr.samples.len()];
    for l in 0..hr.ny() {
        for k in 0..nx {
            let i = l * nx + k;
            if hr.is_corner(k, l) || hd.samples[i] == 0.0 {
                continue;
            }
            let r = sign_grid[i] * hr.samples[i] / hd.samples[i];
            ratios[i] = r.clamp(-d_max, d_max);
        }
    }
    ContractivityField::new(hr.rect, hr.delta_x, hr.delta_y, ratios)
}

/// Builds the field carrying `domain` onto `region` under `orientation`.
pub fn build_field(
    image: &Image,
    domain: &Rect,
    region: &Rect,
    orientation: Orientation,
    delta: u32,
    d_max: f64,
) -> Result<ContractivityField> {
    let hr = distance_grid(image, region, delta, delta)?;
    let mut hd = distance_grid(image, domain, delta, delta)?;
    hd.resample_zeros(image);
    let hd = hd.oriented(orientation);
    let signs = sign_product(&hr, &hd);
    ratio_field(&hr, &hd, d_max, &signs)
}

/// Nearest of 256 uniformly spaced levels spanning `[−d_max, d_max]`.
pub fn quantize_ratio(r: f64, d_max: f64) -> u8 {
    let t = (r.clamp(-d_max, d_max) + d_max) / (2.0 * d_max) * 255.0;
    t.round().clamp(0.0, 255.0) as u8
}

pub fn dequantize_ratio(q: u8, d_max: f64) -> f64 {
    f64::from(q) / 255.0 * 2.0 * d_max - d_max
}

/// Byte written for a corner sample (nearest level to zero).
pub const CORNER_CODE: u8 = 128;
