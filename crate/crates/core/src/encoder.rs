//! Range/domain encoder.
//!
//! The image is cut into a uniform grid of regions. Every region is compared
//! against every domain in the pool (and every axis reflection when enabled);
//! for each candidate the contractivity field is estimated from the image and
//! the candidate is scored by the RMS error of the resulting vertical map over
//! all region pixels. Regions whose best score exceeds the tolerance are split
//! into quadrants and retried, down to `max_split_depth` or the smallest leaf
//! size, where the best candidate is accepted unconditionally.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::code::{domain_pool, CodecParams, CompressedImage, RegionCode};
use crate::error::{Error, Result};
use crate::field::{
    distance_grid, ratio_field, reference_surface, sign_product, ContractivityField, DistanceGrid,
    DEFAULT_DELTA, DEFAULT_D_MAX,
};
use crate::grid::{build_partition, split_region, Domain, Region};
use crate::image::{quantize_intensity, Image};
use crate::rifs::{BilinearPatch, Orientation, PlanarMap};

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub region_cell: u32,
    /// Domain side is `domain_factor × region_cell`.
    pub domain_factor: u32,
    /// Defaults to the domain side (non-overlapping pool).
    pub domain_stride: Option<u32>,
    /// Acceptance threshold on per-region RMS error (intensity levels).
    pub tolerance: f64,
    pub d_max: f64,
    pub delta: u32,
    pub max_split_depth: u32,
    pub search_orientations: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            region_cell: 32,
            domain_factor: 2,
            domain_stride: None,
            tolerance: 8.0,
            d_max: DEFAULT_D_MAX,
            delta: DEFAULT_DELTA,
            max_split_depth: 3,
            search_orientations: true,
        }
    }
}

impl EncoderConfig {
    /// Stream-level parameters; `d_max` is rounded to hundredths as stored.
    pub fn params(&self) -> CodecParams {
        CodecParams {
            region_cell: self.region_cell,
            domain_factor: self.domain_factor,
            domain_stride: self.domain_stride.unwrap_or(self.domain_factor * self.region_cell),
            delta: self.delta,
            d_max: (self.d_max * 100.0).round() / 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        self.params().validate()
    }

    fn orientations(&self) -> &'static [Orientation] {
        const ALL: [Orientation; 4] = [
            Orientation::IDENTITY,
            Orientation::new(true, false),
            Orientation::new(false, true),
            Orientation::new(true, true),
        ];
        if self.search_orientations {
            &ALL
        } else {
            &ALL[..1]
        }
    }
}

/// Candidate pool entries with their per-domain data precomputed.
pub struct DomainEntry {
    pub domain: Domain,
    hd: DistanceGrid,
    g: BilinearPatch,
}

pub fn build_domain_pool(image: &Image, config: &EncoderConfig) -> Result<Vec<Domain>> {
    domain_pool(image.width(), image.height(), &config.params())
}

fn prepare_pool(image: &Image, config: &EncoderConfig) -> Result<Vec<DomainEntry>> {
    let delta = config.delta;
    build_domain_pool(image, config)?
        .into_iter()
        .map(|domain| {
            let mut hd = distance_grid(image, &domain.rect, delta, delta)?;
            hd.resample_zeros(image);
            let g = reference_surface(image, &domain.rect);
            Ok(DomainEntry { domain, hd, g })
        })
        .collect()
}

fn rms_of_map(
    image: &Image,
    region: &Region,
    planar: &PlanarMap,
    field: &ContractivityField,
    g: &BilinearPatch,
    h: &BilinearPatch,
) -> f64 {
    let r = region.rect;
    let mut sum = 0.0;
    for ty in r.y0..=r.y1 {
        for tx in r.x0..=r.x1 {
            let (sx, sy) = planar.preimage_pixel(tx, ty);
            let (fx, fy) = (f64::from(tx), f64::from(ty));
            let predicted = field.eval_unchecked(fx, fy)
                * (image.get(sx, sy) - g.eval_unchecked(f64::from(sx), f64::from(sy)))
                + h.eval_unchecked(fx, fy);
            let e = image.get(tx, ty) - predicted;
            sum += e * e;
        }
    }
    let n = f64::from(r.width() + 1) * f64::from(r.height() + 1);
    (sum / n).sqrt()
}

struct RegionData {
    hr: DistanceGrid,
    h: BilinearPatch,
}

fn region_data(image: &Image, region: &Region, config: &EncoderConfig) -> Result<RegionData> {
    Ok(RegionData {
        hr: distance_grid(image, &region.rect, config.delta, config.delta)?,
        h: reference_surface(image, &region.rect),
    })
}

fn score(
    image: &Image,
    region: &Region,
    data: &RegionData,
    entry: &DomainEntry,
    orientation: Orientation,
    d_max: f64,
) -> Result<(f64, ContractivityField)> {
    let planar = PlanarMap::new(entry.domain.rect, region.rect, orientation)?;
    let hd = entry.hd.oriented(orientation);
    let signs = sign_product(&data.hr, &hd);
    let field = ratio_field(&data.hr, &hd, d_max, &signs)?.quantized(d_max);
    let rms = rms_of_map(image, region, &planar, &field, &entry.g, &data.h);
    Ok((rms, field))
}

/// RMS error of coding `region` from `domain` under `orientation`, with the
/// (quantized) field that achieves it.
pub fn region_error(
    image: &Image,
    region: &Region,
    domain: &Domain,
    orientation: Orientation,
    config: &EncoderConfig,
) -> Result<(f64, ContractivityField)> {
    let mut hd = distance_grid(image, &domain.rect, config.delta, config.delta)?;
    hd.resample_zeros(image);
    let entry = DomainEntry { domain: *domain, hd, g: reference_surface(image, &domain.rect) };
    let data = region_data(image, region, config)?;
    score(image, region, &data, &entry, orientation, config.params().d_max)
}

#[derive(Clone, Debug, PartialEq)]
pub enum MatchResult {
    Accepted(RegionCode, f64),
    /// Best candidate, whose error exceeds the tolerance.
    NoMatch(RegionCode, f64),
}

impl MatchResult {
    pub fn rms(&self) -> f64 {
        match self {
            MatchResult::Accepted(_, rms) | MatchResult::NoMatch(_, rms) => *rms,
        }
    }

    pub fn into_code(self) -> RegionCode {
        match self {
            MatchResult::Accepted(code, _) | MatchResult::NoMatch(code, _) => code,
        }
    }
}

fn best_match(image: &Image, region: &Region, pool: &[DomainEntry], config: &EncoderConfig) -> Result<(RegionCode, f64, usize)> {
    let data = region_data(image, region, config)?;
    let d_max = config.params().d_max;
    let mut best: Option<(RegionCode, f64)> = None;
    let mut evaluations = 0;
    for entry in pool {
        for &orientation in config.orientations() {
            let (rms, field) = score(image, region, &data, entry, orientation, d_max)?;
            evaluations += 1;
            if best.as_ref().is_none_or(|(_, b)| rms < *b) {
                let code = RegionCode { region: region.rect, domain_id: entry.domain.id, orientation, field };
                best = Some((code, rms));
            }
        }
    }
    let (code, rms) = best.ok_or_else(|| Error::EmptyPool {
        side: config.params().domain_side(),
        width: image.width(),
        height: image.height(),
    })?;
    Ok((code, rms, evaluations))
}

/// Exhaustive search over the pool; ties go to the lowest domain id, then the
/// lowest orientation code.
pub fn match_region(image: &Image, region: &Region, pool: &[Domain], config: &EncoderConfig) -> Result<MatchResult> {
    let entries: Vec<DomainEntry> = pool
        .iter()
        .map(|domain| {
            let mut hd = distance_grid(image, &domain.rect, config.delta, config.delta)?;
            hd.resample_zeros(image);
            Ok(DomainEntry { domain: *domain, hd, g: reference_surface(image, &domain.rect) })
        })
        .collect::<Result<_>>()?;
    let (code, rms, _) = best_match(image, region, &entries, config)?;
    Ok(if rms <= config.tolerance {
        MatchResult::Accepted(code, rms)
    } else {
        MatchResult::NoMatch(code, rms)
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EncodeStats {
    /// RMS of each emitted leaf, in leaf order.
    pub leaf_rms: Vec<f64>,
    pub leaf_depths: Vec<u32>,
    /// Number of candidate evaluations performed.
    pub evaluations: usize,
}

#[derive(Default)]
struct Subtree {
    flags: Vec<bool>,
    codes: Vec<RegionCode>,
    stats: EncodeStats,
}

fn encode_node(
    image: &Image,
    region: Region,
    pool: &[DomainEntry],
    config: &EncoderConfig,
    params: &CodecParams,
    out: &mut Subtree,
) -> Result<()> {
    let (code, rms, evals) = best_match(image, &region, pool, config)?;
    out.stats.evaluations += evals;
    let can_split = region.depth < config.max_split_depth && region.side() / 2 >= params.min_leaf();
    if rms <= config.tolerance || !can_split {
        out.flags.push(false);
        out.codes.push(code);
        out.stats.leaf_rms.push(rms);
        out.stats.leaf_depths.push(region.depth);
        return Ok(());
    }
    out.flags.push(true);
    for child in split_region(&region, params.min_leaf())? {
        encode_node(image, child, pool, config, params, out)?;
    }
    Ok(())
}

pub fn encode(image: &Image, config: &EncoderConfig) -> Result<CompressedImage> {
    encode_with_stats(image, config).map(|(code, _)| code)
}

/// Encodes and reports per-leaf errors. Top-level regions are processed in
/// parallel and concatenated in row-major order, so output is independent of
/// the thread count.
pub fn encode_with_stats(image: &Image, config: &EncoderConfig) -> Result<(CompressedImage, EncodeStats)> {
    config.validate()?;
    let params = config.params();
    let partition = build_partition(image.width(), image.height(), params.region_cell)?;
    if image.width() > usize::from(u16::MAX) as u32 || image.height() > usize::from(u16::MAX) as u32 {
        return Err(Error::Dimension("images wider or taller than 65535 pixels are not supported".into()));
    }
    let pool = prepare_pool(image, config)?;
    if pool.len() > usize::from(u16::MAX) + 1 {
        return Err(Error::Config(format!("{} domains exceed the 16-bit domain id range", pool.len())));
    }
    let subtrees: Vec<Subtree> = partition
        .regions()
        .par_iter()
        .map(|region| {
            let mut sub = Subtree::default();
            encode_node(image, *region, &pool, config, &params, &mut sub)?;
            Ok(sub)
        })
        .collect::<Result<_>>()?;

    let mut split_flags = Vec::new();
    let mut codes = Vec::new();
    let mut stats = EncodeStats::default();
    for sub in subtrees {
        split_flags.extend(sub.flags);
        codes.extend(sub.codes);
        stats.leaf_rms.extend(sub.stats.leaf_rms);
        stats.leaf_depths.extend(sub.stats.leaf_depths);
        stats.evaluations += sub.stats.evaluations;
    }
    let mut vertices = BTreeMap::new();
    for code in &codes {
        for (x, y) in code.region.corners() {
            vertices.insert((y, x), quantize_intensity(image.get(x, y)));
        }
    }
    let code = CompressedImage { width: image.width(), height: image.height(), params, split_flags, codes, vertices };
    Ok((code, stats))
}
