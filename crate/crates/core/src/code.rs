//! The compressed representation: quadtree of regions, one [`RegionCode`]
//! per leaf, and the 8-bit vertex plane that anchors every `g` and `h`
//! patch.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::field::ContractivityField;
use crate::grid::{split_region, Domain, Rect, Region, MIN_REGION_CELL};
use crate::rifs::{BilinearPatch, Orientation, PlanarMap, RifsMap};

/// Parameters needed to rebuild geometry from a stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodecParams {
    pub region_cell: u32,
    pub domain_factor: u32,
    pub domain_stride: u32,
    pub delta: u32,
    pub d_max: f64,
}

impl CodecParams {
    pub fn domain_side(&self) -> u32 {
        self.domain_factor * self.region_cell
    }

    /// Smallest leaf side the quadtree may reach.
    pub fn min_leaf(&self) -> u32 {
        MIN_REGION_CELL.max(self.delta)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if !self.region_cell.is_power_of_two() || self.region_cell < MIN_REGION_CELL {
            return cfg(format!("region cell must be a power of two >= {MIN_REGION_CELL}, got {}", self.region_cell));
        }
        if self.domain_factor < 2 {
            return cfg(format!("domain factor must be at least 2, got {}", self.domain_factor));
        }
        if self.domain_stride == 0 || !self.domain_stride.is_multiple_of(self.region_cell) {
            return cfg(format!(
                "domain stride {} must be a positive multiple of the region cell {}",
                self.domain_stride, self.region_cell
            ));
        }
        if self.domain_stride / self.region_cell > 255 {
            return cfg("domain stride is too large to encode".into());
        }
        if !self.delta.is_power_of_two() || self.delta < 2 || !self.region_cell.is_multiple_of(self.delta) {
            return cfg(format!(
                "delta must be a power of two >= 2 dividing the region cell, got {}",
                self.delta
            ));
        }
        if !(self.d_max > 0.0 && self.d_max < 1.0) {
            return cfg(format!("d_max must lie in (0, 1), got {}", self.d_max));
        }
        Ok(())
    }
}

/// Lattice of `side`-wide square domains at `stride`, numbered row-major.
pub fn domain_pool(width: u32, height: u32, params: &CodecParams) -> Result<Vec<Domain>> {
    let side = params.domain_side();
    let stride = params.domain_stride;
    let positions = |extent: u32| -> Vec<u32> {
        if side > extent.saturating_sub(1) {
            return Vec::new();
        }
        (0..=extent - 1 - side).step_by(stride as usize).collect()
    };
    let xs = positions(width);
    let ys = positions(height);
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptyPool { side, width, height });
    }
    let mut pool = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            pool.push(Domain::new(pool.len(), Rect::square(x, y, side), params.region_cell)?);
        }
    }
    Ok(pool)
}

/// One leaf's compressed record.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionCode {
    pub region: Rect,
    pub domain_id: usize,
    pub orientation: Orientation,
    pub field: ContractivityField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressedImage {
    pub width: u32,
    pub height: u32,
    pub params: CodecParams,
    /// Pre-order split flags, one per node, top-level regions in row-major
    /// order.
    pub split_flags: Vec<bool>,
    /// One code per leaf, in pre-order.
    pub codes: Vec<RegionCode>,
    /// Values at every leaf corner, keyed `(y, x)`.
    pub vertices: BTreeMap<(u32, u32), u8>,
}

impl CompressedImage {
    /// Leaf regions implied by the split flags.
    pub fn leaves(&self) -> Result<Vec<Region>> {
        leaves_from_flags(self.width, self.height, &self.params, &self.split_flags)
    }

    pub fn domain_pool(&self) -> Result<Vec<Domain>> {
        domain_pool(self.width, self.height, &self.params)
    }

    pub fn vertex(&self, x: u32, y: u32) -> Result<f64> {
        self.vertices
            .get(&(y, x))
            .map(|&v| f64::from(v))
            .ok_or_else(|| Error::CorruptCode(format!("vertex ({x}, {y}) is missing from the vertex plane")))
    }

    pub fn patch(&self, rect: &Rect) -> Result<BilinearPatch> {
        let mut values = [0.0; 4];
        for (slot, (x, y)) in values.iter_mut().zip(rect.corners()) {
            *slot = self.vertex(x, y)?;
        }
        Ok(BilinearPatch::new(*rect, values))
    }

    /// The RIFS maps, one per leaf, in leaf order.
    pub fn maps(&self) -> Result<Vec<RifsMap>> {
        let pool = self.domain_pool()?;
        let leaves = self.leaves()?;
        if leaves.len() != self.codes.len() {
            return Err(Error::CorruptCode(format!(
                "{} leaves but {} region codes",
                leaves.len(),
                self.codes.len()
            )));
        }
        leaves
            .iter()
            .zip(&self.codes)
            .map(|(leaf, code)| {
                if code.region != leaf.rect {
                    return Err(Error::CorruptCode(format!("code rect {:?} does not match leaf {:?}", code.region, leaf.rect)));
                }
                let domain = pool.get(code.domain_id).ok_or_else(|| {
                    Error::CorruptCode(format!("domain {} not in a pool of {}", code.domain_id, pool.len()))
                })?;
                if *code.field.rect() != leaf.rect {
                    return Err(Error::CorruptCode("field rect does not match its region".into()));
                }
                let planar = PlanarMap::new(domain.rect, leaf.rect, code.orientation)
                    .map_err(|e| Error::CorruptCode(e.to_string()))?;
                RifsMap::new(planar, code.field.clone(), self.patch(&domain.rect)?, self.patch(&leaf.rect)?)
                    .map_err(|e| Error::CorruptCode(e.to_string()))
            })
            .collect()
    }

    /// Domain rect referenced by leaf `index`.
    pub fn domain_rect(&self, index: usize) -> Result<Rect> {
        let pool = self.domain_pool()?;
        let id = self.codes.get(index).map(|c| c.domain_id).unwrap_or(usize::MAX);
        pool.get(id)
            .map(|d| d.rect)
            .ok_or_else(|| Error::CorruptCode(format!("domain {id} not in the pool")))
    }
}

/// Walks the pre-order flags. Every node carries a flag; a set flag on a node
/// that cannot be split is an error.
pub fn leaves_from_flags(width: u32, height: u32, params: &CodecParams, flags: &[bool]) -> Result<Vec<Region>> {
    let (leaves, used) = walk_flags(width, height, params, |i| flags.get(i).copied())?;
    if used != flags.len() {
        return Err(Error::CorruptCode(format!("{} split flags but the tree uses {used}", flags.len())));
    }
    Ok(leaves)
}

/// Tree walk driven by a flag source; returns the leaves and the number of
/// flags consumed. A `None` from the source means the flags ran out.
pub(crate) fn walk_flags(
    width: u32,
    height: u32,
    params: &CodecParams,
    mut flag: impl FnMut(usize) -> Option<bool>,
) -> Result<(Vec<Region>, usize)> {
    let top = crate::grid::build_partition(width, height, params.region_cell)?;
    let mut leaves = Vec::new();
    let mut used = 0usize;
    let mut stack: Vec<Region> = Vec::new();
    for region in top.regions() {
        stack.push(*region);
        while let Some(node) = stack.pop() {
            let split = flag(used).ok_or_else(|| Error::CorruptCode("split flags ended early".into()))?;
            used += 1;
            if split {
                if node.side() / 2 < params.min_leaf() {
                    return Err(Error::CorruptCode(format!("cannot split a {}-pixel region", node.side())));
                }
                let kids = split_region(&node, params.min_leaf())?;
                stack.extend(kids.iter().rev());
            } else {
                leaves.push(node);
            }
        }
    }
    Ok((leaves, used))
}
