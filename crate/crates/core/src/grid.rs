//! Rectangular grid model: regions, domains, index maps and the quadtree
//! partition used by the encoder.
//!
//! All geometry is in integer pixel coordinates. A rectangle `[x0, x1] ×
//! [y0, y1]` is closed, so neighbouring regions share their boundary row or
//! column, and a `(2^p + 1)`-pixel image is tiled by `2^p`-wide cells.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Smallest region side the quadtree may produce.
pub const MIN_REGION_CELL: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Rect {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        debug_assert!(x0 < x1 && y0 < y1, "empty rect");
        Self { x0, y0, x1, y1 }
    }

    pub fn square(x0: u32, y0: u32, side: u32) -> Self {
        Self::new(x0, y0, x0 + side, y0 + side)
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    /// Area in pixel units (side × side, not pixel count).
    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.x0 <= other.x0 && other.x1 <= self.x1 && self.y0 <= other.y0 && other.y1 <= self.y1
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= f64::from(self.x0)
            && x <= f64::from(self.x1)
            && y >= f64::from(self.y0)
            && y <= f64::from(self.y1)
    }

    /// Interiors intersect.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    /// Corners in the order (x0,y0), (x1,y0), (x0,y1), (x1,y1).
    pub fn corners(&self) -> [(u32, u32); 4] {
        [(self.x0, self.y0), (self.x1, self.y0), (self.x0, self.y1), (self.x1, self.y1)]
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * f64::from(self.x0 + self.x1),
            0.5 * f64::from(self.y0 + self.y1),
        )
    }
}

/// Data points `(x_i, y_j, z_ij)` on a rectangular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDataSet {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// `z[i][j]` at `(xs[i], ys[j])`.
    z: Vec<Vec<f64>>,
}

impl GridDataSet {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, z: Vec<Vec<f64>>) -> Result<Self> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if xs.len() < 2 || ys.len() < 2 || !increasing(&xs) || !increasing(&ys) {
            return Err(Error::Range("grid coordinates must be strictly increasing".into()));
        }
        if z.len() != xs.len() || z.iter().any(|col| col.len() != ys.len()) {
            return Err(Error::ShapeMismatch(format!(
                "z must be {}x{}",
                xs.len(),
                ys.len()
            )));
        }
        if z.iter().flatten().any(|v| !v.is_finite() || !(0.0..=255.0).contains(v)) {
            return Err(Error::Range("z values must be finite and within [0, 255]".into()));
        }
        Ok(Self { xs, ys, z })
    }

    /// Samples `image` on the lattice of multiples of `cell`.
    pub fn from_image(image: &crate::Image, cell: u32) -> Result<Self> {
        check_divisible(image.width(), image.height(), cell)?;
        let xs: Vec<f64> = (0..image.width()).step_by(cell as usize).map(f64::from).collect();
        let ys: Vec<f64> = (0..image.height()).step_by(cell as usize).map(f64::from).collect();
        let z = xs
            .iter()
            .map(|&x| ys.iter().map(|&y| image.get(x as u32, y as u32).clamp(0.0, 255.0)).collect())
            .collect();
        Self::new(xs, ys, z)
    }

    /// Number of intervals along x (`m`).
    pub fn m(&self) -> usize {
        self.xs.len() - 1
    }

    /// Number of intervals along y (`n`).
    pub fn n(&self) -> usize {
        self.ys.len() - 1
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Value at grid index pair `(s, t)`, i.e. `z_{σ(x_s, y_t)}`.
    pub fn z(&self, s: usize, t: usize) -> f64 {
        self.z[s][t]
    }
}

/// A region `E_ij`: a leaf of the partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    /// 1-based column index at this region's resolution.
    pub ix: u32,
    /// 1-based row index at this region's resolution.
    pub iy: u32,
    /// Quadtree depth below the top-level grid.
    pub depth: u32,
    pub rect: Rect,
}

impl Region {
    pub fn from_rect(rect: Rect, depth: u32) -> Self {
        let side = rect.width();
        Self { ix: rect.x1 / side, iy: rect.y1 / side, depth, rect }
    }

    pub fn side(&self) -> u32 {
        self.rect.width()
    }
}

/// A domain `Ẽ_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Domain {
    pub id: usize,
    pub rect: Rect,
    /// Top-level grid index pairs `(γ_x, γ_y)` of the four corners, in
    /// [`Rect::corners`] order.
    pub corner_grid_indices: [(u32, u32); 4],
}

impl Domain {
    /// `cell` is the top-level grid spacing; every corner must lie on it.
    pub fn new(id: usize, rect: Rect, cell: u32) -> Result<Self> {
        let mut corner_grid_indices = [(0, 0); 4];
        for (slot, (x, y)) in corner_grid_indices.iter_mut().zip(rect.corners()) {
            if x % cell != 0 || y % cell != 0 {
                return Err(Error::Range(format!(
                    "domain corner ({x}, {y}) is not on the {cell}-pixel grid"
                )));
            }
            *slot = (x / cell, y / cell);
        }
        Ok(Self { id, rect, corner_grid_indices })
    }
}

/// Quadtree leaves tiling the image, plus the live vertex set.
#[derive(Clone, Debug)]
pub struct Partition {
    width: u32,
    height: u32,
    cell: u32,
    regions: Vec<Region>,
    /// Live grid vertices keyed `(y, x)` so iteration is row-major.
    vertices: BTreeSet<(u32, u32)>,
}

impl Partition {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cell(&self) -> u32 {
        self.cell
    }

    /// Leaves in enumeration order; leaf `k` (0-based) is map `k + 1`.
    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn vertices(&self) -> &BTreeSet<(u32, u32)> {
        &self.vertices
    }

    /// Top-level grid dimensions `(m, n)`.
    pub fn grid_dims(&self) -> (u32, u32) {
        ((self.width - 1) / self.cell, (self.height - 1) / self.cell)
    }

    /// Replaces leaf `index` by its four quadrants, keeping pre-order.
    pub fn split(&mut self, index: usize) -> Result<[Region; 4]> {
        let region = *self
            .regions
            .get(index)
            .ok_or_else(|| Error::Range(format!("no region {index}")))?;
        let children = split_region(&region, MIN_REGION_CELL)?;
        for child in &children {
            for (x, y) in child.rect.corners() {
                self.vertices.insert((y, x));
            }
        }
        self.regions.splice(index..=index, children);
        Ok(children)
    }

    /// Row-major vertex list over the whole partition.
    pub fn vertex_list(&self) -> Vec<(u32, u32)> {
        self.vertices.iter().map(|&(y, x)| (x, y)).collect()
    }
}

fn check_divisible(width: u32, height: u32, cell: u32) -> Result<()> {
    if cell < 2 {
        return Err(Error::Range(format!("cell must be at least 2, got {cell}")));
    }
    if width < 2 || !(width - 1).is_multiple_of(cell) {
        return Err(Error::Divisibility { axis: "width - 1", extent: width.saturating_sub(1), cell });
    }
    if height < 2 || !(height - 1).is_multiple_of(cell) {
        return Err(Error::Divisibility {
            axis: "height - 1",
            extent: height.saturating_sub(1),
            cell,
        });
    }
    Ok(())
}

/// Uniform `cell × cell` tiling of a `width × height` image, enumerated by
/// [`tau`].
pub fn build_partition(width: u32, height: u32, cell: u32) -> Result<Partition> {
    check_divisible(width, height, cell)?;
    let m = (width - 1) / cell;
    let n = (height - 1) / cell;
    let mut regions = Vec::with_capacity((m * n) as usize);
    for j in 1..=n {
        for i in 1..=m {
            let rect = Rect::square((i - 1) * cell, (j - 1) * cell, cell);
            regions.push(Region { ix: i, iy: j, depth: 0, rect });
        }
    }
    let vertices = (0..=n)
        .flat_map(|t| (0..=m).map(move |s| (t * cell, s * cell)))
        .collect();
    Ok(Partition { width, height, cell, regions, vertices })
}

/// Row-major enumeration `τ(i, j) = (j − 1)·m + i` of 1-based index pairs.
pub fn tau(i: u32, j: u32, m: u32, n: u32) -> Result<u32> {
    if i == 0 || i > m || j == 0 || j > n {
        return Err(Error::Range(format!("({i}, {j}) outside 1..={m} x 1..={n}")));
    }
    Ok((j - 1) * m + i)
}

pub fn tau_inv(k: u32, m: u32, n: u32) -> Result<(u32, u32)> {
    if k == 0 || m == 0 || k > m * n {
        return Err(Error::Range(format!("{k} outside 1..={}", m * n)));
    }
    Ok(((k - 1) % m + 1, (k - 1) / m + 1))
}

/// Four equal quadrants in pre-order (top-left, top-right, bottom-left,
/// bottom-right).
pub fn split_region(region: &Region, min_cell: u32) -> Result<[Region; 4]> {
    let side = region.side();
    if !side.is_multiple_of(2) || side / 2 < min_cell || region.rect.height() != side {
        return Err(Error::MinSize { side, min: min_cell });
    }
    let half = side / 2;
    let Rect { x0, y0, .. } = region.rect;
    let depth = region.depth + 1;
    Ok([
        Region::from_rect(Rect::square(x0, y0, half), depth),
        Region::from_rect(Rect::square(x0 + half, y0, half), depth),
        Region::from_rect(Rect::square(x0, y0 + half, half), depth),
        Region::from_rect(Rect::square(x0 + half, y0 + half, half), depth),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_counts() {
        assert_eq!(build_partition(513, 513, 64).unwrap().regions().len(), 64);
        assert_eq!(build_partition(5, 5, 2).unwrap().regions().len(), 4);
        assert!(matches!(build_partition(6, 6, 4), Err(Error::Divisibility { .. })));
        assert!(matches!(build_partition(5, 5, 1), Err(Error::Range(_))));
    }

    #[test]
    fn partition_is_row_major() {
        let p = build_partition(17, 9, 4).unwrap();
        let (m, n) = p.grid_dims();
        assert_eq!((m, n), (4, 2));
        for (k, r) in p.regions().iter().enumerate() {
            assert_eq!(tau(r.ix, r.iy, m, n).unwrap() as usize, k + 1);
        }
        assert_eq!(p.vertices().len(), 5 * 3);
    }

    #[test]
    fn tau_examples() {
        assert_eq!(tau(1, 1, 4, 4).unwrap(), 1);
        assert_eq!(tau(3, 2, 4, 4).unwrap(), 7);
        assert_eq!(tau_inv(7, 4, 4).unwrap(), (3, 2));
        assert!(tau(5, 1, 4, 4).is_err());
        assert!(tau(0, 1, 4, 4).is_err());
        assert!(tau_inv(17, 4, 4).is_err());
    }

    #[test]
    fn tau_round_trip() {
        let (m, n) = (7, 5);
        for j in 1..=n {
            for i in 1..=m {
                assert_eq!(tau_inv(tau(i, j, m, n).unwrap(), m, n).unwrap(), (i, j));
            }
        }
    }

    #[test]
    fn split_examples() {
        let r = Region::from_rect(Rect::square(0, 0, 32), 0);
        let kids = split_region(&r, MIN_REGION_CELL).unwrap();
        assert!(kids.iter().all(|k| k.side() == 16 && k.depth == 1));
        assert_eq!(kids[3].rect, Rect::new(16, 16, 32, 32));
        let area: u64 = kids.iter().map(|k| k.rect.area()).sum();
        assert_eq!(area, r.rect.area());

        let small = Region::from_rect(Rect::square(0, 0, 4), 0);
        assert!(matches!(split_region(&small, 4), Err(Error::MinSize { .. })));
    }

    #[test]
    fn split_registers_midpoints() {
        let mut p = build_partition(17, 17, 8).unwrap();
        let before = p.vertices().len();
        p.split(0).unwrap();
        assert_eq!(p.regions().len(), 7);
        // (4,0), (0,4), (4,4), (8,4), (4,8)
        assert_eq!(p.vertices().len(), before + 5);
        assert!(p.vertices().contains(&(4, 4)));
    }

    #[test]
    fn domain_corners_index_grid() {
        let img = crate::Image::from_fn(17, 17, |x, y| f64::from(x + y));
        let grid = GridDataSet::from_image(&img, 4).unwrap();
        let d = Domain::new(0, Rect::square(4, 8, 8), 4).unwrap();
        for ((s, t), (x, y)) in d.corner_grid_indices.iter().zip(d.rect.corners()) {
            assert_eq!(grid.z(*s as usize, *t as usize), f64::from(x + y));
        }
        assert!(Domain::new(0, Rect::square(2, 0, 8), 4).is_err());
    }

    #[test]
    fn grid_dataset_validation() {
        assert!(GridDataSet::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![vec![0.0; 2]; 2]).is_ok());
        assert!(GridDataSet::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![vec![0.0; 2]; 2]).is_err());
        assert!(GridDataSet::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![vec![0.0; 3]; 2]).is_err());
        assert!(
            GridDataSet::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![vec![300.0; 2]; 2]).is_err()
        );
    }

    mod props {
        use proptest::prelude::*;

        use super::super::*;

        proptest! {
            #[test]
            fn splits_preserve_tiling(picks in proptest::collection::vec(0usize..64, 0..12)) {
                let mut p = build_partition(65, 33, 16).unwrap();
                for pick in picks {
                    let idx = pick % p.regions().len();
                    let _ = p.split(idx);
                }
                let total: u64 = p.regions().iter().map(|r| r.rect.area()).sum();
                prop_assert_eq!(total, 64 * 32);
                let rs = p.regions();
                for a in 0..rs.len() {
                    for b in a + 1..rs.len() {
                        prop_assert!(!rs[a].rect.overlaps(&rs[b].rect));
                    }
                }
                for r in rs {
                    for (x, y) in r.rect.corners() {
                        prop_assert!(p.vertices().contains(&(y, x)));
                    }
                }
            }
        }
    }
}
