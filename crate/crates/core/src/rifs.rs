//! Recurrent IFS maps on a rectangular grid.
//!
//! Each map `w = (L, F)` sends a domain rectangle onto a smaller region:
//! `L` is a per-axis affine contraction (optionally reflected), and
//!
//! ```text
//! F(x, y, z) = d(L(x, y)) · (z − g(x, y)) + h(L(x, y))
//! ```
//!
//! where `g` and `h` are bilinear patches through the domain and region
//! corner values and `d` is a [`ContractivityField`] vanishing at the region
//! corners. Corners of the domain therefore land exactly on region corner
//! data (the join-up condition).

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::ContractivityField;
use crate::grid::{Domain, Rect, Region};

/// Axis reflections of a planar map; bit 0 flips x, bit 1 flips y.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Orientation(u8);

impl Orientation {
    pub const IDENTITY: Orientation = Orientation(0);

    pub const fn new(flip_x: bool, flip_y: bool) -> Self {
        Self(flip_x as u8 | ((flip_y as u8) << 1))
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits < 4).then_some(Self(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn flip_x(self) -> bool {
        self.0 & 1 != 0
    }

    pub fn flip_y(self) -> bool {
        self.0 & 2 != 0
    }

    pub fn all() -> [Orientation; 4] {
        [Orientation(0), Orientation(1), Orientation(2), Orientation(3)]
    }
}

/// Per-axis affine contraction `L` from a domain rect onto a region rect.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarMap {
    pub source: Rect,
    pub target: Rect,
    pub orientation: Orientation,
    pub a_x: f64,
    pub a_y: f64,
}

impl PlanarMap {
    pub fn new(source: Rect, target: Rect, orientation: Orientation) -> Result<Self> {
        let a_x = f64::from(target.width()) / f64::from(source.width());
        let a_y = f64::from(target.height()) / f64::from(source.height());
        for ratio in [a_x, a_y] {
            if ratio >= 1.0 {
                return Err(Error::NotContractive { ratio });
            }
        }
        Ok(Self { source, target, orientation, a_x, a_y })
    }

    pub fn flip_x(&self) -> bool {
        self.orientation.flip_x()
    }

    pub fn flip_y(&self) -> bool {
        self.orientation.flip_y()
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - f64::from(self.source.x0);
        let dy = y - f64::from(self.source.y0);
        let px = if self.flip_x() {
            f64::from(self.target.x1) - self.a_x * dx
        } else {
            f64::from(self.target.x0) + self.a_x * dx
        };
        let py = if self.flip_y() {
            f64::from(self.target.y1) - self.a_y * dy
        } else {
            f64::from(self.target.y0) + self.a_y * dy
        };
        (px, py)
    }

    /// Integer source pixel that maps onto target pixel `(tx, ty)`. Only
    /// valid when the side ratio is an integer, as it is for codec maps.
    #[inline]
    pub fn preimage_pixel(&self, tx: u32, ty: u32) -> (u32, u32) {
        let sx = self.source.width() / self.target.width();
        let sy = self.source.height() / self.target.height();
        let i = tx - self.target.x0;
        let j = ty - self.target.y0;
        let px = if self.flip_x() { self.source.x1 - sx * i } else { self.source.x0 + sx * i };
        let py = if self.flip_y() { self.source.y1 - sy * j } else { self.source.y0 + sy * j };
        (px, py)
    }
}

pub fn make_planar_map(domain: &Domain, region: &Region, flip_x: bool, flip_y: bool) -> Result<PlanarMap> {
    PlanarMap::new(domain.rect, region.rect, Orientation::new(flip_x, flip_y))
}

/// Bilinear interpolant through four corner values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilinearPatch {
    pub rect: Rect,
    /// Values at [`Rect::corners`] order: (x0,y0), (x1,y0), (x0,y1), (x1,y1).
    pub corner_values: [f64; 4],
}

impl BilinearPatch {
    pub fn new(rect: Rect, corner_values: [f64; 4]) -> Self {
        Self { rect, corner_values }
    }

    pub fn constant(rect: Rect, v: f64) -> Self {
        Self::new(rect, [v; 4])
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if !self.rect.contains_point(x, y) {
            return Err(Error::OutOfRect { x, y });
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub fn eval_unchecked(&self, x: f64, y: f64) -> f64 {
        let u = (x - f64::from(self.rect.x0)) / f64::from(self.rect.width());
        let v = (y - f64::from(self.rect.y0)) / f64::from(self.rect.height());
        let [v00, v10, v01, v11] = self.corner_values;
        let top = v00 + (v10 - v00) * u;
        let bottom = v01 + (v11 - v01) * u;
        top + (bottom - top) * v
    }

    /// Lipschitz constant with respect to `|dx| + |dy|`.
    pub fn lipschitz(&self) -> f64 {
        let [v00, v10, v01, v11] = self.corner_values;
        let sx = f64::max((v10 - v00).abs(), (v11 - v01).abs()) / f64::from(self.rect.width());
        let sy = f64::max((v01 - v00).abs(), (v11 - v10).abs()) / f64::from(self.rect.height());
        sx.max(sy)
    }
}

pub fn eval_bilinear(p: &BilinearPatch, x: f64, y: f64) -> Result<f64> {
    p.eval(x, y)
}

/// One map `w = (L, F)` of the system.
#[derive(Clone, Debug, PartialEq)]
pub struct RifsMap {
    pub planar: PlanarMap,
    pub field: ContractivityField,
    /// Patch on the domain.
    pub g: BilinearPatch,
    /// Patch on the region.
    pub h: BilinearPatch,
}

impl RifsMap {
    pub fn new(planar: PlanarMap, field: ContractivityField, g: BilinearPatch, h: BilinearPatch) -> Result<Self> {
        if g.rect != planar.source || h.rect != planar.target || *field.rect() != planar.target {
            return Err(Error::ShapeMismatch("patch and field rects must match the planar map".into()));
        }
        if field.sup_abs() >= 1.0 {
            return Err(Error::Range(format!("sup |d| = {} is not below 1", field.sup_abs())));
        }
        Ok(Self { planar, field, g, h })
    }

    pub fn domain(&self) -> &Rect {
        &self.planar.source
    }

    pub fn region(&self) -> &Rect {
        &self.planar.target
    }

    pub fn eval(&self, x: f64, y: f64, z: f64) -> Result<(f64, f64, f64)> {
        if !self.planar.source.contains_point(x, y) {
            return Err(Error::OutOfRect { x, y });
        }
        Ok(self.eval_unchecked(x, y, z))
    }

    #[inline]
    pub fn eval_unchecked(&self, x: f64, y: f64, z: f64) -> (f64, f64, f64) {
        let (px, py) = self.planar.apply(x, y);
        let d = self.field.eval_unchecked(px, py);
        let zz = d * (z - self.g.eval_unchecked(x, y)) + self.h.eval_unchecked(px, py);
        (px, py, zz)
    }

    /// Largest `|z'| − h` mismatch when the four domain corners (carrying the
    /// `g` corner values) are pushed through the map.
    pub fn join_up_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for ((x, y), &z) in self.planar.source.corners().iter().zip(&self.g.corner_values) {
            let (px, py, pz) = self.eval_unchecked(f64::from(*x), f64::from(*y), z);
            let target = self.target_corner_value(px, py);
            worst = worst.max((pz - target).abs());
        }
        worst
    }

    fn target_corner_value(&self, px: f64, py: f64) -> f64 {
        let t = self.planar.target;
        let ix = usize::from((px - f64::from(t.x1)).abs() < (px - f64::from(t.x0)).abs());
        let iy = usize::from((py - f64::from(t.y1)).abs() < (py - f64::from(t.y0)).abs());
        self.h.corner_values[iy * 2 + ix]
    }

    /// Sampled Lipschitz estimate of `F` in `(x, y, z)` under the L1 norm:
    /// `sup |d|` plus the largest difference quotient in `(x, y)` between
    /// neighbouring points of a 9×9 probe grid, taken at `z = 0` and
    /// `z = 255`.
    pub fn lipschitz_estimate(&self) -> f64 {
        const PROBES: u32 = 9;
        let src = self.planar.source;
        let step_x = f64::from(src.width()) / f64::from(PROBES - 1);
        let step_y = f64::from(src.height()) / f64::from(PROBES - 1);
        let at = |i: u32, j: u32| (f64::from(src.x0) + step_x * f64::from(i), f64::from(src.y0) + step_y * f64::from(j));
        let mut slope: f64 = 0.0;
        for z in [0.0, 255.0] {
            let f = |i: u32, j: u32| {
                let (x, y) = at(i, j);
                self.eval_unchecked(x, y, z).2
            };
            for j in 0..PROBES {
                for i in 0..PROBES {
                    let here = f(i, j);
                    if i + 1 < PROBES {
                        slope = slope.max((f(i + 1, j) - here).abs() / step_x);
                    }
                    if j + 1 < PROBES {
                        slope = slope.max((f(i, j + 1) - here).abs() / step_y);
                    }
                }
            }
        }
        self.field.sup_abs() + slope
    }
}

pub fn eval_w(map: &RifsMap, x: f64, y: f64, z: f64) -> Result<(f64, f64, f64)> {
    map.eval(x, y, z)
}

pub type Point3 = [f64; 3];

/// `|x − x'| + |y − y'| + θ|z − z'|`.
pub fn rho(p: &Point3, q: &Point3, theta: f64) -> f64 {
    (p[0] - q[0]).abs() + (p[1] - q[1]).abs() + theta * (p[2] - q[2]).abs()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricParams {
    pub theta: f64,
    pub a: f64,
    pub s: f64,
    pub l_f: f64,
}

/// `a = (1 + max ratio) / 2`, `θ = (1 − max ratio) / (2 L_F)`,
/// `s = max(a, L_F)`.
pub fn contractivity_params(planar_ratios: &[f64], l_f: f64) -> MetricParams {
    let max_ratio = planar_ratios.iter().copied().fold(0.0, f64::max);
    let a = (1.0 + max_ratio) / 2.0;
    let theta = (1.0 - max_ratio) / (2.0 * l_f.max(f64::MIN_POSITIVE));
    MetricParams { theta, a, s: a.max(l_f), l_f }
}

/// Metric parameters for a whole system of maps.
pub fn system_params(maps: &[RifsMap]) -> MetricParams {
    let ratios: Vec<f64> = maps.iter().flat_map(|m| [m.planar.a_x, m.planar.a_y]).collect();
    let l_f = maps.iter().map(RifsMap::lipschitz_estimate).fold(0.0, f64::max);
    contractivity_params(&ratios, l_f)
}

/// Largest observed `ρ(w p, w q) / ρ(p, q)` over `trials` random pairs in the
/// domain with `z ∈ [0, 255]`.
pub fn verify_contraction(map: &RifsMap, theta: f64, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = map.planar.source;
    let sample = |rng: &mut ChaCha8Rng| -> Point3 {
        [
            rng.gen_range(f64::from(src.x0)..=f64::from(src.x1)),
            rng.gen_range(f64::from(src.y0)..=f64::from(src.y1)),
            rng.gen_range(0.0..=255.0),
        ]
    };
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let p = sample(&mut rng);
        let q = sample(&mut rng);
        let before = rho(&p, &q, theta);
        if before == 0.0 {
            continue;
        }
        let wp = map.eval_unchecked(p[0], p[1], p[2]);
        let wq = map.eval_unchecked(q[0], q[1], q[2]);
        let after = rho(&[wp.0, wp.1, wp.2], &[wq.0, wq.1, wq.2], theta);
        worst = worst.max(after / before);
    }
    worst
}

pub type Matrix = Vec<Vec<f64>>;

/// `c[k][l] = 1` iff region `l` lies inside the domain of map `k`.
pub fn build_connection_matrix(domains: &[Rect], regions: &[Rect]) -> Vec<Vec<u8>> {
    domains
        .iter()
        .map(|d| regions.iter().map(|r| u8::from(d.contains_rect(r))).collect())
        .collect()
}

/// Connection matrix of a system: rows are maps (by domain), columns are
/// maps (by region).
pub fn connection_matrix(maps: &[RifsMap]) -> Vec<Vec<u8>> {
    let domains: Vec<Rect> = maps.iter().map(|m| *m.domain()).collect();
    let regions: Vec<Rect> = maps.iter().map(|m| *m.region()).collect();
    build_connection_matrix(&domains, &regions)
}

/// Uniform row normalisation of a 0/1 matrix.
pub fn stochastic_uniform(c: &[Vec<u8>]) -> Result<Matrix> {
    c.iter()
        .enumerate()
        .map(|(k, row)| {
            let total: u32 = row.iter().map(|&v| u32::from(v != 0)).sum();
            if total == 0 {
                return Err(Error::EmptyRow(k));
            }
            Ok(row.iter().map(|&v| if v != 0 { 1.0 / f64::from(total) } else { 0.0 }).collect())
        })
        .collect()
}

pub fn transpose<T: Copy>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    let cols = m.first().map_or(0, Vec::len);
    (0..cols).map(|j| m.iter().map(|row| row[j]).collect()).collect()
}

fn reaches_all(adj: &[Vec<usize>], start: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == adj.len()
}

/// Strong connectivity of the graph of positive entries.
pub fn is_irreducible(p: &[Vec<f64>]) -> bool {
    let n = p.len();
    if n == 0 {
        return false;
    }
    let mut fwd = vec![Vec::new(); n];
    let mut rev = vec![Vec::new(); n];
    for (i, row) in p.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > 0.0 {
                fwd[i].push(j);
                rev[j].push(i);
            }
        }
    }
    reaches_all(&fwd, 0) && reaches_all(&rev, 0)
}

/// `succ[k][l] = 1` when the region of map `k` lies inside the domain of map
/// `l`, i.e. `w_l` may be applied to a point just produced by `w_k`.
pub fn successor_matrix(maps: &[RifsMap]) -> Vec<Vec<u8>> {
    transpose(&connection_matrix(maps))
}

/// Indices of the maps that can be applied indefinitely: repeatedly drops
/// maps whose region lies in no remaining map's domain.
pub fn recurrent_core(maps: &[RifsMap]) -> Vec<usize> {
    let succ = successor_matrix(maps);
    let mut alive = vec![true; maps.len()];
    loop {
        let mut changed = false;
        for k in 0..maps.len() {
            if alive[k] && !succ[k].iter().zip(&alive).any(|(&s, &a)| s != 0 && a) {
                alive[k] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..maps.len()).filter(|&k| alive[k]).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapGraph {
    pub c: Vec<Vec<u8>>,
    pub p: Matrix,
}

impl MapGraph {
    pub fn from_maps(maps: &[RifsMap]) -> Result<Self> {
        let c = connection_matrix(maps);
        let p = stochastic_uniform(&c)?;
        Ok(Self { c, p })
    }
}

fn sample_row(row_cdf: &[f64], u: f64) -> usize {
    row_cdf.iter().position(|&c| u < c).unwrap_or(row_cdf.len() - 1)
}

/// Random orbit `q_{i+1} = w_{k_{i+1}}(q_i)` with `k_{i+1}` drawn from row
/// `k_i` of `transitions` (row `k` is a distribution over the maps that may
/// follow `w_k`; see [`successor_matrix`]). The first map is drawn uniformly
/// among those whose domain contains `q0`. Returns `n − burn_in` points.
pub fn chaos_game(
    maps: &[RifsMap],
    transitions: &[Vec<f64>],
    q0: Point3,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Vec<Point3>> {
    if maps.is_empty() {
        return Err(Error::Range("chaos game needs at least one map".into()));
    }
    if transitions.len() != maps.len() || transitions.iter().any(|r| r.len() != maps.len()) {
        return Err(Error::ShapeMismatch("transition matrix must be N x N over the maps".into()));
    }
    let cdf: Vec<Vec<f64>> = transitions
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            let mut acc = 0.0;
            row.iter()
                .map(|&p| {
                    acc += p / total;
                    acc
                })
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<usize> = (0..maps.len()).filter(|&k| maps[k].domain().contains_point(q0[0], q0[1])).collect();
    if starts.is_empty() {
        return Err(Error::OutOfRect { x: q0[0], y: q0[1] });
    }
    let mut state = starts[rng.gen_range(0..starts.len())];
    let mut q = q0;
    let mut out = Vec::with_capacity(n.saturating_sub(burn_in));
    for i in 0..n {
        if i > 0 {
            let next = sample_row(&cdf[state], rng.gen::<f64>());
            if transitions[state][next] <= 0.0 || !maps[next].domain().contains_rect(maps[state].region()) {
                return Err(Error::InvalidTransition { from: state, to: next });
            }
            state = next;
        }
        let (x, y, z) = maps[state].eval_unchecked(q[0], q[1], q[2]);
        q = [x, y, z];
        if i >= burn_in {
            out.push(q);
        }
    }
    Ok(out)
}

/// Orbit sampler that also covers systems that are not irreducible, where a
/// single forward orbit can be absorbed by a closed class of maps.
///
/// Points come in segments of `segment`. Each segment picks its last map
/// uniformly, extends the map sequence backwards by drawing uniformly among
/// the maps whose region lies in the current map's domain, then runs the
/// sequence forward from the centre of the first domain and keeps the points
/// after `burn_in` steps. Every returned point is thus the image of at least
/// `burn_in` compositions. Returns exactly `points` points.
pub fn segmented_orbit(maps: &[RifsMap], points: usize, burn_in: usize, segment: usize, seed: u64) -> Result<Vec<Point3>> {
    if maps.is_empty() || segment == 0 {
        return Err(Error::Range("need at least one map and a positive segment length".into()));
    }
    let pred: Vec<Vec<usize>> = transpose(&successor_matrix(maps))
        .iter()
        .map(|row| (0..row.len()).filter(|&j| row[j] != 0).collect())
        .collect();
    if let Some(k) = pred.iter().position(Vec::is_empty) {
        return Err(Error::EmptyRow(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(points);
    let mut path = Vec::with_capacity(burn_in + segment);
    while out.len() < points {
        path.clear();
        let mut k = rng.gen_range(0..maps.len());
        path.push(k);
        for _ in 1..burn_in + segment {
            k = pred[k][rng.gen_range(0..pred[k].len())];
            path.push(k);
        }
        let (cx, cy) = maps[k].domain().center();
        let mut q = [cx, cy, 128.0];
        for (step, &m) in path.iter().rev().enumerate() {
            let (x, y, z) = maps[m].eval_unchecked(q[0], q[1], q[2]);
            q = [x, y, z];
            if step + 1 >= burn_in.max(1) && out.len() < points {
                out.push(q);
            }
        }
    }
    Ok(out)
}
