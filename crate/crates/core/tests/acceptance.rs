//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line with the
//! measured value next to its threshold, then asserts.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rifs_codec::bitstream::{deserialize, serialize};
use rifs_codec::cli::chaos_raster;
use rifs_codec::code::{domain_pool, leaves_from_flags, CodecParams, CompressedImage, RegionCode};
use rifs_codec::decoder::{decode, Initial};
use rifs_codec::encoder::{encode, EncoderConfig};
use rifs_codec::error::Error;
use rifs_codec::field::{build_field, dequantize_ratio, ContractivityField};
use rifs_codec::grid::{GridDataSet, Rect};
use rifs_codec::image::Image;
use rifs_codec::metrics::{psnr, ratio_for};
use rifs_codec::pgm::read_image;
use rifs_codec::rifs::{eval_w, is_irreducible, BilinearPatch, Orientation, PlanarMap, RifsMap};

fn verdict(id: u32, name: &str, pass: bool, detail: String, elapsed: Duration, limit_s: f64) {
    let in_time = elapsed.as_secs_f64() < limit_s;
    let ok = pass && in_time;
    println!(
        "criterion {id} {name}: {} ({detail}; {:.2}s of {limit_s}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!(ok, "criterion {id} failed: {detail}");
}

fn random_field(rng: &mut ChaCha8Rng, rect: Rect, delta: u32, bound: f64) -> ContractivityField {
    let n = delta as usize + 1;
    let mut ratios: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-bound..=bound)).collect();
    for c in [0, n - 1, n * (n - 1), n * n - 1] {
        ratios[c] = 0.0;
    }
    ContractivityField::new(rect, delta, delta, ratios).unwrap()
}

/// Random interior samples, zero on the boundary, so neighbouring maps agree
/// along shared edges and the attractor is continuous.
fn interior_field(rng: &mut ChaCha8Rng, rect: Rect, delta: u32, bound: f64) -> ContractivityField {
    let n = delta as usize + 1;
    let ratios = (0..n * n)
        .map(|i| {
            let (k, l) = (i % n, i / n);
            if k == 0 || l == 0 || k == n - 1 || l == n - 1 {
                0.0
            } else {
                rng.gen_range(-bound..=bound)
            }
        })
        .collect();
    ContractivityField::new(rect, delta, delta, ratios).unwrap()
}

fn quantized_random_field(rng: &mut ChaCha8Rng, rect: Rect, delta: u32, d_max: f64) -> ContractivityField {
    let n = delta as usize + 1;
    let mut ratios: Vec<f64> = (0..n * n).map(|_| dequantize_ratio(rng.gen(), d_max)).collect();
    for c in [0, n - 1, n * (n - 1), n * n - 1] {
        ratios[c] = 0.0;
    }
    ContractivityField::new(rect, delta, delta, ratios).unwrap()
}

#[test]
fn criterion_1_join_up() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let cell = [4u32, 8, 16][rng.gen_range(0..3)];
        let a = rng.gen_range(2u32..=4);
        let (m, n) = (rng.gen_range(a..=a + 4), rng.gen_range(a..=a + 4));
        let region = Rect::square(rng.gen_range(0..m) * cell, rng.gen_range(0..n) * cell, cell);
        let domain = Rect::square(rng.gen_range(0..=m - a) * cell, rng.gen_range(0..=n - a) * cell, a * cell);
        let orientation = Orientation::from_bits(rng.gen_range(0..4)).unwrap();
        let g_vals: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..=255.0));
        let h_vals: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..=255.0));
        let planar = PlanarMap::new(domain, region, orientation).unwrap();
        let delta = [2u32, 4][rng.gen_range(0..2)];
        let field = random_field(&mut rng, region, delta, 0.95);
        let map = RifsMap::new(
            planar,
            field,
            BilinearPatch::new(domain, g_vals),
            BilinearPatch::new(region, h_vals),
        )
        .unwrap();
        // Domain corner (ix, iy) lands on region corner (ix ^ fx, iy ^ fy).
        for iy in 0..2usize {
            for ix in 0..2usize {
                let x = f64::from([domain.x0, domain.x1][ix]);
                let y = f64::from([domain.y0, domain.y1][iy]);
                let (px, py, pz) = eval_w(&map, x, y, g_vals[iy * 2 + ix]).unwrap();
                let tx = ix ^ usize::from(orientation.flip_x());
                let ty = iy ^ usize::from(orientation.flip_y());
                assert_eq!(px, f64::from([region.x0, region.x1][tx]));
                assert_eq!(py, f64::from([region.y0, region.y1][ty]));
                worst = worst.max((pz - h_vals[ty * 2 + tx]).abs());
            }
        }
    }
    verdict(1, "join-up exactness", worst <= 1e-9, format!("max corner error {worst:.3e} <= 1e-9"), start.elapsed(), 5.0);
}

#[test]
fn criterion_2_attractor_interpolation() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let params = CodecParams { region_cell: 8, domain_factor: 4, domain_stride: 8, delta: 4, d_max: 0.95 };
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let coords: Vec<f64> = (0..5).map(|i| f64::from(i * 8)).collect();
        let z: Vec<Vec<f64>> = (0..5).map(|_| (0..5).map(|_| f64::from(rng.gen_range(0u8..=255))).collect()).collect();
        let grid = GridDataSet::new(coords.clone(), coords, z).unwrap();
        let amp = rng.gen_range(5.0..30.0);
        let phase = rng.gen_range(0.0..3.0);
        // Piecewise bilinear through the data plus a ripple vanishing on the lattice.
        let image = Image::from_fn(33, 33, |x, y| {
            let (s, t) = ((x / 8).min(3) as usize, (y / 8).min(3) as usize);
            let u = f64::from(x - 8 * s as u32) / 8.0;
            let v = f64::from(y - 8 * t as u32) / 8.0;
            let base = grid.z(s, t) * (1.0 - u) * (1.0 - v)
                + grid.z(s + 1, t) * u * (1.0 - v)
                + grid.z(s, t + 1) * (1.0 - u) * v
                + grid.z(s + 1, t + 1) * u * v;
            let ripple = amp
                * (std::f64::consts::PI * f64::from(x) / 8.0).sin()
                * (std::f64::consts::PI * f64::from(y) / 8.0 + phase).sin();
            base + ripple
        });
        let pool = domain_pool(33, 33, &params).unwrap();
        assert_eq!(pool.len(), 1);
        let domain = pool[0].rect;
        let mut codes = Vec::new();
        for j in 0..4 {
            for i in 0..4 {
                let region = Rect::square(i * 8, j * 8, 8);
                let field = build_field(&image, &domain, &region, Orientation::IDENTITY, 4, 0.95)
                    .unwrap()
                    .quantized(0.95);
                codes.push(RegionCode { region, domain_id: 0, orientation: Orientation::IDENTITY, field });
            }
        }
        let mut vertices = BTreeMap::new();
        for t in 0..5 {
            for s in 0..5 {
                vertices.insert((t as u32 * 8, s as u32 * 8), grid.z(s, t) as u8);
            }
        }
        let code = CompressedImage { width: 33, height: 33, params, split_flags: vec![false; 16], codes, vertices };
        let out = decode(&code, 16, 0.0, &Initial::default()).unwrap();
        assert_eq!(out.iterations, 16);
        for t in 0..5 {
            for s in 0..5 {
                let got = out.buffer.get(s as u32 * 8, t as u32 * 8);
                worst = worst.max((got - grid.z(s, t)).abs());
            }
        }
    }
    verdict(
        2,
        "attractor interpolation",
        worst <= 0.5,
        format!("max vertex error {worst:.3e} <= 0.5 over 20 grids"),
        start.elapsed(),
        5.0,
    );
}

fn test_image(rng: &mut ChaCha8Rng, side: u32) -> Image {
    let (fx, fy) = (rng.gen_range(0.02..0.3), rng.gen_range(0.02..0.3));
    let (ax, noise) = (rng.gen_range(20.0..80.0), rng.gen_range(0.0..40.0));
    let base = rng.gen_range(60.0..190.0);
    Image::from_fn(side, side, |x, y| {
        let v = base
            + ax * (fx * f64::from(x)).sin() * (fy * f64::from(y)).cos()
            + rng.gen_range(-noise..=noise)
            + if (x / 11 + y / 7) % 3 == 0 { 25.0 } else { 0.0 };
        v.round().clamp(0.0, 255.0)
    })
}

#[test]
fn criterion_3_decode_contraction() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let image = test_image(&mut rng, 65);
        let code = encode(&image, &EncoderConfig::default()).unwrap();
        let out = decode(&code, 40, 0.0, &Initial::Flat(rng.gen_range(0.0..=255.0))).unwrap();
        for w in out.deltas.windows(2) {
            // Below 1e-9 the ratio is dominated by rounding.
            if w[0] > 1e-9 {
                worst = worst.max(w[1] / w[0]);
                pairs += 1;
            }
        }
    }
    verdict(
        3,
        "decode contraction",
        worst <= 0.95,
        format!("max delta ratio {worst:.4} <= 0.95 over {pairs} sweep pairs"),
        start.elapsed(),
        60.0,
    );
}

#[test]
fn criterion_4_field_recovery() {
    let start = Instant::now();
    let domain = Rect::square(0, 0, 64);
    let region = Rect::square(96, 0, 32);
    let d_max = 0.95;
    let mut before: f64 = 0.0;
    let mut after: f64 = 0.0;
    for c in [-0.7, 0.3, 0.7] {
        let h = [40.0, 200.0, 90.0, 130.0];
        let content = |x: f64, y: f64| 120.0 + 50.0 * (0.11 * x + 0.05).sin() * (0.07 * y + 0.4).cos() + 0.004 * x * y;
        let g = |x: f64, y: f64| {
            let (u, v) = (x / 64.0, y / 64.0);
            content(0.0, 0.0) * (1.0 - u) * (1.0 - v)
                + content(64.0, 0.0) * u * (1.0 - v)
                + content(0.0, 64.0) * (1.0 - u) * v
                + content(64.0, 64.0) * u * v
        };
        let image = Image::from_fn(129, 65, |x, y| {
            let (x, y) = (f64::from(x), f64::from(y));
            if x <= 64.0 {
                return content(x, y);
            }
            if x < 96.0 || y > 32.0 {
                return 0.0;
            }
            let (u, v) = ((x - 96.0) / 32.0, y / 32.0);
            let hv = h[0] * (1.0 - u) * (1.0 - v) + h[1] * u * (1.0 - v) + h[2] * (1.0 - u) * v + h[3] * u * v;
            let (sx, sy) = (2.0 * (x - 96.0), 2.0 * y);
            c * (content(sx, sy) - g(sx, sy)) + hv
        });
        let field = build_field(&image, &domain, &region, Orientation::IDENTITY, 4, d_max).unwrap();
        let q = field.quantized(d_max);
        for l in 0..field.ny() {
            for k in 0..field.nx() {
                if field.is_corner(k, l) {
                    continue;
                }
                before = before.max((field.get(k, l) - c).abs());
                after = after.max((q.get(k, l) - c).abs());
            }
        }
    }
    let step = d_max / 255.0;
    verdict(
        4,
        "field recovery",
        before <= 1e-6 && after <= step,
        format!("raw error {before:.3e} <= 1e-6, quantized error {after:.3e} <= {step:.3e}"),
        start.elapsed(),
        1.0,
    );
}

#[test]
fn criterion_5_self_similarity() {
    let start = Instant::now();
    let config = EncoderConfig::default();
    let params = config.params();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut codes = Vec::new();
    for j in 0..2 {
        for i in 0..2 {
            let region = Rect::square(i * 32, j * 32, 32);
            let field = interior_field(&mut rng, region, params.delta, 0.6).quantized(params.d_max);
            let orientation = Orientation::from_bits(rng.gen_range(0..4)).unwrap();
            codes.push(RegionCode { region, domain_id: 0, orientation, field });
        }
    }
    let mut vertices = BTreeMap::new();
    for y in [0, 32, 64] {
        for x in [0, 32, 64] {
            vertices.insert((y, x), rng.gen_range(30u8..=225));
        }
    }
    let known = CompressedImage { width: 65, height: 65, params, split_flags: vec![false; 4], codes, vertices };
    let attractor = decode(&known, 20, 0.0, &Initial::default()).unwrap().to_gray8();
    let image = Image::from_gray8(65, 65, &attractor).unwrap();
    let code = encode(&image, &config).unwrap();
    let out = decode(&code, 16, 0.25, &Initial::default()).unwrap();
    let db = psnr(&attractor, &out.to_gray8()).unwrap();
    verdict(5, "end-to-end self-similarity", db >= 40.0, format!("PSNR {db:.2} dB >= 40"), start.elapsed(), 60.0);
}

#[test]
fn criterion_6_desk_scale() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/camera_129.pgm");
    let original = read_image(&path).unwrap();
    let start = Instant::now();
    let code = encode(&original.to_image(), &EncoderConfig::default()).unwrap();
    let bytes = serialize(&code).unwrap();
    let out = decode(&deserialize(&bytes).unwrap(), 16, 0.25, &Initial::default()).unwrap();
    let elapsed = start.elapsed();
    let cr = ratio_for(129, 129, bytes.len());
    let db = psnr(&original.pixels, &out.to_gray8()).unwrap();
    verdict(
        6,
        "desk-scale performance",
        cr >= 8.0 && db >= 28.0,
        format!("CR {cr:.2}:1 >= 8, PSNR {db:.2} dB >= 28, {} leaves", code.codes.len()),
        elapsed,
        60.0,
    );
}

/// A random valid code on `side × side`: random tree, domains, orientations,
/// quantized fields and vertices.
fn random_code(rng: &mut ChaCha8Rng) -> CompressedImage {
    let side = [33u32, 65][rng.gen_range(0..2)];
    let cell = [8u32, 16][rng.gen_range(0..2)];
    let delta = [2u32, 4][rng.gen_range(0..2)];
    let stride = cell * rng.gen_range(1..=2);
    let d_max = f64::from(rng.gen_range(50u8..=99)) / 100.0;
    let params = CodecParams { region_cell: cell, domain_factor: 2, domain_stride: stride, delta, d_max };
    let min_leaf = params.min_leaf();
    let mut flags = Vec::new();
    fn grow(rng: &mut ChaCha8Rng, side: u32, min_leaf: u32, flags: &mut Vec<bool>) {
        let split = side / 2 >= min_leaf && rng.gen_bool(0.3);
        flags.push(split);
        if split {
            for _ in 0..4 {
                grow(rng, side / 2, min_leaf, flags);
            }
        }
    }
    for _ in 0..((side - 1) / cell).pow(2) {
        grow(rng, cell, min_leaf, &mut flags);
    }
    let leaves = leaves_from_flags(side, side, &params, &flags).unwrap();
    let pool = domain_pool(side, side, &params).unwrap().len();
    let mut vertices = BTreeMap::new();
    let codes = leaves
        .iter()
        .map(|leaf| {
            for (x, y) in leaf.rect.corners() {
                vertices.insert((y, x), rng.gen());
            }
            RegionCode {
                region: leaf.rect,
                domain_id: rng.gen_range(0..pool),
                orientation: Orientation::from_bits(rng.gen_range(0..4)).unwrap(),
                field: quantized_random_field(rng, leaf.rect, delta, d_max),
            }
        })
        .collect();
    CompressedImage { width: side, height: side, params, split_flags: flags, codes, vertices }
}

#[test]
fn criterion_7_bitstream_round_trip() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    let mut bad_prefixes = 0;
    let mut prefixes = 0usize;
    for _ in 0..100 {
        let code = random_code(&mut rng);
        let bytes = serialize(&code).unwrap();
        let back = deserialize(&bytes).unwrap();
        if back != code || serialize(&back).unwrap() != bytes {
            mismatches += 1;
        }
        for len in 0..bytes.len() {
            prefixes += 1;
            if !matches!(deserialize(&bytes[..len]), Err(Error::TruncatedStream { .. })) {
                bad_prefixes += 1;
            }
        }
    }
    verdict(
        7,
        "bitstream round-trip",
        mismatches == 0 && bad_prefixes == 0,
        format!("{mismatches} of 100 codes differ, {bad_prefixes} of {prefixes} prefixes not TruncatedStream"),
        start.elapsed(),
        5.0,
    );
}

#[test]
fn criterion_8_chaos_dia_agreement() {
    let start = Instant::now();
    let image = Image::from_fn(25, 25, |x, y| {
        let (x, y) = (f64::from(x), f64::from(y));
        (128.0 + 60.0 * (0.2 * x).sin() + 40.0 * (0.15 * y + 1.0).cos() + 0.1 * x * y).round()
    });
    let config = EncoderConfig {
        region_cell: 8,
        domain_factor: 2,
        domain_stride: Some(8),
        max_split_depth: 0,
        ..EncoderConfig::default()
    };
    let code = encode(&image, &config).unwrap();
    assert_eq!(code.codes.len(), 9);
    let dia = decode(&code, 200, 1e-9, &Initial::default()).unwrap();
    let (raster, hits) = chaos_raster(&code, 1_000_000, 8).unwrap();
    let dia8 = dia.to_gray8();
    let chaos8 = raster.to_gray8();
    let covered: Vec<usize> = (0..hits.len()).filter(|&i| hits[i] > 0).collect();
    let mad = covered
        .iter()
        .map(|&i| f64::from(dia8[i].abs_diff(chaos8[i])))
        .sum::<f64>()
        / covered.len().max(1) as f64;
    verdict(
        8,
        "chaos game / DIA agreement",
        !covered.is_empty() && mad <= 8.0,
        format!("mean abs difference {mad:.3} <= 8 over {} covered pixels", covered.len()),
        start.elapsed(),
        30.0,
    );
}

/// Reachability by repeated relaxation to a fixed point.
fn closure_oracle(m: &[Vec<f64>]) -> bool {
    let n = m.len();
    if n == 1 {
        return true;
    }
    let mut reach: Vec<Vec<bool>> = m.iter().map(|row| row.iter().map(|&v| v > 0.0).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n).all(|i| (0..n).all(|j| i == j || reach[i][j]))
}

#[test]
fn criterion_9_irreducibility() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut disagreements = 0;
    let mut irreducible = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=12);
        let density = rng.gen_range(0.05..0.6);
        let m: Vec<Vec<f64>> =
            (0..n).map(|_| (0..n).map(|_| f64::from(u8::from(rng.gen_bool(density)))).collect()).collect();
        let want = closure_oracle(&m);
        irreducible += usize::from(want);
        if is_irreducible(&m) != want {
            disagreements += 1;
        }
    }
    verdict(
        9,
        "irreducibility checker",
        disagreements == 0,
        format!("{disagreements} disagreements with the closure oracle ({irreducible} irreducible of 100)"),
        start.elapsed(),
        5.0,
    );
}
