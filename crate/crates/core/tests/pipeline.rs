use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rifs_codec::bitstream::{deserialize, serialize};
use rifs_codec::cli::verify_code;
use rifs_codec::decoder::{decode, Initial};
use rifs_codec::encoder::{encode, encode_with_stats, EncoderConfig};
use rifs_codec::field::ContractivityField;
use rifs_codec::image::Image;
use rifs_codec::metrics::compression_ratio;
use rifs_codec::rifs::{rho, segmented_orbit, system_params};

fn noisy(side: u32, seed: u64, noise: f64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(side, side, |x, y| {
        let v = 120.0 + 50.0 * (0.17 * f64::from(x)).sin() + 30.0 * (0.09 * f64::from(y)).cos();
        (v + rng.gen_range(-noise..=noise)).round().clamp(0.0, 255.0)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stream_round_trip(seed in any::<u64>(), cell in prop::sample::select(vec![8u32, 16, 32]), tol in 1.0f64..40.0) {
        let config = EncoderConfig { region_cell: cell, tolerance: tol, ..EncoderConfig::default() };
        let code = encode(&noisy(65, seed, 30.0), &config).unwrap();
        let bytes = serialize(&code).unwrap();
        let back = deserialize(&bytes).unwrap();
        prop_assert_eq!(&back, &code);
        prop_assert_eq!(serialize(&back).unwrap(), bytes);
    }
}

#[test]
fn hostile_noise_respects_depth_floor() {
    let config = EncoderConfig { region_cell: 16, max_split_depth: 2, tolerance: 0.5, ..EncoderConfig::default() };
    let (code, stats) = encode_with_stats(&noisy(65, 1, 120.0), &config).unwrap();
    assert!(stats.leaf_depths.iter().all(|&d| d <= 2));
    assert!(stats.leaf_depths.contains(&2));
    deserialize(&serialize(&code).unwrap()).unwrap();
}

#[test]
fn coarser_field_grid_gives_smaller_streams() {
    let img = noisy(65, 2, 10.0);
    let fine = encode(&img, &EncoderConfig { region_cell: 16, tolerance: 1e9, ..EncoderConfig::default() }).unwrap();
    let coarse =
        encode(&img, &EncoderConfig { region_cell: 16, tolerance: 1e9, delta: 2, ..EncoderConfig::default() }).unwrap();
    assert_eq!(fine.codes.len(), coarse.codes.len());
    assert!(serialize(&coarse).unwrap().len() < serialize(&fine).unwrap().len());
    assert!(compression_ratio(&coarse).unwrap() > compression_ratio(&fine).unwrap());
}

#[test]
fn encoder_output_verifies() {
    for seed in 0..5 {
        let code = encode(&noisy(65, seed, 25.0), &EncoderConfig { region_cell: 16, ..EncoderConfig::default() }).unwrap();
        let report = verify_code(&code, seed);
        assert!(report.passed(), "{report}");
        assert!(report.join_up_max <= 1e-9);
        assert!(report.contraction_max < 1.0);
    }
}

#[test]
fn hand_edited_field_fails_verification() {
    let mut code = encode(&noisy(65, 3, 25.0), &EncoderConfig::default()).unwrap();
    let leaf = &code.codes[0].field;
    let mut ratios = leaf.ratios().to_vec();
    let n = leaf.nx();
    ratios[n + 1] = 0.97;
    code.codes[0].field = ContractivityField::new(*leaf.rect(), 4, 4, ratios).unwrap();
    let report = verify_code(&code, 0);
    assert!(!report.passed());
    assert!(report.failures.iter().any(|f| f.contains("exceeds d_max")), "{report}");
}

#[test]
fn orbit_stays_near_the_decoded_surface() {
    let img = noisy(33, 4, 5.0);
    let config = EncoderConfig { region_cell: 16, domain_stride: Some(16), max_split_depth: 0, ..EncoderConfig::default() };
    let code = encode(&img, &config).unwrap();
    assert_eq!(code.codes.len(), 4);
    let maps = code.maps().unwrap();
    let theta = system_params(&maps).theta;
    let dia = decode(&code, 300, 1e-9, &Initial::default()).unwrap().buffer;
    let orbit = segmented_orbit(&maps, 20_000, 100, 100, 11).unwrap();
    assert_eq!(orbit.len(), 20_000);
    let mut worst: f64 = 0.0;
    for p in orbit {
        let (px, py) = (p[0].round() as u32, p[1].round() as u32);
        let q = [f64::from(px), f64::from(py), dia.get(px, py)];
        worst = worst.max(rho(&p, &q, theta));
    }
    assert!(worst <= 2.0 * 16.0, "{worst}");
}

#[test]
fn encoding_is_deterministic() {
    let img = noisy(129, 5, 20.0);
    let config = EncoderConfig { region_cell: 16, ..EncoderConfig::default() };
    let a = serialize(&encode(&img, &config).unwrap()).unwrap();
    let b = serialize(&encode(&img, &config).unwrap()).unwrap();
    assert_eq!(a, b);
}
