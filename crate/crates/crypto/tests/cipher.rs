use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use qlink_crypto::attack::{crop_attack, dispersion_metric, Rect};
use qlink_crypto::cipher::{confuse, confuse_inverse, decrypt, diffuse, encrypt, key_budget, xor_cipher};
use qlink_crypto::image::synthetic_scene;
use qlink_crypto::qss::{qss_encrypt, qss_reconstruct, single_share_view};
use qlink_crypto::{GrayImage, KeyStream};

fn random_bits(len: usize, seed: u64, label: &str) -> Vec<u8> {
    let mut rng = qlink_core::rng::stream(seed, label);
    (0..len).map(|_| rng.random_range(0..2)).collect()
}

fn random_image(n: usize, seed: u64) -> GrayImage {
    let mut rng = qlink_core::rng::stream(seed, "image");
    GrayImage::new(n, (0..n * n).map(|_| rng.random()).collect()).unwrap()
}

/// Coordinates carried through the map as three byte planes of the index.
fn permutation_of(n: usize, s_c: u32) -> Vec<usize> {
    let planes: Vec<GrayImage> = (0..3)
        .map(|k| GrayImage::new(n, (0..n * n).map(|i| (i >> (8 * k)) as u8).collect()).unwrap())
        .map(|p| confuse(&p, s_c))
        .collect();
    (0..n * n)
        .map(|i| (0..3).fold(0usize, |acc, k| acc | (planes[k].pixels[i] as usize) << (8 * k)))
        .collect()
}

#[test]
fn confusion_is_a_bijection_up_to_512() {
    for (n, s_c) in [(2, 1), (3, 65535), (17, 3), (64, 1000), (255, 12345), (256, 77), (512, 40000)] {
        let mut p = permutation_of(n, s_c);
        p.sort_unstable();
        assert!(p.iter().enumerate().all(|(i, &v)| i == v), "n={n} s_c={s_c}");
    }
}

#[test]
fn roundtrip_on_a_hundred_random_images() {
    let mut rng = qlink_core::rng::stream(99, "sizes");
    for k in 0..100u64 {
        let n = rng.random_range(16..=256);
        let img = random_image(n, k);
        let key = random_bits(key_budget(n) + 5, k, "key");
        let mut ks = KeyStream::new(key.clone());
        let enc = encrypt(&img, &mut ks).unwrap();
        assert_eq!(ks.position(), key_budget(n));
        let mut ks = KeyStream::new(key);
        assert_eq!(decrypt(&enc, &mut ks).unwrap(), img, "n={n}");
        assert_eq!(ks.position(), key_budget(n));
    }
}

#[test]
fn same_key_same_ciphertext() {
    let img = synthetic_scene(64, 3).unwrap();
    let key = random_bits(key_budget(64), 3, "key");
    let a = encrypt(&img, &mut KeyStream::new(key.clone())).unwrap();
    let b = encrypt(&img, &mut KeyStream::new(key)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ciphertext_looks_like_noise() {
    let img = synthetic_scene(128, 5).unwrap();
    let key = random_bits(key_budget(128), 5, "key");
    let enc = encrypt(&img, &mut KeyStream::new(key)).unwrap();
    let differing_bits: u32 = img.pixels.iter().zip(&enc.pixels).map(|(a, b)| (a ^ b).count_ones()).sum();
    assert!(differing_bits as f64 > 0.4 * 128.0 * 128.0 * 8.0);
    assert!(img.adjacent_correlation() > 0.9);
    assert!(enc.adjacent_correlation().abs() < 0.05, "{}", enc.adjacent_correlation());
}

#[test]
fn confusion_keeps_the_histogram_and_diffusion_does_not() {
    let img = synthetic_scene(64, 8).unwrap();
    assert_eq!(confuse(&img, 4321).histogram(), img.histogram());
    let mut ks = KeyStream::new(random_bits(8 * 64 * 64, 8, "key"));
    assert_ne!(diffuse(&img, &mut ks, 17).unwrap().histogram(), img.histogram());
}

#[test]
fn one_pixel_change_propagates_along_the_scan() {
    let img = random_image(16, 1);
    let mut other = img.clone();
    other.pixels[40] ^= 1;
    let key = random_bits(8 * 256, 1, "key");
    let a = diffuse(&img, &mut KeyStream::new(key.clone()), 3).unwrap();
    let b = diffuse(&other, &mut KeyStream::new(key), 3).unwrap();
    assert_eq!(a.pixels[..40], b.pixels[..40]);
    assert!(a.pixels[40..].iter().zip(&b.pixels[40..]).all(|(x, y)| x != y));
}

/// 40×41 block, 10.0% of a 128×128 image.
const CROP: Rect = Rect { x: 44, y: 30, w: 40, h: 41 };

#[test]
fn xor_baseline_keeps_the_crop_in_place() {
    let img = synthetic_scene(128, 2).unwrap();
    let key = random_bits(8 * 128 * 128, 2, "xor");
    let enc = xor_cipher(&img, &mut KeyStream::new(key.clone())).unwrap();
    let dec = xor_cipher(&crop_attack(&enc, CROP, 0).unwrap(), &mut KeyStream::new(key)).unwrap();
    assert_eq!(dispersion_metric(&img, &dec).unwrap(), 1.0);
}

#[test]
fn confusion_diffusion_spreads_the_crop() {
    let img = synthetic_scene(128, 2).unwrap();
    let key = random_bits(key_budget(128), 2, "scda");
    let enc = encrypt(&img, &mut KeyStream::new(key.clone())).unwrap();
    let dec = decrypt(&crop_attack(&enc, CROP, 0).unwrap(), &mut KeyStream::new(key)).unwrap();
    let m = dispersion_metric(&img, &dec).unwrap();
    assert!(m < 0.5, "max window corruption {m}");
    assert_eq!(dispersion_metric(&img, &decrypt(&enc, &mut KeyStream::new(random_bits(key_budget(128), 2, "scda"))).unwrap()).unwrap(), 0.0);
}

#[test]
fn single_share_is_uniform() {
    let len = 100_000;
    let m = vec![1u8; len];
    let k_ab = random_bits(len, 4, "ab");
    let k_ac = random_bits(len, 4, "ac");
    let c = qss_encrypt(&m, &k_ab, &k_ac).unwrap();
    assert_eq!(qss_reconstruct(&c, &k_ab, &k_ac).unwrap(), m);
    let view = single_share_view(&c, &k_ab).unwrap();
    let mut counts = [0f64; 16];
    for nib in view.chunks_exact(4) {
        counts[nib.iter().fold(0usize, |a, &b| a << 1 | b as usize)] += 1.0;
    }
    let expected = (len / 4) as f64 / 16.0;
    let stat: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    assert!(stat < ChiSquared::new(15.0).unwrap().inverse_cdf(0.99), "chi-square {stat}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn confusion_inverts_both_ways(n in 2usize..40, s_c in any::<u16>(), seed in any::<u64>()) {
        let img = random_image(n, seed);
        prop_assert_eq!(confuse_inverse(&confuse(&img, s_c as u32), s_c as u32), img.clone());
        prop_assert_eq!(confuse(&confuse_inverse(&img, s_c as u32), s_c as u32), img);
    }

    #[test]
    fn qss_round_trips(m in prop::collection::vec(0u8..2, 1..200), seed in any::<u64>()) {
        let k_ab = random_bits(m.len(), seed, "ab");
        let k_ac = random_bits(m.len(), seed, "ac");
        let c = qss_encrypt(&m, &k_ab, &k_ac).unwrap();
        prop_assert_eq!(qss_reconstruct(&c, &k_ab, &k_ac).unwrap(), m);
    }
}
