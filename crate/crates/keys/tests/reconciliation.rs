use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use qlink_core::{KeyBlock, KeyStatus};
use qlink_keys::amplify::privacy_amplify;
use qlink_keys::finite_key::binary_entropy;
use qlink_keys::ldpc::{degree_sequence, peg_construct, LdpcCode};
use qlink_keys::reconcile::{BlockStatus, Reconciler, DEGREE_PROFILE, TAG_BITS};

/// Two variables sharing two checks close a 4-cycle.
fn shares_two_checks(code: &LdpcCode) -> bool {
    let sets: Vec<Vec<u32>> = code.var_adj.iter().map(|c| {
        let mut s = c.clone();
        s.sort_unstable();
        s
    }).collect();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let common = sets[i].iter().filter(|c| sets[j].binary_search(c).is_ok()).count();
            if common >= 2 {
                return true;
            }
        }
    }
    false
}

#[test]
fn regular_rate_two_thirds_code_has_no_four_cycles() {
    let code = peg_construct(1024, 338, &vec![3; 1024], 7).unwrap();
    assert!((code.rate() - 0.67).abs() < 0.005);
    assert!(!shares_two_checks(&code));
    assert!(code.girth().unwrap() >= 6);
}

#[test]
fn irregular_code_has_no_four_cycles() {
    let deg = degree_sequence(3000, &DEGREE_PROFILE);
    let code = peg_construct(3000, 990, &deg, 2).unwrap();
    assert!(!shares_two_checks(&code));
    assert!(!code.has_four_cycle());
}

fn noisy_pair(n: usize, p: f64, seed: u64) -> (KeyBlock, KeyBlock) {
    let mut rng = qlink_core::rng::stream(seed, "pair");
    let a: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let b: Vec<u8> = a.iter().map(|&x| x ^ (rng.random::<f64>() < p) as u8).collect();
    (KeyBlock::sifted(a, p), KeyBlock::sifted(b, p))
}

#[test]
fn reconciled_blocks_agree_and_leakage_is_accounted() {
    let r = Reconciler::new(4000, 5);
    let (a, b) = noisy_pair(4 * 4000 + 123, 0.035, 1);
    let out = r.reconcile(&a, &b, 0.05).unwrap();
    assert_eq!(out.bucket, 0);
    assert_eq!(out.blocks.len(), 4);
    assert!(out.blocks.iter().all(|b| b.status == BlockStatus::Verified), "{:?}", out.blocks);
    assert_eq!(out.key_a.bits, out.key_b.bits);
    assert_eq!(out.key_b.status, KeyStatus::Verified);
    let n_c = r.code(0).unwrap().n_c as u64;
    assert_eq!(out.leakage_bits, 4 * n_c);
    assert_eq!(out.tag_bits, 4 * TAG_BITS);
    assert!((out.f_measured - n_c as f64 / (4000.0 * binary_entropy(0.05))).abs() < 1e-12);
    // What is left for amplification never exceeds the undisclosed bits.
    let room = out.key_b.len() as u64 - out.leakage_bits - out.tag_bits;
    assert!(room < out.key_b.len() as u64);
    assert!(privacy_amplify(&out.key_b.bits, room as usize, 3).is_ok());
}

#[test]
fn hopeless_blocks_are_discarded() {
    let r = Reconciler::new(2000, 5);
    let (a, b) = noisy_pair(2000, 0.2, 2);
    let out = r.reconcile(&a, &b, 0.05).unwrap();
    assert_eq!(out.blocks[0].status, BlockStatus::NotConverged);
    assert!(out.key_b.is_empty());
    assert_eq!(out.frame_success(), 0.0);
}

#[test]
fn out_of_range_error_rate_rejected() {
    let r = Reconciler::new(2000, 5);
    let (a, b) = noisy_pair(2000, 0.05, 3);
    assert!(r.reconcile(&a, &b, 0.12).is_err());
}

#[test]
fn amplified_bytes_are_uniform() {
    let samples = 10_000;
    let mut counts = [0u64; 256];
    let mut rng = qlink_core::rng::stream(17, "inputs");
    for k in 0..samples {
        let x: Vec<u8> = (0..256).map(|_| rng.random_range(0..2)).collect();
        let y = privacy_amplify(&x, 8, k).unwrap();
        counts[y.iter().fold(0usize, |acc, &b| acc << 1 | b as usize)] += 1;
    }
    let expected = samples as f64 / 256.0;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(255.0).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi-square {stat} vs {critical}");
}
