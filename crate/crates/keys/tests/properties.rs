use proptest::prelude::*;
use rand::Rng;

use qlink_core::KeyBlock;
use qlink_keys::amplify::{privacy_amplify, toeplitz_multiply};
use qlink_keys::bp::bp_decode_syndrome;
use qlink_keys::keyfile;
use qlink_keys::ldpc::{peg_construct, LdpcCode};

fn bits(len: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn peg_honours_degrees_without_duplicates(
        n_v in 20usize..300,
        rate in 0.3f64..0.8,
        degs in prop::collection::vec(2usize..6, 300),
        seed in any::<u64>(),
    ) {
        let n_c = (((1.0 - rate) * n_v as f64).round() as usize).max(6);
        let deg: Vec<usize> = degs[..n_v].to_vec();
        let code = peg_construct(n_v, n_c, &deg, seed).unwrap();
        for (v, cs) in code.var_adj.iter().enumerate() {
            prop_assert_eq!(cs.len(), deg[v]);
            let mut u = cs.clone();
            u.sort_unstable();
            u.dedup();
            prop_assert_eq!(u.len(), cs.len());
        }
        prop_assert_eq!(LdpcCode::from_edge_list(&code.to_edge_list()).unwrap(), code);
    }

    #[test]
    fn converged_output_matches_the_syndrome(seed in any::<u64>(), flips in 0usize..40) {
        let code = peg_construct(400, 160, &vec![3; 400], 11).unwrap();
        let mut rng = qlink_core::rng::stream(seed, "word");
        let a: Vec<u8> = (0..400).map(|_| rng.random_range(0..2)).collect();
        let mut b = a.clone();
        for _ in 0..flips {
            b[rng.random_range(0..400)] ^= 1;
        }
        let target = code.syndrome(&a);
        let d = bp_decode_syndrome(&code, &b, &target, 0.05, 50).unwrap();
        if d.converged {
            prop_assert_eq!(code.syndrome(&d.bits), target);
        }
    }

    #[test]
    fn toeplitz_hashing_is_linear(x in bits(150), y in bits(150), l in 1usize..150, seed in any::<u64>()) {
        let z: Vec<u8> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
        let hx = privacy_amplify(&x, l, seed).unwrap();
        let hy = privacy_amplify(&y, l, seed).unwrap();
        let hz = privacy_amplify(&z, l, seed).unwrap();
        let sum: Vec<u8> = hx.iter().zip(&hy).map(|(a, b)| a ^ b).collect();
        prop_assert_eq!(hz, sum);
    }

    #[test]
    fn toeplitz_rows_are_shifted_diagonals(x in bits(70), d in bits(70 + 9)) {
        // Unit vectors pick out columns: column j reads diag[9 − i + j].
        let y = toeplitz_multiply(&x, &d, 10);
        let expect: Vec<u8> = (0..10)
            .map(|i| x.iter().enumerate().fold(0, |acc, (j, &b)| acc ^ (b & d[9 - i + j])))
            .collect();
        prop_assert_eq!(y, expect);
    }

    #[test]
    fn key_files_round_trip(b in prop::collection::vec(0u8..2, 0..300)) {
        let key = KeyBlock::sifted(b, 0.0);
        prop_assert_eq!(keyfile::decode(&keyfile::encode(&key)).unwrap(), key);
    }
}
