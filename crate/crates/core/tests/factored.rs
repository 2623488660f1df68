mod common;

use fmdp_core::factored::{decode_mixed, encode_mixed, product_distribution};
use fmdp_core::format::{load_mdp, save_mdp, FmdpFile};
use fmdp_core::ScopeSet;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn mixed_radix_round_trip(sizes in prop::collection::vec(1usize..5, 1..5), seed in any::<u64>()) {
        let total: usize = sizes.iter().product();
        let flat = (seed as usize) % total;
        let tuple = decode_mixed(flat, &sizes);
        prop_assert!(tuple.iter().zip(&sizes).all(|(v, s)| v < s));
        prop_assert_eq!(encode_mixed(&tuple, &sizes), flat);
    }

    #[test]
    fn scope_keys_round_trip(sizes in prop::collection::vec(1usize..4, 2..6), mask in any::<u32>(), seed in any::<u64>()) {
        let n = sizes.len();
        let mut idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if idx.is_empty() {
            idx.push(0);
        }
        let scope = ScopeSet::new(idx.clone(), n).unwrap();
        let x = decode_mixed(seed as usize % sizes.iter().product::<usize>(), &sizes);
        let key = scope.key(&x, &sizes);
        prop_assert!(key < scope.cardinality(&sizes));
        prop_assert_eq!(scope.decode_key(key, &sizes), scope.project(&x));
    }
}

#[test]
fn scopes_reject_out_of_range_and_sort() {
    assert!(ScopeSet::new(vec![3], 3).is_err());
    assert_eq!(ScopeSet::new(vec![2, 0], 3).unwrap().indices(), &[0, 2]);
}

#[test]
fn flatten_matches_factored_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let m = common::random_fmdp(&mut rng, &[2, 3, 2], &[2], 2);
        let tab = m.flatten().unwrap();
        let spec = m.spec();
        for s in 0..tab.num_states() {
            for a in 0..tab.num_actions() {
                let x = spec.joint(s, a);
                let row = tab.row(s, a);
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert_eq!(row, product_distribution(&m.factor_rows(&x)).as_slice());
                for next in 0..tab.num_states() {
                    let p = m.joint_transition_prob(&x, &spec.state_tuple(next)).unwrap();
                    assert!((p - row[next]).abs() < 1e-12);
                }
                assert!((tab.reward(s, a) - m.mean_reward(&x)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn validation_reports_bad_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let m = common::random_fmdp(&mut rng, &[2, 2], &[2], 1);
    let mut file = FmdpFile::from_mdp(&m);
    let json = serde_json::to_string(&file).unwrap().replacen("0.", "7.", 1);
    file = FmdpFile::parse(&json).unwrap();
    assert!(file.to_mdp().is_err());
}

#[test]
fn files_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let dir = tempfile::tempdir().unwrap();
    for k in 0..5 {
        let m = common::random_fmdp(&mut rng, &[3, 2], &[2, 2], 1);
        let path = dir.path().join(format!("m{k}.json"));
        save_mdp(&m, &path).unwrap();
        let back = load_mdp(&path).unwrap();
        assert_eq!(back.spec(), m.spec());
        assert_eq!(back.flatten().unwrap(), m.flatten().unwrap());
    }
}
