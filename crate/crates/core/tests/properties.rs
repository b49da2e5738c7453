use num_bigint::BigUint;
use proptest::prelude::*;

use fedsieve::data::{
    dirichlet_partition, poison_shard, synth_blobs, Fragment, PartitionSpec, TriggerPattern,
};
use fedsieve::defense::{fld_aggregate, krum_scores, Submission};
use fedsieve::model::{init_model, ArchSpec};
use fedsieve::oracle::{cof_oracle, krum_oracle};
use fedsieve::outlier::{cof, mad_flags, PointSet};
use fedsieve::private::{keygen, PaillierKeypair};
use fedsieve::seed;

fn points(
    n: std::ops::RangeInclusive<usize>,
    d: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (n, d)
        .prop_flat_map(|(n, d)| prop::collection::vec(prop::collection::vec(-10.0..10.0f64, d), n))
}

fn keys() -> &'static PaillierKeypair {
    static KP: std::sync::OnceLock<PaillierKeypair> = std::sync::OnceLock::new();
    KP.get_or_init(|| keygen(512, 21).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cof_agrees_with_brute_force(rows in points(3..=9, 1..=4), kf in 0.0..1.0f64) {
        let n = rows.len();
        let k = 2 + ((n - 2) as f64 * kf) as usize;
        let k = k.min(n - 1);
        let lib = cof(&PointSet::new(rows.clone()).unwrap(), k).unwrap();
        let brute = cof_oracle(&rows, k).unwrap();
        for (a, b) in lib.iter().zip(&brute) {
            prop_assert!(a == b || (a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn cof_is_translation_invariant(rows in points(4..=8, 2..=3), shift in -50.0..50.0f64) {
        let k = rows.len() - 1;
        let a = cof(&PointSet::new(rows.clone()).unwrap(), k).unwrap();
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        let b = cof(&PointSet::new(moved).unwrap(), k).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
        }
    }

    #[test]
    fn mad_flags_survive_affine_maps(
        scores in prop::collection::vec(0.0..5.0f64, 3..30),
        scale in 0.25..8.0f64,
        shift in -20.0..20.0f64,
    ) {
        // powers-of-two scaling and shifts on a dyadic grid stay exact
        let scale = scale.log2().round().exp2();
        let shift = (shift * 8.0).round() / 8.0;
        let scores: Vec<f64> = scores.iter().map(|v| (v * 64.0).round() / 64.0).collect();
        let moved: Vec<f64> = scores.iter().map(|v| v * scale + shift).collect();
        prop_assert_eq!(mad_flags(&scores, 3.0), mad_flags(&moved, 3.0));
    }

    #[test]
    fn krum_scores_match_enumeration(rows in points(7..=7, 1..=3), f in 0usize..=2) {
        let lib = krum_scores(&PointSet::new(rows.clone()).unwrap(), f).unwrap();
        let oracle = krum_oracle(&rows, f).unwrap();
        for (a, b) in lib.iter().zip(&oracle.scores) {
            prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn fld_benign_set_ignores_translation(seed in 0u64..1000, shift in -5.0..5.0f64) {
        let arch = ArchSpec::flat(&[3, 2, 2, 1]);
        let subs: Vec<Submission> = (0..7)
            .map(|i| Submission { client_id: i, params: init_model(&arch, seed * 10 + u64::from(i)).unwrap() })
            .collect();
        let moved: Vec<Submission> = subs
            .iter()
            .map(|s| Submission {
                client_id: s.client_id,
                params: s.params.with_flat(&s.params.flatten().iter().map(|v| v + shift).collect::<Vec<_>>()).unwrap(),
            })
            .collect();
        let a = fld_aggregate(&subs, 3.0, None).unwrap();
        let b = fld_aggregate(&moved, 3.0, None).unwrap();
        prop_assert_eq!(a.benign_set, b.benign_set);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn paillier_adds_and_scales(a in any::<u64>(), b in any::<u64>(), k in 0u32..1000, s in any::<u64>()) {
        let kp = keys();
        let pk = &kp.public;
        let mut rng = seed::rng(s, &[]);
        let (a, b, k) = (BigUint::from(a), BigUint::from(b), BigUint::from(k));
        let ca = pk.encrypt(&a, &mut rng);
        let cb = pk.encrypt(&b, &mut rng);
        prop_assert_eq!(kp.decrypt(&pk.add(&ca, &cb)), &a + &b);
        prop_assert_eq!(kp.decrypt(&pk.mul_scalar(&ca, &k)), &a * &k);
    }

    #[test]
    fn dirichlet_partition_is_a_partition(alpha in 0.05..50.0f64, clients in 1usize..12, s in any::<u64>()) {
        let data = synth_blobs(4, 3, 15, 1.0, s).unwrap();
        let shards = dirichlet_partition(&data, &PartitionSpec { dirichlet_alpha: alpha, client_count: clients, seed: s }).unwrap();
        prop_assert_eq!(shards.len(), clients);
        prop_assert!(shards.iter().all(|sh| !sh.is_empty()));
        let mut all: Vec<String> = shards.iter().flat_map(|sh| sh.samples.iter().map(|x| format!("{:?}", x))).collect();
        let mut orig: Vec<String> = data.samples.iter().map(|x| format!("{:?}", x)).collect();
        all.sort();
        orig.sort();
        prop_assert_eq!(all, orig);
    }

    #[test]
    fn poison_count_is_rounded_pdr_share(pdr in 0.0..=1.0f64, per_class in 1usize..20, s in any::<u64>()) {
        let data = synth_blobs(3, 16, per_class, 1.0, s).unwrap();
        let trigger = TriggerPattern { pixel_indices: vec![0, 5], pixel_value: 7.5, target_label: 1, fragment_count: 1 };
        let poisoned = poison_shard(&data, &trigger, pdr, Fragment::All, s).unwrap();
        let stamped = poisoned.samples.iter().filter(|x| x.features[0] == 7.5 && x.features[5] == 7.5).count();
        prop_assert_eq!(stamped, (pdr * data.len() as f64).round() as usize);
        prop_assert_eq!(poisoned.len(), data.len());
    }
}
