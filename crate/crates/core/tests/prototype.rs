mod common;

use common::{fixture, unit_vec};
use proptest::prelude::*;
use protohead::feature_io::load_feature_map;
use protohead::prototype::{
    build_bank, build_class_prototype, cluster_instances, instance_prototype, read_instance_list,
    sinkhorn, sinkhorn_traced, uniform_marginal, BuildConfig, ClusterConfig, InstancePrototype,
    PatchMask, PrototypeMode, Region,
};
use protohead::{BBox, FeatureMap};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cosine(a: &[f32], b: &[f32]) -> f32 {
    let dot: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f32>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f32>().sqrt();
    dot / (na * nb)
}

fn noisy_instances(rng: &mut ChaCha8Rng, centers: &[Vec<f32>], per_center: usize, noise: f32) -> Vec<InstancePrototype> {
    let mut out = Vec::new();
    for c in centers {
        for _ in 0..per_center {
            let v: Vec<f32> = c.iter().map(|x| x + rng.gen_range(-noise..noise)).collect();
            let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            out.push(InstancePrototype {
                vector: v.iter().map(|x| x / n).collect(),
                class_id: 0,
            });
        }
    }
    out.shuffle(rng);
    out
}

#[test]
fn sinkhorn_residuals_shrink() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cost: Vec<f32> = (0..64).map(|_| rng.gen()).collect();
    let (n, m) = (8, 8);
    let (plan, trace) = sinkhorn_traced(&cost, &uniform_marginal(n), &uniform_marginal(m), 0.05, 200).unwrap();
    assert!(plan.max_marginal_residual() < 1e-9);
    let r = &trace.row_residuals;
    assert_eq!(r.len(), 200);
    for w in r.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} then {}", w[0], w[1]);
    }
}

#[test]
fn sinkhorn_plan_is_nonnegative_with_uneven_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n, m) = (5, 3);
    let cost: Vec<f32> = (0..n * m).map(|_| rng.gen()).collect();
    let a = [0.1, 0.3, 0.2, 0.25, 0.15];
    let b = [0.5, 0.2, 0.3];
    let plan = sinkhorn(&cost, &a, &b, 0.1, 2000).unwrap();
    assert!(plan.gamma().iter().all(|&g| g >= 0.0));
    for (s, want) in plan.row_sums().iter().zip(a) {
        assert!((s - want as f64).abs() < 1e-6);
    }
    for (s, want) in plan.col_sums().iter().zip(b) {
        assert!((s - want as f64).abs() < 1e-6);
    }
}

#[test]
fn cluster_mode_agrees_with_mean_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let centers = [unit_vec(&mut rng, 16), unit_vec(&mut rng, 16)];
    let insts = noisy_instances(&mut rng, &centers, 15, 0.1);
    let mean = build_class_prototype(&insts, &BuildConfig::normalized(PrototypeMode::Mean)).unwrap();
    let clustered = build_class_prototype(&insts, &BuildConfig::normalized(PrototypeMode::Cluster)).unwrap();
    let cos = cosine(&mean, &clustered);
    assert!(cos >= 0.98, "cosine {cos}");
}

#[test]
fn clustering_is_seed_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let centers = [unit_vec(&mut rng, 8), unit_vec(&mut rng, 8), unit_vec(&mut rng, 8)];
    let insts = noisy_instances(&mut rng, &centers, 6, 0.05);
    let cfg = ClusterConfig {
        centroids: 4,
        steps: 20,
        ..ClusterConfig::default()
    };
    let a = cluster_instances(&insts, &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let b = cluster_instances(&insts, &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.count(), a.dim()), (4, 8));
}

#[test]
fn mask_and_box_regions_agree_on_aligned_boxes() {
    let fm = load_feature_map(fixture("planted_features.phf1")).unwrap();
    let bbox = BBox::from_corners(64.0, 48.0, 160.0, 144.0).unwrap();
    let mut cells = vec![false; 144];
    for r in 3..9 {
        for c in 4..10 {
            cells[r * 12 + c] = true;
        }
    }
    let mask = PatchMask::new(12, 12, cells).unwrap();
    let a = instance_prototype(&fm, &Region::Box(bbox), 0, true).unwrap();
    let b = instance_prototype(&fm, &Region::Mask(mask), 0, true).unwrap();
    assert_eq!(a.vector, b.vector);
    assert_eq!(a.vector[1], 1.0);
}

#[test]
fn bank_from_fixture_instance_list() {
    let path = fixture("planted_instances.jsonl");
    let records = read_instance_list(&path).unwrap();
    let cfg = BuildConfig {
        cluster: ClusterConfig {
            centroids: 2,
            steps: 10,
            ..ClusterConfig::default()
        },
        ..BuildConfig::normalized(PrototypeMode::Mean)
    };
    let bank = build_bank(&records, path.parent().unwrap(), &cfg).unwrap();
    assert_eq!(bank.class_names(), ["mug"]);
    assert_eq!(bank.background_count(), 2);
    let proto = bank.class_prototype(0);
    assert!((proto[1] - 1.0).abs() < 1e-6);
    assert!(proto.iter().enumerate().all(|(k, &v)| k == 1 || v.abs() < 1e-6));
    // The background box sits on pure background patches.
    for k in 0..2 {
        let bg = bank.background_prototype(k);
        assert!((bg[5] - 0.6).abs() < 1e-5 && (bg[7] - 0.8).abs() < 1e-5, "{bg:?}");
    }
}

#[test]
fn instance_outside_map_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let fm = FeatureMap::from_grid(4, 4, 2, vec![1.0; 32], 8).unwrap();
    protohead::feature_io::save_feature_map(&fm, dir.path().join("f.phf1")).unwrap();
    let list = "{\"features\":\"f.phf1\",\"class\":\"a\",\"box\":[0,0,16,16]}\n\
                {\"features\":\"f.phf1\",\"class\":\"a\",\"box\":[100,100,120,120]}\n";
    let records = protohead::prototype::parse_instance_list(list, "inline").unwrap();
    let bank = build_bank(&records, dir.path(), &BuildConfig::normalized(PrototypeMode::Mean)).unwrap();
    assert_eq!(bank.class_count(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mean_prototype_ignores_instance_order(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut insts: Vec<_> = (0..n)
            .map(|_| InstancePrototype { vector: unit_vec(&mut rng, 6), class_id: 0 })
            .collect();
        let cfg = BuildConfig { normalize: false, ..BuildConfig::normalized(PrototypeMode::Mean) };
        let a = build_class_prototype(&insts, &cfg).unwrap();
        insts.shuffle(&mut rng);
        let b = build_class_prototype(&insts, &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn sinkhorn_marginals_hold(seed in any::<u64>(), n in 1usize..9, m in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost: Vec<f32> = (0..n * m).map(|_| rng.gen()).collect();
        // Some non-square costs contract slowly, hence the larger budget.
        let plan = sinkhorn(&cost, &uniform_marginal(n), &uniform_marginal(m), 0.05, 20_000).unwrap();
        prop_assert!(plan.max_marginal_residual() <= 1e-6);
    }
}
