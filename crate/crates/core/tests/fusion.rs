use fusecat::classifier::ScoreMatrix;
use fusecat::descriptor::{descriptor_dim, extract_descriptor, l2_normalize, spatial_sum_pool, PoolMode, TapSpec};
use fusecat::fusion::{best_single_tap, early_fuse, late_fuse, layer_fuse, layer_fusion_taps};
use fusecat::nn::{forward, model_catalog, preset, NetBuilder, NetworkSpec, WeightStore};
use fusecat::{Shape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn catalog_net(code: &str) -> NetworkSpec {
    let e = model_catalog().iter().find(|e| e.code == code).unwrap();
    let mut net = preset(e.preset, e.scale).unwrap();
    net.code_name = code.into();
    net
}

fn model_dim(code: &str) -> usize {
    let net = catalog_net(code);
    descriptor_dim(&net, &[best_single_tap(&net).unwrap()]).unwrap()
}

#[test]
fn model_fusion_dimensions() {
    let rows: [(&[&str], usize); 6] = [
        (&["M1", "M2", "M3"], 12288),
        (&["M1", "M2", "M4"], 12288),
        (&["M1", "M2", "M3", "M4"], 16384),
        (&["M1", "M2", "M3", "M4", "M7"], 20480),
        (&["M1", "M2", "M3", "M4", "M5", "M7"], 21504),
        (&["M1", "M2", "M4", "M5", "M7"], 17408),
    ];
    for (codes, dim) in rows {
        let total: usize = codes.iter().map(|c| model_dim(c)).sum();
        assert_eq!(total, dim, "{codes:?}");
    }
    assert_eq!(model_dim("M2"), 4096);
}

/// conv-conv-conv toy with a flat 2-wide top list.
fn toy() -> (NetworkSpec, WeightStore) {
    let mut b = NetBuilder::new("data");
    b.conv("c1", 4, 3, 1, 1)
        .conv("c2", 5, 3, 1, 1)
        .conv("c3", 6, 3, 2, 0)
        .top_taps(&["c1", "c2", "c3"]);
    let net = b.build("toy", Shape::new(2, 9, 9)).unwrap();
    let weights = WeightStore::random(&net, 3).unwrap();
    (net, weights)
}

fn random_image(shape: Shape, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(shape, (0..shape.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn two_layer_fusion_is_block_concatenation() {
    let (net, weights) = toy();
    let x = random_image(net.input_shape, 1);
    let fused = layer_fuse(&net, &weights, &x, 2).unwrap();
    let maps = forward(&net, &weights, &x, &["c1", "c2"]).unwrap();
    let mut want = spatial_sum_pool(maps.get("c1").unwrap());
    want.extend(fusecat::descriptor::spatial_max_pool(maps.get("c2").unwrap()));
    assert_eq!(fused.values, l2_normalize(&want));
    assert_eq!(fused.meta.block_dims, vec![4, 5]);
}

#[test]
fn one_layer_fusion_is_the_lowest_tap() {
    let (net, weights) = toy();
    let x = random_image(net.input_shape, 2);
    let single = extract_descriptor(&net, &weights, &x, &[TapSpec::new("c1", PoolMode::Sum)]).unwrap();
    assert_eq!(layer_fuse(&net, &weights, &x, 1).unwrap(), single);
}

#[test]
fn layer_fusion_grows_by_one_block() {
    for code in ["M1", "M2", "M4", "M5"] {
        let net = catalog_net(code);
        for k in 1..8 {
            let a = layer_fusion_taps(&net, k).unwrap();
            let b = layer_fusion_taps(&net, k + 1).unwrap();
            assert_eq!(&b[..k], a.as_slice(), "{code} k={k}");
        }
    }
    let net = catalog_net("M1");
    let taps = layer_fusion_taps(&net, 8).unwrap();
    assert_eq!(descriptor_dim(&net, &taps).unwrap(), 96 + 256 + 384 + 384 + 256 + 4096 + 4096 + 1000);
}

#[test]
fn early_fusion_of_one_is_identity() {
    let (net, weights) = toy();
    let x = random_image(net.input_shape, 2);
    let d = layer_fuse(&net, &weights, &x, 3).unwrap().with_source("a.png");
    assert_eq!(early_fuse(std::slice::from_ref(&d)).unwrap(), d);
    assert_eq!(early_fuse(&[d.clone(), d.clone()]).unwrap().dim(), 2 * d.dim());
}

fn random_scores(rng: &mut ChaCha8Rng, rows: usize, classes: usize) -> ScoreMatrix {
    ScoreMatrix::new(rows, classes, (0..rows * classes).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
}

#[test]
fn late_fusion_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let models: Vec<ScoreMatrix> = (0..3).map(|_| random_scores(&mut rng, 20, 5)).collect();
    let fused = late_fuse(&models, None).unwrap();
    for i in 0..20 {
        let mut best = (0, f64::NEG_INFINITY);
        for c in 0..5 {
            let mean = models.iter().map(|m| m.row(i)[c]).sum::<f64>() / 3.0;
            assert!((fused.scores.row(i)[c] - mean).abs() < 1e-12);
            if mean > best.1 {
                best = (c, mean);
            }
        }
        assert_eq!(fused.labels[i], best.0);
    }
    let same = late_fuse(&[models[0].clone(), models[0].clone()], None).unwrap();
    assert_eq!(same.labels, models[0].argmax());
}

proptest! {
    #[test]
    fn late_fusion_ignores_member_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let models: Vec<ScoreMatrix> = (0..4).map(|_| random_scores(&mut rng, 10, 6)).collect();
        let mut shuffled = models.clone();
        shuffled.rotate_left(1 + (seed % 3) as usize);
        shuffled.swap(0, 2);
        prop_assert_eq!(late_fuse(&models, None).unwrap().labels, late_fuse(&shuffled, None).unwrap().labels);
    }

    #[test]
    fn late_fusion_ignores_per_sample_shifts(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let models: Vec<ScoreMatrix> = (0..3).map(|_| random_scores(&mut rng, 10, 4)).collect();
        let shifts: Vec<f64> = (0..10).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let moved: Vec<ScoreMatrix> = models
            .iter()
            .map(|m| {
                let data = m.data.iter().enumerate().map(|(j, v)| v + shifts[j / 4]).collect();
                ScoreMatrix::new(10, 4, data).unwrap()
            })
            .collect();
        prop_assert_eq!(late_fuse(&models, None).unwrap().labels, late_fuse(&moved, None).unwrap().labels);
    }
}
