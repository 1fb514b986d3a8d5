use fusecat::classifier::{evaluate, train, FeatureMatrix, TrainConfig};
use fusecat::fusion::layer_fuse;
use fusecat::io::{preprocess, PreprocessSpec};
use fusecat::nn::{preset, Preset, WeightStore};
use fusecat::synthetic::{synth_dataset, CLASS_NAMES};

fn features(k: usize, seed: u64, per_class: usize, data_seed: u64) -> (FeatureMatrix, Vec<String>) {
    let net = preset(Preset::Tiny, 32).unwrap();
    let weights = WeightStore::random(&net, seed).unwrap();
    let prep = PreprocessSpec::new(32);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (img, class) in synth_dataset(per_class, 32, data_seed) {
        let x = preprocess(&img, &prep).unwrap();
        rows.push(layer_fuse(&net, &weights, &x, k).unwrap().values);
        labels.push(CLASS_NAMES[class].to_string());
    }
    (FeatureMatrix::from_rows(&rows).unwrap(), labels)
}

#[test]
fn layer_fused_synthetic_pipeline_generalizes() {
    for k in [1, 2, 3, 4] {
        let (xtr, ytr) = features(k, 11, 100, 0);
        let (xte, yte) = features(k, 11, 50, 1);
        let model = train(&xtr, &ytr, &TrainConfig::default()).unwrap();
        let report = evaluate(&model, &xte, &yte).unwrap();
        println!("k={k} acc={:.2}", report.accuracy);
        assert!(report.accuracy >= 90.0, "k={k}: {}", report.accuracy);
    }
}
