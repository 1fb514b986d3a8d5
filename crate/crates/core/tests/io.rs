use fusecat::classifier::{train, FeatureMatrix, SvmModel, TrainConfig};
use fusecat::descriptor::{DescriptorMeta, DescriptorSet, PoolMode, RecordInfo, TapSpec};
use fusecat::io::{
    decode_model, encode_model, load_model, preprocess, resize_bilinear, save_model, PreprocessSpec,
    ResizeMode, RgbImage, Split,
};
use fusecat::nn::{random_model, Preset};
use fusecat::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes the model container field by field, without the library encoder.
fn independent_model_bytes(preset: Preset, seed: u64) -> Vec<u8> {
    let (net, weights) = random_model(preset, preset.native_scale(), seed).unwrap();
    let spec = serde_json::to_string(&net).unwrap();
    let mut b = Vec::new();
    b.extend_from_slice(b"FCM\0");
    b.extend_from_slice(&1u32.to_le_bytes());
    b.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    b.extend_from_slice(&(spec.len() as u64).to_le_bytes());
    b.extend_from_slice(spec.as_bytes());
    b.extend_from_slice(&(weights.len() as u32).to_le_bytes());
    for (name, w) in weights.iter() {
        b.extend_from_slice(&(name.len() as u64).to_le_bytes());
        b.extend_from_slice(name.as_bytes());
        b.extend_from_slice(&(w.shape.len() as u32).to_le_bytes());
        for &d in &w.shape {
            b.extend_from_slice(&(d as u64).to_le_bytes());
        }
        b.extend_from_slice(&(w.bias.len() as u64).to_le_bytes());
        for v in w.weights.iter().chain(&w.bias) {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    b.extend_from_slice(&0u64.to_le_bytes());
    b
}

#[test]
fn model_container_matches_independent_writer() {
    let bytes = independent_model_bytes(Preset::Tiny, 4);
    let (net, weights) = decode_model(&bytes).unwrap();
    assert_eq!(encode_model(&net, &weights).unwrap(), bytes);
}

#[test]
fn model_file_roundtrip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("alexnet.fcm");
    let (net, weights) = random_model(Preset::AlexNet, 227, 8).unwrap();
    save_model(&path, &net, &weights).unwrap();
    let (net2, weights2) = load_model(&path).unwrap();
    assert_eq!(net2, net);
    for ((n1, a), (n2, b)) in weights.iter().zip(weights2.iter()) {
        assert_eq!(n1, n2);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.weights), bits(&b.weights));
        assert_eq!(bits(&a.bias), bits(&b.bias));
    }
}

#[test]
fn damaged_model_files_are_typed_errors() {
    let bytes = independent_model_bytes(Preset::Tiny, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..300 {
        let cut = rng.gen_range(0..bytes.len());
        assert!(matches!(decode_model(&bytes[..cut]), Err(Error::CorruptFile(_))));
    }
    let mut flipped = bytes.clone();
    flipped[5] ^= 0xff;
    assert!(matches!(decode_model(&flipped), Err(Error::CorruptFile(_))));
    let mut extra = bytes;
    extra.push(0);
    assert!(matches!(decode_model(&extra), Err(Error::CorruptFile(_))));
}

fn sample_set() -> DescriptorSet {
    let meta = DescriptorMeta {
        model_code: "M1".into(),
        taps: vec![TapSpec::new("conv5", PoolMode::Max)],
        block_dims: vec![4],
        scale: 227,
        members: vec![],
    };
    let mut set = DescriptorSet::new(meta, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..10 {
        let row: Vec<f32> = (0..4).map(|_| rng.gen()).collect();
        let info = RecordInfo {
            id: format!("img{i}.png"),
            label: Some(if i % 2 == 0 { "cat" } else { "dog" }.into()),
            split: Some(if i < 7 { Split::Train } else { Split::Test }),
        };
        set.push(&row, info).unwrap();
    }
    set
}

#[test]
fn descriptor_file_roundtrip_and_truncation() {
    let set = sample_set();
    let bytes = set.encode();
    let back = DescriptorSet::decode(&bytes).unwrap();
    assert_eq!(back, set);
    assert_eq!(back.encode(), bytes);
    for cut in 0..bytes.len() {
        assert!(matches!(DescriptorSet::decode(&bytes[..cut]), Err(Error::CorruptFile(_))));
    }
}

#[test]
fn svm_file_roundtrip_is_bit_exact() {
    let set = sample_set();
    let labels: Vec<String> = set.records.iter().map(|r| r.label.clone().unwrap()).collect();
    let model = train(&FeatureMatrix::from(&set), &labels, &TrainConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.fsv");
    model.save(&path).unwrap();
    let back = SvmModel::load(&path).unwrap();
    assert_eq!(back.encode(), model.encode());
}

/// Bilinear sample at output pixel (ox, oy), computed in f64 from the
/// half-pixel-centre mapping.
fn reference_sample(src: &[f32], sw: usize, sh: usize, dw: usize, dh: usize, ox: usize, oy: usize) -> f64 {
    let map = |o: usize, d: usize, s: usize| ((o as f64 + 0.5) * s as f64 / d as f64 - 0.5).clamp(0.0, (s - 1) as f64);
    let (fx, fy) = (map(ox, dw, sw), map(oy, dh, sh));
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
    let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
    let at = |x: usize, y: usize| src[y * sw + x] as f64;
    (1.0 - ay) * ((1.0 - ax) * at(x0, y0) + ax * at(x1, y0)) + ay * ((1.0 - ax) * at(x0, y1) + ax * at(x1, y1))
}

#[test]
fn resize_matches_reference_resampler() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let (sw, sh) = (rng.gen_range(1..30), rng.gen_range(1..30));
        let (dw, dh) = (rng.gen_range(1..40), rng.gen_range(1..40));
        let src: Vec<f32> = (0..sw * sh).map(|_| rng.gen()).collect();
        let out = resize_bilinear(&src, sw, sh, dw, dh);
        for oy in 0..dh {
            for ox in 0..dw {
                let want = reference_sample(&src, sw, sh, dw, dh, ox, oy);
                assert!((out[oy * dw + ox] as f64 - want).abs() < 1.0 / 255.0);
            }
        }
    }
}

#[test]
fn center_crop_takes_the_middle() {
    // 640×480 with a bright centre column band: after shorter-side resize to
    // 24 the crop is the central 24×24 of a 32×24 image.
    let img = RgbImage::from_fn(640, 480, |x, _| {
        if (240..400).contains(&x) {
            image::Rgb([255, 255, 255])
        } else {
            image::Rgb([0, 0, 0])
        }
    });
    let spec = PreprocessSpec {
        target_scale: 24,
        channel_means: [0.0; 3],
        resize: ResizeMode::ShorterSideCenterCrop,
    };
    let t = preprocess(&img, &spec).unwrap();
    let row = &t.channel(0)[12 * 24..13 * 24];
    assert!(row[12] > 0.99);
    assert!(row[0] < 0.01 && row[23] < 0.01);
}
