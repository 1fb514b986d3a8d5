//! Layer graphs with the geometry of the published architectures, plus a
//! tiny four-weight-layer network for desk-scale experiments.

use std::fmt;
use std::str::FromStr;

use super::engine::{convolutionalize, infer_shapes};
use super::spec::{conv_relu, LayerKind, NetBuilder, NetworkSpec};
use super::weights::WeightStore;
use crate::tensor::Shape;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    AlexNet,
    Vgg16,
    Vgg19,
    GoogleNet,
    /// conv-conv-conv-fc on 32×32 inputs.
    Tiny,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::AlexNet,
        Preset::Vgg16,
        Preset::Vgg19,
        Preset::GoogleNet,
        Preset::Tiny,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::AlexNet => "alexnet",
            Preset::Vgg16 => "vgg16",
            Preset::Vgg19 => "vgg19",
            Preset::GoogleNet => "googlenet",
            Preset::Tiny => "tiny",
        }
    }

    pub fn native_scale(self) -> usize {
        match self {
            Preset::AlexNet => 227,
            Preset::Vgg16 | Preset::Vgg19 | Preset::GoogleNet => 224,
            Preset::Tiny => 32,
        }
    }

    fn build_native(self) -> Result<NetworkSpec> {
        let input = Shape::new(3, self.native_scale(), self.native_scale());
        let code = code_name(self, self.native_scale());
        match self {
            Preset::AlexNet => alexnet().build(&code, input),
            Preset::Vgg16 => vgg(&[2, 2, 3, 3, 3]).build(&code, input),
            Preset::Vgg19 => vgg(&[2, 2, 4, 4, 4]).build(&code, input),
            Preset::GoogleNet => googlenet().build(&code, input),
            Preset::Tiny => tiny().build(&code, input),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// One row of the model naming scheme (architecture, pre-training, scale).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatalogEntry {
    pub code: &'static str,
    pub preset: Preset,
    pub pretraining: &'static str,
    pub scale: usize,
}

const CATALOG: [CatalogEntry; 7] = [
    CatalogEntry { code: "M1", preset: Preset::AlexNet, pretraining: "ImageNet", scale: 227 },
    CatalogEntry { code: "M2", preset: Preset::AlexNet, pretraining: "ImageNet", scale: 451 },
    CatalogEntry { code: "M3", preset: Preset::Vgg16, pretraining: "ImageNet", scale: 224 },
    CatalogEntry { code: "M4", preset: Preset::Vgg19, pretraining: "ImageNet", scale: 224 },
    CatalogEntry { code: "M5", preset: Preset::GoogleNet, pretraining: "ImageNet", scale: 224 },
    CatalogEntry { code: "M6", preset: Preset::AlexNet, pretraining: "MIT Places", scale: 227 },
    CatalogEntry { code: "M7", preset: Preset::Vgg16, pretraining: "ImageNet", scale: 448 },
];

/// The M1–M7 model codes. M1 and M6 share a graph and differ only in weights.
pub fn model_catalog() -> &'static [CatalogEntry] {
    &CATALOG
}

fn code_name(preset: Preset, scale: usize) -> String {
    CATALOG
        .iter()
        .find(|e| e.preset == preset && e.scale == scale)
        .map(|e| e.code.to_string())
        .unwrap_or_else(|| format!("{preset}@{scale}"))
}

/// Builds a preset at `scale`. Scales above the native one return the
/// convolutionalized graph (dense evaluation); smaller scales are rejected.
pub fn preset(which: Preset, scale: usize) -> Result<NetworkSpec> {
    let native = which.native_scale();
    let net = which.build_native()?;
    if scale == native {
        return Ok(net);
    }
    if scale < native {
        return Err(Error::InvalidGeometry(format!(
            "{which} needs at least {native}x{native} input, asked for {scale}"
        )));
    }
    let mut dense = convolutionalize(&net)?.with_input_scale(scale)?;
    dense.code_name = code_name(which, scale);
    infer_shapes(&dense)?;
    Ok(dense)
}

/// Weight seed for a (preset, pre-training) pair. Models that share both
/// (M1 and M2, M3 and M7) share weights; M1 and M6 do not.
fn weight_seed(entry: &CatalogEntry, seed: u64) -> u64 {
    let arch = Preset::ALL.iter().position(|p| *p == entry.preset).unwrap_or(0) as u64;
    let data = if entry.pretraining == "ImageNet" { 0 } else { 1 };
    seed.wrapping_add(arch * 16 + data)
}

/// A preset at `scale` with seeded random weights. Dense graphs reuse the
/// native graph's weights, reshaped into kernels.
pub fn random_model(which: Preset, scale: usize, seed: u64) -> Result<(NetworkSpec, WeightStore)> {
    let native = which.build_native()?;
    let weights = WeightStore::random(&native, seed)?;
    if scale == which.native_scale() {
        return Ok((native, weights));
    }
    let net = preset(which, scale)?;
    let weights = weights.convolutionalized(&native)?;
    Ok((net, weights))
}

/// Instantiates a model reference with random weights. Accepted forms are
/// a catalog code (`M3`), a preset name (`vgg16`) or `preset@scale`
/// (`alexnet@451`).
pub fn resolve_model(reference: &str, seed: u64) -> Result<(NetworkSpec, WeightStore)> {
    if let Some(entry) = CATALOG.iter().find(|e| e.code.eq_ignore_ascii_case(reference)) {
        let (mut net, weights) = random_model(entry.preset, entry.scale, weight_seed(entry, seed))?;
        net.code_name = entry.code.to_string();
        return Ok((net, weights));
    }
    let (name, scale) = match reference.split_once('@') {
        Some((name, scale)) => {
            let scale = scale
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad scale in `{reference}`")))?;
            (name, Some(scale))
        }
        None => (reference, None),
    };
    let which: Preset = name.parse()?;
    random_model(which, scale.unwrap_or(which.native_scale()), seed)
}

fn lrn() -> LayerKind {
    LayerKind::Lrn {
        local_size: 5,
        alpha: 1e-4,
        beta: 0.75,
        k: 1.0,
    }
}

fn classifier_head(b: &mut NetBuilder) {
    b.fc("fc6", 4096, true)
        .push("drop6", LayerKind::Dropout)
        .fc("fc7", 4096, true)
        .push("drop7", LayerKind::Dropout)
        .fc("fc8", 1000, false)
        .push("prob", LayerKind::Softmax);
}

fn alexnet() -> NetBuilder {
    let mut b = NetBuilder::new("data");
    b.conv("conv1", 96, 11, 4, 0)
        .push("norm1", lrn())
        .max_pool("pool1", 3, 2)
        .conv("conv2", 256, 5, 1, 2)
        .push("norm2", lrn())
        .max_pool("pool2", 3, 2)
        .conv("conv3", 384, 3, 1, 1)
        .conv("conv4", 384, 3, 1, 1)
        .conv("conv5", 256, 3, 1, 1)
        .max_pool("pool5", 3, 2);
    classifier_head(&mut b);
    b.top_taps(&["conv1", "conv2", "conv3", "conv4", "conv5", "fc6", "fc7", "fc8"])
        .feature_tap("fc7");
    b
}

/// VGG with the given number of 3×3 convolutions per block.
fn vgg(blocks: &[usize; 5]) -> NetBuilder {
    let widths = [64, 128, 256, 512, 512];
    let mut b = NetBuilder::new("data");
    let mut convs = Vec::new();
    for (block, (&count, &width)) in blocks.iter().zip(&widths).enumerate() {
        for i in 1..=count {
            let name = format!("conv{}-{}", block + 1, i);
            b.conv(&name, width, 3, 1, 1);
            convs.push(name);
        }
        b.max_pool(&format!("pool{}", block + 1), 2, 2);
    }
    classifier_head(&mut b);
    let mut top: Vec<&str> = convs[convs.len() - 5..].iter().map(String::as_str).collect();
    top.extend(["fc6", "fc7", "fc8"]);
    b.top_taps(&top).feature_tap("fc7");
    b
}

/// Widths of one inception module: 1×1, 3×3 reduce, 3×3, 5×5 reduce, 5×5,
/// pool projection.
type Inception = (&'static str, [usize; 6]);

const INCEPTIONS: [Inception; 9] = [
    ("3a", [64, 96, 128, 16, 32, 32]),
    ("3b", [128, 128, 192, 32, 96, 64]),
    ("4a", [192, 96, 208, 16, 48, 64]),
    ("4b", [160, 112, 224, 24, 64, 64]),
    ("4c", [128, 128, 256, 24, 64, 64]),
    ("4d", [112, 144, 288, 32, 64, 64]),
    ("4e", [256, 160, 320, 32, 128, 128]),
    ("5a", [256, 160, 320, 32, 128, 128]),
    ("5b", [384, 192, 384, 48, 128, 128]),
];

fn ceil_pool(window: usize, stride: usize, pad: usize) -> LayerKind {
    LayerKind::MaxPool {
        window,
        stride,
        pad,
        ceil_mode: true,
    }
}

fn inception(b: &mut NetBuilder, (id, w): Inception) {
    let p = format!("inception-{id}");
    let src = b.last().to_string();
    let n = |s: &str| format!("{p}/{s}");
    b.push_from(&n("1x1"), conv_relu(w[0], 1, 1, 0), &[&src])
        .push_from(&n("3x3_reduce"), conv_relu(w[1], 1, 1, 0), &[&src])
        .push(&n("3x3"), conv_relu(w[2], 3, 1, 1))
        .push_from(&n("5x5_reduce"), conv_relu(w[3], 1, 1, 0), &[&src])
        .push(&n("5x5"), conv_relu(w[4], 5, 1, 2))
        .push_from(&n("pool"), ceil_pool(3, 1, 1), &[&src])
        .push(&n("pool_proj"), conv_relu(w[5], 1, 1, 0))
        .push_from(
            &n("output"),
            LayerKind::Concat,
            &[&n("1x1"), &n("3x3"), &n("5x5"), &n("pool_proj")],
        );
}

/// GoogleNet without the auxiliary classifier branches.
fn googlenet() -> NetBuilder {
    let mut b = NetBuilder::new("data");
    b.conv("conv1/7x7_s2", 64, 7, 2, 3)
        .push("pool1/3x3_s2", ceil_pool(3, 2, 0))
        .push("pool1/norm1", lrn())
        .conv("conv2/3x3_reduce", 64, 1, 1, 0)
        .conv("conv2/3x3", 192, 3, 1, 1)
        .push("conv2/norm2", lrn())
        .push("pool2/3x3_s2", ceil_pool(3, 2, 0));
    for module in INCEPTIONS {
        inception(&mut b, module);
        match module.0 {
            "3b" => {
                b.push("pool3/3x3_s2", ceil_pool(3, 2, 0));
            }
            "4e" => {
                b.push("pool4/3x3_s2", ceil_pool(3, 2, 0));
            }
            _ => {}
        }
    }
    b.push(
        "pool5/7x7_s1",
        LayerKind::AvgPool {
            window: 7,
            stride: 1,
            pad: 0,
            ceil_mode: false,
        },
    )
    .push("pool5/drop_7x7_s1", LayerKind::Dropout)
    .fc("loss3/classifier", 1000, false)
    .push("prob", LayerKind::Softmax);
    let top: Vec<String> = INCEPTIONS[1..]
        .iter()
        .map(|(id, _)| format!("inception-{id}/output"))
        .collect();
    let top: Vec<&str> = top.iter().map(String::as_str).collect();
    b.top_taps(&top).feature_tap("inception-5b/output");
    b
}

fn tiny() -> NetBuilder {
    let mut b = NetBuilder::new("data");
    b.conv("conv1", 16, 3, 1, 1)
        .max_pool("pool1", 2, 2)
        .conv("conv2", 32, 3, 1, 1)
        .max_pool("pool2", 2, 2)
        .conv("conv3", 64, 3, 1, 1)
        .max_pool("pool3", 2, 2)
        .fc("fc4", 128, true)
        .top_taps(&["conv1", "conv2", "conv3", "fc4"])
        .feature_tap("fc4");
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weight_layers(net: &NetworkSpec) -> usize {
        net.layers.iter().filter(|l| l.kind.has_weights()).count()
    }

    #[test]
    fn alexnet_has_eight_weight_layers() {
        let net = preset(Preset::AlexNet, 227).unwrap();
        assert_eq!(weight_layers(&net), 8);
        assert_eq!(net.code_name, "M1");
        let shapes = infer_shapes(&net).unwrap();
        assert_eq!(shapes["conv1"], Shape::new(96, 55, 55));
        assert_eq!(shapes["pool1"], Shape::new(96, 27, 27));
        assert_eq!(shapes["conv2"], Shape::new(256, 27, 27));
        assert_eq!(shapes["pool5"], Shape::new(256, 6, 6));
        assert_eq!(shapes["fc7"], Shape::vector(4096));
    }

    #[test]
    fn vgg_depths() {
        assert_eq!(weight_layers(&preset(Preset::Vgg16, 224).unwrap()), 16);
        assert_eq!(weight_layers(&preset(Preset::Vgg19, 224).unwrap()), 19);
    }

    #[test]
    fn googlenet_final_inception() {
        let net = preset(Preset::GoogleNet, 224).unwrap();
        let shapes = infer_shapes(&net).unwrap();
        assert_eq!(shapes["inception-3a/output"], Shape::new(256, 28, 28));
        assert_eq!(shapes["inception-4e/output"], Shape::new(832, 14, 14));
        assert_eq!(shapes["inception-5a/output"], Shape::new(832, 7, 7));
        assert_eq!(shapes["inception-5b/output"], Shape::new(1024, 7, 7));
        assert_eq!(shapes["loss3/classifier"], Shape::vector(1000));
        assert_eq!(net.top_taps.len(), 8);
    }

    #[test]
    fn jittered_scales_are_dense() {
        let net = preset(Preset::AlexNet, 451).unwrap();
        assert!(net.flexible_input);
        assert_eq!(net.code_name, "M2");
        assert_eq!(net.input_shape, Shape::new(3, 451, 451));
        let shapes = infer_shapes(&net).unwrap();
        assert_eq!(shapes["fc6"], Shape::new(4096, 8, 8));

        let vgg = preset(Preset::Vgg16, 448).unwrap();
        assert_eq!(vgg.code_name, "M7");
        assert_eq!(infer_shapes(&vgg).unwrap()["fc8"], Shape::new(1000, 8, 8));
    }

    #[test]
    fn top_taps_are_eight_and_ordered() {
        for p in [Preset::AlexNet, Preset::Vgg16, Preset::Vgg19, Preset::GoogleNet] {
            let net = preset(p, p.native_scale()).unwrap();
            assert_eq!(net.top_taps.len(), 8, "{p}");
            let idx: Vec<usize> = net.top_taps.iter().map(|t| net.index_of(t).unwrap()).collect();
            assert!(idx.windows(2).all(|w| w[0] < w[1]), "{p}");
        }
    }

    #[test]
    fn bad_names_and_scales() {
        assert!(matches!("resnet".parse::<Preset>(), Err(Error::UnknownPreset(_))));
        assert_eq!("VGG16".parse::<Preset>().unwrap(), Preset::Vgg16);
        assert!(preset(Preset::AlexNet, 200).is_err());
    }

    #[test]
    fn model_references() {
        let (m1, w1) = resolve_model("M1", 0).unwrap();
        let (m6, w6) = resolve_model("m6", 0).unwrap();
        assert_eq!((m1.code_name.as_str(), m6.code_name.as_str()), ("M1", "M6"));
        assert_eq!(m1.layers, m6.layers);
        assert_ne!(w1.get("conv1").unwrap().weights, w6.get("conv1").unwrap().weights);
        let (m2, w2) = resolve_model("M2", 0).unwrap();
        assert!(m2.flexible_input);
        assert_eq!(w1.get("fc6").unwrap().weights, w2.get("fc6").unwrap().weights);
        let (tiny, _) = resolve_model("tiny", 3).unwrap();
        assert_eq!(tiny.input_shape.height, 32);
        assert!(resolve_model("alexnet@big", 0).is_err());
        assert!(resolve_model("lenet", 0).is_err());
    }
}
