use indexmap::IndexMap;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::engine::infer_shapes;
use super::spec::{LayerKind, NetworkSpec};
use crate::tensor::Shape;
use crate::{Error, Result};

/// Half-width of the uniform distribution used for seeded random weights.
pub const INIT_RANGE: f32 = 0.05;

/// Parameters of one conv or fc layer.
///
/// Conv kernels have shape `[out, in, kh, kw]`, fc matrices `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub shape: Vec<usize>,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl LayerWeights {
    pub fn new(shape: Vec<usize>, weights: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != weights.len() || shape.first() != Some(&bias.len()) {
            return Err(Error::ShapeMismatch(format!(
                "weights {:?} hold {} values and bias {}",
                shape,
                weights.len(),
                bias.len()
            )));
        }
        Ok(LayerWeights {
            shape,
            weights,
            bias,
        })
    }
}

/// Parameters keyed by layer name, in declaration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    entries: IndexMap<String, LayerWeights>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, layer: impl Into<String>, weights: LayerWeights) {
        self.entries.insert(layer.into(), weights);
    }

    pub fn get(&self, layer: &str) -> Option<&LayerWeights> {
        self.entries.get(layer)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LayerWeights)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn parameter_count(&self) -> usize {
        self.entries
            .values()
            .map(|w| w.weights.len() + w.bias.len())
            .sum()
    }

    /// Deterministic weights drawn uniformly from `[-INIT_RANGE, INIT_RANGE]`,
    /// layer by layer in declaration order (kernel first, then bias).
    pub fn random(net: &NetworkSpec, seed: u64) -> Result<Self> {
        let shapes = expected_shapes(net)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-INIT_RANGE, INIT_RANGE);
        let mut store = WeightStore::new();
        for (name, shape) in shapes {
            let n: usize = shape.iter().product();
            let weights: Vec<f32> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            let bias: Vec<f32> = (0..shape[0]).map(|_| dist.sample(&mut rng)).collect();
            store.insert(name, LayerWeights::new(shape, weights, bias)?);
        }
        Ok(store)
    }

    /// Every weight layer has exactly one entry of the right shape, and there
    /// are no entries for layers that do not exist.
    pub fn validate(&self, net: &NetworkSpec) -> Result<()> {
        let expected = expected_shapes(net)?;
        for (name, shape) in &expected {
            let entry = self.get(name).ok_or_else(|| Error::WeightShape {
                layer: name.clone(),
                detail: "no weights stored".into(),
            })?;
            check_entry(name, entry, shape)?;
        }
        if let Some(extra) = self.entries.keys().find(|k| !expected.contains_key(*k)) {
            return Err(Error::WeightShape {
                layer: extra.clone(),
                detail: "weights stored for a layer without parameters".into(),
            });
        }
        Ok(())
    }

    /// Reinterprets fc matrices as conv kernels spanning the fc layer's input
    /// extent, matching [`super::convolutionalize`]. The stored values are
    /// unchanged: a row-major `[out, c·h·w]` matrix is already an
    /// `[out, c, h, w]` kernel bank.
    pub fn convolutionalized(mut self, original: &NetworkSpec) -> Result<Self> {
        let shapes = infer_shapes(original)?;
        for layer in &original.layers {
            if let LayerKind::Fc { out_features, .. } = layer.kind {
                let input: Shape = shapes[layer.inputs[0].as_str()];
                let entry = self.entries.get_mut(&layer.name).ok_or_else(|| Error::WeightShape {
                    layer: layer.name.clone(),
                    detail: "no weights stored".into(),
                })?;
                check_entry(&layer.name, entry, &[out_features, input.len()])?;
                entry.shape = vec![out_features, input.channels, input.height, input.width];
            }
        }
        Ok(self)
    }
}

pub(crate) fn check_entry(layer: &str, entry: &LayerWeights, shape: &[usize]) -> Result<()> {
    if entry.shape != shape {
        return Err(Error::WeightShape {
            layer: layer.to_string(),
            detail: format!("expected {shape:?}, stored {:?}", entry.shape),
        });
    }
    let n: usize = shape.iter().product();
    if entry.weights.len() != n || entry.bias.len() != shape[0] {
        return Err(Error::WeightShape {
            layer: layer.to_string(),
            detail: format!(
                "blob sizes {}/{} do not match {shape:?}",
                entry.weights.len(),
                entry.bias.len()
            ),
        });
    }
    Ok(())
}

/// Kernel shape of one weight layer given its input shape.
pub(crate) fn weight_shape(kind: &LayerKind, input: Shape) -> Option<Vec<usize>> {
    match *kind {
        LayerKind::Conv {
            out_channels,
            kernel_h,
            kernel_w,
            ..
        } => Some(vec![out_channels, input.channels, kernel_h, kernel_w]),
        LayerKind::Fc { out_features, .. } => Some(vec![out_features, input.len()]),
        _ => None,
    }
}

/// Kernel shapes of every weight layer at the network's declared input.
pub(crate) fn expected_shapes(net: &NetworkSpec) -> Result<IndexMap<String, Vec<usize>>> {
    let shapes = infer_shapes(net)?;
    let mut out = IndexMap::new();
    for layer in &net.layers {
        if let Some(input) = layer.inputs.first() {
            if let Some(shape) = weight_shape(&layer.kind, shapes[input.as_str()]) {
                out.insert(layer.name.clone(), shape);
            }
        }
    }
    Ok(out)
}
