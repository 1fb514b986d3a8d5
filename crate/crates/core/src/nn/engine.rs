use std::time::{Duration, Instant};

use indexmap::IndexMap;

use super::spec::{LayerKind, NetworkSpec};
use super::weights::{check_entry, weight_shape, WeightStore};
use crate::ops::{self, FilterShape, PoolGeometry};
use crate::tensor::{Shape, Tensor};
use crate::{Error, Result};

/// Tensors captured at the requested taps, in request order.
#[derive(Debug, Clone, Default)]
pub struct TapResult {
    tensors: IndexMap<String, Tensor>,
}

impl TapResult {
    pub fn get(&self, tap: &str) -> Option<&Tensor> {
        self.tensors.get(tap)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn into_inner(self) -> IndexMap<String, Tensor> {
        self.tensors
    }
}

/// Wall time spent in one layer during a profiled forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTiming {
    pub layer: String,
    pub elapsed: Duration,
}

/// Output shapes of every layer at the network's declared input shape.
pub fn infer_shapes(net: &NetworkSpec) -> Result<IndexMap<String, Shape>> {
    infer_shapes_for(net, net.input_shape)
}

/// Output shapes of every layer for a given input shape, computed without
/// touching any weights or data.
pub fn infer_shapes_for(net: &NetworkSpec, input: Shape) -> Result<IndexMap<String, Shape>> {
    infer_prefix(net, input, net.layers.len())
}

fn infer_prefix(net: &NetworkSpec, input: Shape, count: usize) -> Result<IndexMap<String, Shape>> {
    let mut shapes: IndexMap<String, Shape> = IndexMap::with_capacity(count);
    for layer in net.layers.iter().take(count) {
        let inputs: Vec<Shape> = layer
            .inputs
            .iter()
            .map(|name| {
                shapes.get(name.as_str()).copied().ok_or_else(|| {
                    Error::InvalidNetwork(format!("layer `{}` consumes unknown `{name}`", layer.name))
                })
            })
            .collect::<Result<_>>()?;
        let shape = output_shape(&layer.kind, input, &inputs).map_err(|e| match e {
            Error::InvalidGeometry(msg) => {
                Error::InvalidGeometry(format!("layer `{}`: {msg}", layer.name))
            }
            Error::ShapeMismatch(msg) => Error::ShapeMismatch(format!("layer `{}`: {msg}", layer.name)),
            other => other,
        })?;
        shapes.insert(layer.name.clone(), shape);
    }
    Ok(shapes)
}

fn output_shape(kind: &LayerKind, net_input: Shape, inputs: &[Shape]) -> Result<Shape> {
    let first = inputs.first().copied().unwrap_or(net_input);
    let geometry = |what: &str| {
        Error::InvalidGeometry(format!("{what} window does not fit input {first}"))
    };
    Ok(match *kind {
        LayerKind::Input => net_input,
        LayerKind::Conv {
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            pad,
            ..
        } => Shape::new(
            out_channels,
            ops::conv_output_dim(first.height, kernel_h, stride, pad).ok_or_else(|| geometry("conv"))?,
            ops::conv_output_dim(first.width, kernel_w, stride, pad).ok_or_else(|| geometry("conv"))?,
        ),
        LayerKind::MaxPool {
            window,
            stride,
            pad,
            ceil_mode,
        }
        | LayerKind::AvgPool {
            window,
            stride,
            pad,
            ceil_mode,
        } => {
            let g = PoolGeometry {
                window,
                stride,
                pad,
                ceil_mode,
            };
            Shape::new(
                first.channels,
                ops::pool_output_dim(first.height, g).ok_or_else(|| geometry("pool"))?,
                ops::pool_output_dim(first.width, g).ok_or_else(|| geometry("pool"))?,
            )
        }
        LayerKind::Fc { out_features, .. } => Shape::vector(out_features),
        LayerKind::Concat => {
            let mut channels = 0;
            for s in inputs {
                if (s.height, s.width) != (first.height, first.width) {
                    return Err(Error::ShapeMismatch(format!(
                        "concat inputs differ spatially: {first} vs {s}"
                    )));
                }
                channels += s.channels;
            }
            Shape::new(channels, first.height, first.width)
        }
        LayerKind::Relu | LayerKind::Lrn { .. } | LayerKind::Softmax | LayerKind::Dropout => first,
    })
}

/// Runs `input` through `net` and returns the tensors produced at `taps`.
///
/// Layers after the deepest tap are never evaluated, and intermediate
/// tensors are released as soon as nothing downstream needs them.
pub fn forward<S: AsRef<str>>(
    net: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor,
    taps: &[S],
) -> Result<TapResult> {
    run(net, weights, input, taps, None)
}

/// [`forward`] that also reports the time spent in each evaluated layer.
pub fn forward_profiled<S: AsRef<str>>(
    net: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor,
    taps: &[S],
) -> Result<(TapResult, Vec<LayerTiming>)> {
    let mut timings = Vec::new();
    let result = run(net, weights, input, taps, Some(&mut timings))?;
    Ok((result, timings))
}

fn run<S: AsRef<str>>(
    net: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor,
    taps: &[S],
    mut timings: Option<&mut Vec<LayerTiming>>,
) -> Result<TapResult> {
    let given = input.shape();
    let accepted = if net.flexible_input {
        given.channels == net.input_shape.channels
            && given.height >= net.native_scale
            && given.width >= net.native_scale
    } else {
        given == net.input_shape
    };
    if !accepted {
        return Err(Error::ShapeMismatch(format!(
            "`{}` expects input {}{}, got {given}",
            net.code_name,
            net.input_shape,
            if net.flexible_input { " or larger" } else { "" }
        )));
    }

    let mut tap_index = Vec::with_capacity(taps.len());
    for tap in taps {
        let tap = tap.as_ref();
        let idx = net
            .index_of(tap)
            .ok_or_else(|| Error::UnknownTap(tap.to_string()))?;
        tap_index.push(idx);
    }
    let Some(&deepest) = tap_index.iter().max() else {
        return Ok(TapResult::default());
    };

    let shapes = infer_prefix(net, given, deepest + 1)?;
    for layer in &net.layers[..=deepest] {
        if let Some(src) = layer.inputs.first() {
            if let Some(expected) = weight_shape(&layer.kind, shapes[src.as_str()]) {
                let entry = weights.get(&layer.name).ok_or_else(|| Error::WeightShape {
                    layer: layer.name.clone(),
                    detail: "no weights stored".into(),
                })?;
                check_entry(&layer.name, entry, &expected)?;
            }
        }
    }

    // Index of the last layer that reads each output; tapped outputs are kept.
    let mut last_use: Vec<usize> = (0..=deepest).collect();
    let mut inputs_of: Vec<Vec<usize>> = Vec::with_capacity(deepest + 1);
    for (i, layer) in net.layers[..=deepest].iter().enumerate() {
        let idx: Vec<usize> = layer
            .inputs
            .iter()
            .map(|n| shapes.get_index_of(n.as_str()).expect("validated by shape inference"))
            .collect();
        for &j in &idx {
            last_use[j] = i;
        }
        inputs_of.push(idx);
    }
    let mut keep = vec![false; deepest + 1];
    for &t in &tap_index {
        keep[t] = true;
    }

    let mut values: Vec<Option<Tensor>> = vec![None; deepest + 1];
    for (i, layer) in net.layers[..=deepest].iter().enumerate() {
        let started = Instant::now();
        let args: Vec<&Tensor> = inputs_of[i]
            .iter()
            .map(|&j| values[j].as_ref().expect("inputs are live until their last use"))
            .collect();
        let out = eval_layer(&layer.kind, &layer.name, weights, input, &args)?;
        debug_assert_eq!(out.shape(), shapes[i]);
        values[i] = Some(out);
        if let Some(t) = timings.as_deref_mut() {
            t.push(LayerTiming {
                layer: layer.name.clone(),
                elapsed: started.elapsed(),
            });
        }
        for &j in &inputs_of[i] {
            if last_use[j] == i && !keep[j] {
                values[j] = None;
            }
        }
    }

    let mut tensors = IndexMap::with_capacity(taps.len());
    for (tap, &idx) in taps.iter().zip(&tap_index) {
        if !tensors.contains_key(tap.as_ref()) {
            let t = values[idx].clone().expect("tapped outputs are kept");
            tensors.insert(tap.as_ref().to_string(), t);
        }
    }
    Ok(TapResult { tensors })
}

fn eval_layer(
    kind: &LayerKind,
    name: &str,
    weights: &WeightStore,
    input: &Tensor,
    args: &[&Tensor],
) -> Result<Tensor> {
    let param = || weights.get(name).expect("weights checked before evaluation");
    Ok(match *kind {
        LayerKind::Input => input.clone(),
        LayerKind::Conv {
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            pad,
            relu,
        } => {
            let w = param();
            let filter = FilterShape {
                out_channels,
                in_channels: args[0].shape().channels,
                kernel_h,
                kernel_w,
            };
            let mut out = ops::conv2d(args[0], &w.weights, filter, &w.bias, stride, pad)?;
            if relu {
                ops::relu_inplace(&mut out);
            }
            out
        }
        LayerKind::Relu => ops::relu(args[0]),
        LayerKind::MaxPool {
            window,
            stride,
            pad,
            ceil_mode,
        } => ops::maxpool2d_with(
            args[0],
            PoolGeometry {
                window,
                stride,
                pad,
                ceil_mode,
            },
        )?,
        LayerKind::AvgPool {
            window,
            stride,
            pad,
            ceil_mode,
        } => ops::avgpool2d(
            args[0],
            PoolGeometry {
                window,
                stride,
                pad,
                ceil_mode,
            },
        )?,
        LayerKind::Lrn {
            local_size,
            alpha,
            beta,
            k,
        } => ops::lrn(args[0], local_size, alpha, beta, k)?,
        LayerKind::Fc { out_features, relu } => {
            let w = param();
            let mut out = ops::fully_connected(args[0], &w.weights, out_features, &w.bias)?;
            if relu {
                ops::relu_inplace(&mut out);
            }
            out
        }
        LayerKind::Softmax => ops::softmax(args[0]),
        LayerKind::Concat => ops::concat_channels(args)?,
        LayerKind::Dropout => args[0].clone(),
    })
}

/// Rewrites every fully connected layer as a convolution whose kernel covers
/// the layer's input extent at the native scale.
///
/// The result computes the same function on native-size inputs and slides
/// the classifier densely over larger ones. Pair it with
/// [`WeightStore::convolutionalized`] to reshape the weights.
pub fn convolutionalize(net: &NetworkSpec) -> Result<NetworkSpec> {
    let first_fc = net
        .layers
        .iter()
        .position(|l| matches!(l.kind, LayerKind::Fc { .. }))
        .ok_or_else(|| Error::Structural(format!("`{}` has no fully connected layer", net.code_name)))?;
    if let Some(bad) = net.layers[first_fc..].iter().find(|l| !l.kind.is_pointwise()) {
        return Err(Error::Structural(format!(
            "fully connected layer `{}` feeds spatial layer `{}`",
            net.layers[first_fc].name, bad.name
        )));
    }
    let shapes = infer_shapes(net)?;
    let mut converted = net.clone();
    for layer in converted.layers.iter_mut() {
        if let LayerKind::Fc { out_features, relu } = layer.kind {
            let input = shapes[layer.inputs[0].as_str()];
            layer.kind = LayerKind::Conv {
                out_channels: out_features,
                kernel_h: input.height,
                kernel_w: input.width,
                stride: 1,
                pad: 0,
                relu,
            };
        }
    }
    converted.flexible_input = true;
    Ok(converted)
}
