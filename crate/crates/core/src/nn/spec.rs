use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::tensor::Shape;
use crate::{Error, Result};

/// What a layer computes, with its geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    /// The single source of the graph.
    Input,
    /// Convolution. `relu` applies the activation in place, so a tap on the
    /// layer sees rectified values.
    Conv {
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        pad: usize,
        #[serde(default)]
        relu: bool,
    },
    Relu,
    MaxPool {
        window: usize,
        stride: usize,
        #[serde(default)]
        pad: usize,
        #[serde(default)]
        ceil_mode: bool,
    },
    AvgPool {
        window: usize,
        stride: usize,
        #[serde(default)]
        pad: usize,
        #[serde(default)]
        ceil_mode: bool,
    },
    Lrn {
        local_size: usize,
        alpha: f32,
        beta: f32,
        k: f32,
    },
    Fc {
        out_features: usize,
        #[serde(default)]
        relu: bool,
    },
    Softmax,
    Concat,
    /// Identity at inference time.
    Dropout,
}

impl LayerKind {
    pub fn has_weights(&self) -> bool {
        matches!(self, LayerKind::Conv { .. } | LayerKind::Fc { .. })
    }

    /// Layers that act independently at each spatial position (or carry no
    /// spatial structure at all). Only these may follow a fully connected
    /// layer in a network that is to be convolutionalized.
    pub(crate) fn is_pointwise(&self) -> bool {
        matches!(
            self,
            LayerKind::Fc { .. } | LayerKind::Relu | LayerKind::Dropout | LayerKind::Softmax
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
    #[serde(default)]
    pub inputs: Vec<String>,
}

/// An ordered layer graph. Layers are evaluated in declaration order and may
/// only consume earlier layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub code_name: String,
    pub native_scale: usize,
    pub input_shape: Shape,
    /// Set on convolutionalized networks, which accept any input at least as
    /// large as the native scale.
    #[serde(default)]
    pub flexible_input: bool,
    pub layers: Vec<LayerSpec>,
    /// Canonical top-8 tap list used for layer fusion, lowest first.
    #[serde(default)]
    pub top_taps: Vec<String>,
    /// Default single-layer tap for model fusion.
    #[serde(default)]
    pub feature_tap: Option<String>,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidNetwork(msg));
        if self.layers.is_empty() {
            return invalid("network has no layers".into());
        }
        let s = self.input_shape;
        if s.channels == 0 || s.height == 0 || s.width == 0 {
            return invalid(format!("input shape {s} has a zero dimension"));
        }
        let mut seen = HashSet::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let is_input = layer.kind == LayerKind::Input;
            if is_input != (i == 0) {
                return invalid(format!(
                    "the input layer must be the first and only source (layer `{}`)",
                    layer.name
                ));
            }
            for src in &layer.inputs {
                if !seen.contains(src.as_str()) {
                    return invalid(format!(
                        "layer `{}` consumes `{src}`, which is not declared before it",
                        layer.name
                    ));
                }
            }
            let arity_ok = match layer.kind {
                LayerKind::Input => layer.inputs.is_empty(),
                LayerKind::Concat => !layer.inputs.is_empty(),
                _ => layer.inputs.len() == 1,
            };
            if !arity_ok {
                return invalid(format!(
                    "layer `{}` has {} inputs",
                    layer.name,
                    layer.inputs.len()
                ));
            }
            if !seen.insert(layer.name.as_str()) {
                return invalid(format!("duplicate layer name `{}`", layer.name));
            }
        }
        for tap in self.top_taps.iter().chain(&self.feature_tap) {
            if !seen.contains(tap.as_str()) {
                return invalid(format!("preset tap `{tap}` names no layer"));
            }
        }
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn input_name(&self) -> &str {
        &self.layers[0].name
    }

    /// The same graph accepting `scale × scale` inputs. Only convolutionalized
    /// networks can change scale.
    pub fn with_input_scale(mut self, scale: usize) -> Result<Self> {
        if scale == self.input_shape.height && scale == self.input_shape.width {
            return Ok(self);
        }
        if !self.flexible_input {
            return Err(Error::InvalidArgument(format!(
                "`{}` has fixed input {}; convolutionalize it first",
                self.code_name, self.input_shape
            )));
        }
        if scale < self.native_scale {
            return Err(Error::InvalidGeometry(format!(
                "scale {scale} is below the native scale {}",
                self.native_scale
            )));
        }
        self.input_shape = Shape::new(self.input_shape.channels, scale, scale);
        Ok(self)
    }
}

/// Sequential graph builder. Each layer consumes the previous one unless
/// inputs are given explicitly.
#[derive(Debug, Clone)]
pub struct NetBuilder {
    layers: Vec<LayerSpec>,
    top_taps: Vec<String>,
    feature_tap: Option<String>,
}

impl NetBuilder {
    pub fn new(input_name: &str) -> Self {
        NetBuilder {
            layers: vec![LayerSpec {
                name: input_name.to_string(),
                kind: LayerKind::Input,
                inputs: vec![],
            }],
            top_taps: vec![],
            feature_tap: None,
        }
    }

    pub fn last(&self) -> &str {
        &self.layers.last().expect("builder always holds the input").name
    }

    pub fn push(&mut self, name: &str, kind: LayerKind) -> &mut Self {
        let src = self.last().to_string();
        self.push_from(name, kind, &[&src])
    }

    pub fn push_from(&mut self, name: &str, kind: LayerKind, inputs: &[&str]) -> &mut Self {
        self.layers.push(LayerSpec {
            name: name.to_string(),
            kind,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    /// Square convolution followed by an in-place ReLU.
    pub fn conv(&mut self, name: &str, out: usize, kernel: usize, stride: usize, pad: usize) -> &mut Self {
        self.push(name, conv_relu(out, kernel, stride, pad))
    }

    pub fn max_pool(&mut self, name: &str, window: usize, stride: usize) -> &mut Self {
        self.push(
            name,
            LayerKind::MaxPool {
                window,
                stride,
                pad: 0,
                ceil_mode: false,
            },
        )
    }

    pub fn fc(&mut self, name: &str, out: usize, relu: bool) -> &mut Self {
        self.push(
            name,
            LayerKind::Fc {
                out_features: out,
                relu,
            },
        )
    }

    pub fn top_taps(&mut self, taps: &[&str]) -> &mut Self {
        self.top_taps = taps.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn feature_tap(&mut self, tap: &str) -> &mut Self {
        self.feature_tap = Some(tap.to_string());
        self
    }

    pub fn build(&self, code_name: &str, input_shape: Shape) -> Result<NetworkSpec> {
        let net = NetworkSpec {
            code_name: code_name.to_string(),
            native_scale: input_shape.height,
            input_shape,
            flexible_input: false,
            layers: self.layers.clone(),
            top_taps: self.top_taps.clone(),
            feature_tap: self.feature_tap.clone(),
        };
        net.validate()?;
        Ok(net)
    }
}

pub(crate) fn conv_relu(out: usize, kernel: usize, stride: usize, pad: usize) -> LayerKind {
    LayerKind::Conv {
        out_channels: out,
        kernel_h: kernel,
        kernel_w: kernel,
        stride,
        pad,
        relu: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_forward_reference() {
        let mut b = NetBuilder::new("data");
        b.push_from("a", LayerKind::Relu, &["b"]);
        b.push("b", LayerKind::Relu);
        assert!(matches!(
            b.build("x", Shape::new(1, 2, 2)),
            Err(Error::InvalidNetwork(_))
        ));
    }

    #[test]
    fn rejects_duplicate_names() {
        let mut b = NetBuilder::new("data");
        b.push("a", LayerKind::Relu).push("a", LayerKind::Relu);
        assert!(b.build("x", Shape::new(1, 2, 2)).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let mut b = NetBuilder::new("data");
        b.conv("c", 4, 3, 1, 1)
            .push(
                "n",
                LayerKind::Lrn {
                    local_size: 5,
                    alpha: 1e-4,
                    beta: 0.75,
                    k: 1.0,
                },
            )
            .fc("f", 3, false)
            .top_taps(&["c", "f"]);
        let net = b.build("toy", Shape::new(1, 8, 8)).unwrap();
        let text = serde_json::to_string(&net).unwrap();
        let back: NetworkSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn fixed_networks_cannot_rescale() {
        let mut b = NetBuilder::new("data");
        b.push("r", LayerKind::Relu);
        let net = b.build("x", Shape::new(1, 4, 4)).unwrap();
        assert!(net.clone().with_input_scale(4).is_ok());
        assert!(net.with_input_scale(8).is_err());
    }
}
