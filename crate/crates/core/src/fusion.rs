//! Layer, early and late fusion of descriptors and classifier scores.
//!
//! Layer fusion concatenates pooled taps of one network, ground-up from its
//! canonical top-tap list. Early fusion concatenates descriptors of the same
//! image from several models. Late fusion averages per-model decision
//! scores. Fusing models that share an architecture but not weights (e.g.
//! ImageNet and Places AlexNets) is early or late fusion with two weight
//! stores; it needs no separate path.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{argmax, ScoreMatrix};
use crate::descriptor::{
    depth_policy, extract_descriptor, Descriptor, DescriptorMeta, DescriptorSet, PoolMode, TapSpec,
};
use crate::nn::{infer_shapes, NetworkSpec, WeightStore};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Most taps layer fusion will merge.
pub const MAX_FUSED_LAYERS: usize = 8;

/// The `k` lowest taps of the network's top-tap list, pooled by the depth
/// policy of the full list so that `k + 1` only appends a block to `k`.
pub fn layer_fusion_taps(net: &NetworkSpec, k: usize) -> Result<Vec<TapSpec>> {
    let top = &net.top_taps;
    if top.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} declares no taps for layer fusion",
            net.code_name
        )));
    }
    let limit = top.len().min(MAX_FUSED_LAYERS);
    if k == 0 || k > limit {
        return Err(Error::InvalidArgument(format!(
            "layer count must be in 1..={limit} for {}, got {k}",
            net.code_name
        )));
    }
    let shapes = infer_shapes(net)?;
    let mut taps = depth_policy(&top[top.len() - limit..]);
    taps.truncate(k);
    // Fully connected outputs have no spatial extent; keep them whole.
    for tap in &mut taps {
        let shape = shapes
            .get(tap.layer.as_str())
            .ok_or_else(|| Error::UnknownTap(tap.layer.clone()))?;
        if shape.plane() == 1 {
            tap.pool = PoolMode::Flatten;
        }
    }
    Ok(taps)
}

/// Descriptor of the `k` lowest top taps for one image.
pub fn layer_fuse(net: &NetworkSpec, weights: &WeightStore, image: &Tensor, k: usize) -> Result<Descriptor> {
    let taps = layer_fusion_taps(net, k)?;
    extract_descriptor(net, weights, image, &taps)
}

/// The single tap a model contributes to model fusion: its feature tap,
/// kept whole when it is a vector and reduced otherwise (sum pooling on
/// densely evaluated graphs, max pooling on native convolutional maps).
pub fn best_single_tap(net: &NetworkSpec) -> Result<TapSpec> {
    let layer = net
        .feature_tap
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no feature tap", net.code_name)))?;
    let shape = infer_shapes(net)?
        .get(layer)
        .copied()
        .ok_or_else(|| Error::UnknownTap(layer.to_string()))?;
    let pool = if shape.plane() == 1 {
        PoolMode::Flatten
    } else if net.flexible_input {
        PoolMode::Sum
    } else {
        PoolMode::Max
    };
    Ok(TapSpec::new(layer, pool))
}

fn fused_meta(members: impl IntoIterator<Item = DescriptorMeta>) -> DescriptorMeta {
    let members: Vec<DescriptorMeta> = members.into_iter().collect();
    DescriptorMeta {
        model_code: members
            .iter()
            .map(|m| m.model_code.as_str())
            .collect::<Vec<_>>()
            .join("+"),
        taps: members.iter().flat_map(|m| m.taps.iter().cloned()).collect(),
        block_dims: members.iter().flat_map(|m| m.block_dims.iter().copied()).collect(),
        scale: members.iter().map(|m| m.scale).max().unwrap_or(0),
        members,
    }
}

/// Concatenates descriptors of one image in member order.
pub fn early_fuse(descriptors: &[Descriptor]) -> Result<Descriptor> {
    let Some(first) = descriptors.first() else {
        return Err(Error::InvalidArgument("nothing to fuse".into()));
    };
    if descriptors.len() == 1 {
        return Ok(first.clone());
    }
    if let Some(other) = descriptors.iter().find(|d| d.source != first.source) {
        return Err(Error::Provenance(format!(
            "descriptors of {:?} and {:?} cannot be fused",
            first.source, other.source
        )));
    }
    Ok(Descriptor {
        values: descriptors.iter().flat_map(|d| d.values.iter().copied()).collect(),
        meta: fused_meta(descriptors.iter().map(|d| d.meta.clone())),
        source: first.source.clone(),
    })
}

/// Row-wise [`early_fuse`] of descriptor files describing the same records
/// in the same order.
pub fn early_fuse_sets(sets: &[DescriptorSet]) -> Result<DescriptorSet> {
    let Some(first) = sets.first() else {
        return Err(Error::InvalidArgument("nothing to fuse".into()));
    };
    if sets.len() == 1 {
        return Ok(first.clone());
    }
    for set in &sets[1..] {
        if set.len() != first.len() {
            return Err(Error::Provenance(format!(
                "descriptor files hold {} and {} records",
                first.len(),
                set.len()
            )));
        }
        if let Some((a, b)) = first.records.iter().zip(&set.records).find(|(a, b)| a.id != b.id) {
            return Err(Error::Provenance(format!(
                "record `{}` lines up with `{}`",
                a.id, b.id
            )));
        }
    }
    let dim = sets.iter().map(|s| s.dim).sum();
    let mut fused = DescriptorSet::new(fused_meta(sets.iter().map(|s| s.meta.clone())), dim);
    let mut row = Vec::with_capacity(dim);
    for (i, info) in first.records.iter().enumerate() {
        row.clear();
        for set in sets {
            row.extend_from_slice(set.row(i));
        }
        fused.push(&row, info.clone())?;
    }
    Ok(fused)
}

/// Fused scores and their argmax labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LateFusion {
    pub scores: ScoreMatrix,
    pub labels: Vec<usize>,
}

fn check_same_shape(scores: &[ScoreMatrix]) -> Result<&ScoreMatrix> {
    let Some(first) = scores.first() else {
        return Err(Error::InvalidArgument("no score matrices to fuse".into()));
    };
    if let Some(m) = scores
        .iter()
        .find(|m| m.rows != first.rows || m.classes != first.classes)
    {
        return Err(Error::ShapeMismatch(format!(
            "score matrices {}x{} and {}x{}",
            first.rows, first.classes, m.rows, m.classes
        )));
    }
    Ok(first)
}

/// Weighted mean of per-model scores (uniform when `weights` is `None`);
/// labels are the row argmax, ties to the lowest class.
pub fn late_fuse(scores: &[ScoreMatrix], weights: Option<&[f64]>) -> Result<LateFusion> {
    let first = check_same_shape(scores)?;
    let uniform = vec![1.0 / scores.len() as f64; scores.len()];
    let weights = match weights {
        None => uniform.as_slice(),
        Some(w) => {
            if w.len() != scores.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} weights for {} score matrices",
                    w.len(),
                    scores.len()
                )));
            }
            if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(
                    "fusion weights must be nonnegative and sum to 1".into(),
                ));
            }
            w
        }
    };
    let mut data = vec![0.0f64; first.data.len()];
    for (m, &w) in scores.iter().zip(weights) {
        for (acc, &s) in data.iter_mut().zip(&m.data) {
            *acc += w * s;
        }
    }
    let scores = ScoreMatrix::new(first.rows, first.classes, data)?;
    let labels = scores.argmax();
    Ok(LateFusion { scores, labels })
}

/// Each model votes for its argmax class; the most voted class wins, ties
/// to the lowest class.
pub fn majority_vote(scores: &[ScoreMatrix]) -> Result<Vec<usize>> {
    let first = check_same_shape(scores)?;
    let votes: Vec<Vec<usize>> = scores.iter().map(ScoreMatrix::argmax).collect();
    Ok((0..first.rows)
        .map(|i| {
            let mut tally = vec![0.0f64; first.classes];
            for v in &votes {
                tally[v[i]] += 1.0;
            }
            argmax(&tally)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Layer,
    Early,
    Late,
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Layer => "layer",
            FusionMode::Early => "early",
            FusionMode::Late => "late",
        })
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layer" => Ok(FusionMode::Layer),
            "early" => Ok(FusionMode::Early),
            "late" => Ok(FusionMode::Late),
            other => Err(Error::InvalidArgument(format!(
                "fusion mode must be layer, early or late, got `{other}`"
            ))),
        }
    }
}

/// How late fusion combines member scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    #[default]
    Mean,
    Vote,
}

/// One model taking part in a fusion plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionMember {
    /// Catalog code (`M1`), `preset@scale`, or a model file path.
    pub model: String,
    /// Taps as `layer:mode`; empty means the model's best single tap.
    #[serde(default, with = "tap_strings")]
    pub taps: Vec<TapSpec>,
}

/// Declarative fusion recipe, stored as TOML.
///
/// ```toml
/// mode = "early"
///
/// [[members]]
/// model = "M1"
/// taps = ["fc7:flatten"]
///
/// [[members]]
/// model = "M5"
/// taps = ["inception-5b/output:max"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionPlan {
    pub mode: FusionMode,
    pub members: Vec<FusionMember>,
    /// Number of taps merged in layer mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_count: Option<usize>,
    #[serde(default)]
    pub combiner: Combiner,
    /// Per-member late-fusion weights; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl FusionPlan {
    pub fn layer(model: impl Into<String>, layer_count: usize) -> Self {
        FusionPlan {
            mode: FusionMode::Layer,
            members: vec![FusionMember {
                model: model.into(),
                taps: vec![],
            }],
            layer_count: Some(layer_count),
            combiner: Combiner::Mean,
            weights: None,
        }
    }

    /// An early or late plan over models using their best single taps.
    pub fn models<S: Into<String>>(mode: FusionMode, models: impl IntoIterator<Item = S>) -> Self {
        FusionPlan {
            mode,
            members: models
                .into_iter()
                .map(|m| FusionMember {
                    model: m.into(),
                    taps: vec![],
                })
                .collect(),
            layer_count: None,
            combiner: Combiner::Mean,
            weights: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("fusion plan: {msg}")));
        match self.mode {
            FusionMode::Layer => {
                if self.members.len() != 1 {
                    return bad(format!("layer mode takes one member, got {}", self.members.len()));
                }
                match self.layer_count {
                    Some(k) if (2..=MAX_FUSED_LAYERS).contains(&k) => {}
                    Some(k) => return bad(format!("layer_count must be in 2..={MAX_FUSED_LAYERS}, got {k}")),
                    None => return bad("layer mode needs layer_count".into()),
                }
            }
            FusionMode::Early | FusionMode::Late => {
                if self.members.len() < 2 {
                    return bad(format!("{} mode needs at least two members", self.mode));
                }
                if self.layer_count.is_some() {
                    return bad("layer_count only applies to layer mode".into());
                }
            }
        }
        if let Some(w) = &self.weights {
            if self.mode != FusionMode::Late {
                return bad("weights only apply to late fusion".into());
            }
            if w.len() != self.members.len() {
                return bad(format!("{} weights for {} members", w.len(), self.members.len()));
            }
            if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad("weights must be nonnegative and sum to 1".into());
            }
        }
        if let Some(m) = self.members.iter().find(|m| m.model.trim().is_empty()) {
            return bad(format!("member with empty model reference {:?}", m.model));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: FusionPlan =
            toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("fusion plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("fusion plans always serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        FusionPlan::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }
}

mod tap_strings {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::descriptor::TapSpec;

    pub fn serialize<S: Serializer>(taps: &[TapSpec], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(taps.iter().map(|t| t.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<TapSpec>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(D::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::descriptor_dim;
    use crate::nn::{preset, Preset};

    fn meta(code: &str, dim: usize) -> DescriptorMeta {
        DescriptorMeta {
            model_code: code.into(),
            taps: vec![TapSpec::new("fc7", PoolMode::Flatten)],
            block_dims: vec![dim],
            scale: 227,
            members: vec![],
        }
    }

    fn desc(code: &str, values: Vec<f32>, source: &str) -> Descriptor {
        Descriptor {
            meta: meta(code, values.len()),
            values,
            source: Some(source.into()),
        }
    }

    #[test]
    fn alexnet_full_layer_fusion_dim() {
        let net = preset(Preset::AlexNet, 227).unwrap();
        let taps = layer_fusion_taps(&net, 8).unwrap();
        assert_eq!(descriptor_dim(&net, &taps).unwrap(), 10568);
        assert!(layer_fusion_taps(&net, 0).is_err());
        assert!(layer_fusion_taps(&net, 9).is_err());
    }

    #[test]
    fn taps_grow_by_appending() {
        let net = preset(Preset::AlexNet, 227).unwrap();
        let mut prev = layer_fusion_taps(&net, 1).unwrap();
        assert_eq!(prev, vec![TapSpec::new("conv1", PoolMode::Sum)]);
        for k in 2..=8 {
            let cur = layer_fusion_taps(&net, k).unwrap();
            assert_eq!(&cur[..k - 1], prev.as_slice());
            prev = cur;
        }
    }

    #[test]
    fn best_taps_match_model_widths() {
        let dims: Vec<usize> = ["M1", "M2", "M3", "M4", "M5", "M7"]
            .iter()
            .map(|code| {
                let e = crate::nn::model_catalog().iter().find(|e| e.code == *code).unwrap();
                let net = preset(e.preset, e.scale).unwrap();
                descriptor_dim(&net, &[best_single_tap(&net).unwrap()]).unwrap()
            })
            .collect();
        assert_eq!(dims, vec![4096, 4096, 4096, 4096, 1024, 4096]);
    }

    #[test]
    fn early_fuse_concatenates() {
        let a = desc("M1", vec![1.0, 2.0], "img");
        let b = desc("M2", vec![3.0], "img");
        let f = early_fuse(&[a.clone(), b]).unwrap();
        assert_eq!(f.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(f.meta.model_code, "M1+M2");
        assert_eq!(f.meta.members.len(), 2);
        assert_eq!(early_fuse(std::slice::from_ref(&a)).unwrap(), a);
        let c = desc("M3", vec![0.0], "other");
        assert!(matches!(early_fuse(&[a, c]), Err(Error::Provenance(_))));
        assert!(early_fuse(&[]).is_err());
    }

    #[test]
    fn late_fuse_hand_example() {
        let a = ScoreMatrix::new(1, 2, vec![2.0, 0.0]).unwrap();
        let b = ScoreMatrix::new(1, 2, vec![0.0, 1.0]).unwrap();
        let f = late_fuse(&[a, b], None).unwrap();
        assert_eq!(f.scores.data, vec![1.0, 0.5]);
        assert_eq!(f.labels, vec![0]);
    }

    #[test]
    fn late_fuse_rejects_bad_input() {
        let a = ScoreMatrix::new(1, 2, vec![2.0, 0.0]).unwrap();
        let b = ScoreMatrix::new(1, 3, vec![0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(late_fuse(&[a.clone(), b], None), Err(Error::ShapeMismatch(_))));
        assert!(late_fuse(&[a.clone(), a.clone()], Some(&[0.7, 0.7])).is_err());
        assert!(late_fuse(&[a.clone(), a.clone()], Some(&[1.5, -0.5])).is_err());
        assert!(late_fuse(&[a.clone(), a], Some(&[0.25, 0.75])).is_ok());
    }

    #[test]
    fn vote_breaks_ties_low() {
        let a = ScoreMatrix::new(1, 3, vec![0.0, 0.0, 1.0]).unwrap();
        let b = ScoreMatrix::new(1, 3, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(majority_vote(&[a.clone(), b.clone()]).unwrap(), vec![1]);
        assert_eq!(majority_vote(&[a.clone(), b, a]).unwrap(), vec![2]);
    }

    #[test]
    fn plan_toml_roundtrip() {
        let text = r#"
mode = "early"

[[members]]
model = "M1"
taps = ["fc7:flatten"]

[[members]]
model = "M5"
taps = ["inception-5b/output:max"]
"#;
        let plan = FusionPlan::from_toml(text).unwrap();
        assert_eq!(plan.members[1].taps, vec![TapSpec::new("inception-5b/output", PoolMode::Max)]);
        assert_eq!(FusionPlan::from_toml(&plan.to_toml()).unwrap(), plan);
    }

    #[test]
    fn plan_invariants() {
        assert!(FusionPlan::layer("M1", 8).validate().is_ok());
        assert!(FusionPlan::layer("M1", 9).validate().is_err());
        assert!(FusionPlan::models(FusionMode::Early, ["M1"]).validate().is_err());
        let mut late = FusionPlan::models(FusionMode::Late, ["M1", "M2"]);
        late.weights = Some(vec![0.5, 0.5]);
        assert!(late.validate().is_ok());
        late.weights = Some(vec![0.5]);
        assert!(late.validate().is_err());
        assert!(FusionPlan::from_toml("mode = \"sideways\"\nmembers = []").is_err());
    }
}
