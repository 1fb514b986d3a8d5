//! Fixed-length descriptors from tapped feature maps.
//!
//! A tapped `C × H × W` map becomes either a `C`-vector (spatial max or sum
//! pooling) or a `C·H·W`-vector (flattening). Descriptors from several taps
//! are concatenated in tap order and L2-normalized.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::io::binary::{put_f32s, put_string, put_u32, put_u64, Reader};
use crate::io::Split;
use crate::nn::{forward, infer_shapes, NetworkSpec, WeightStore};
use crate::tensor::{Shape, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    Max,
    Sum,
    Flatten,
}

impl PoolMode {
    /// Descriptor length contributed by a tap of this shape.
    pub fn output_len(self, shape: Shape) -> usize {
        match self {
            PoolMode::Max | PoolMode::Sum => shape.channels,
            PoolMode::Flatten => shape.len(),
        }
    }

    pub fn apply(self, map: &Tensor) -> Vec<f32> {
        match self {
            PoolMode::Max => spatial_max_pool(map),
            PoolMode::Sum => spatial_sum_pool(map),
            PoolMode::Flatten => flatten_concat(map),
        }
    }
}

impl fmt::Display for PoolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolMode::Max => "max",
            PoolMode::Sum => "sum",
            PoolMode::Flatten => "flatten",
        })
    }
}

impl FromStr for PoolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(PoolMode::Max),
            "sum" => Ok(PoolMode::Sum),
            "flatten" | "linear" => Ok(PoolMode::Flatten),
            other => Err(Error::InvalidArgument(format!(
                "pool mode must be max, sum or flatten, got `{other}`"
            ))),
        }
    }
}

/// A layer to tap and how to reduce its output.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TapSpec {
    pub layer: String,
    pub pool: PoolMode,
}

impl TapSpec {
    pub fn new(layer: impl Into<String>, pool: PoolMode) -> Self {
        TapSpec {
            layer: layer.into(),
            pool,
        }
    }
}

impl fmt::Display for TapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.layer, self.pool)
    }
}

/// Parses `layer:mode`. The mode is split at the last colon so layer
/// names may contain colons.
impl FromStr for TapSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (layer, pool) = s.rsplit_once(':').ok_or_else(|| {
            Error::InvalidArgument(format!("tap `{s}` must look like layer:max|sum|flatten"))
        })?;
        if layer.is_empty() {
            return Err(Error::InvalidArgument(format!("tap `{s}` has no layer name")));
        }
        Ok(TapSpec::new(layer, pool.parse()?))
    }
}

/// Depth-dependent pooling: sum pooling for the lower half of `layers`,
/// max pooling for the upper half.
pub fn depth_policy<S: AsRef<str>>(layers: &[S]) -> Vec<TapSpec> {
    let half = layers.len() / 2;
    layers
        .iter()
        .enumerate()
        .map(|(i, l)| TapSpec::new(l.as_ref(), if i < half { PoolMode::Sum } else { PoolMode::Max }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// L2-normalize the concatenated vector.
    #[default]
    Whole,
    /// L2-normalize every tap block separately.
    PerBlock,
    None,
}

/// Where a descriptor came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DescriptorMeta {
    pub model_code: String,
    pub taps: Vec<TapSpec>,
    /// Length of each tap's block, in tap order.
    pub block_dims: Vec<usize>,
    pub scale: usize,
    /// Source descriptors of a fused descriptor, in fusion order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<DescriptorMeta>,
}

impl DescriptorMeta {
    pub fn dim(&self) -> usize {
        self.block_dims.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f32>,
    pub meta: DescriptorMeta,
    /// Identifier of the image or video the descriptor describes.
    pub source: Option<String>,
}

impl Descriptor {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }
}

/// Channel-wise maximum over each `H × W` map.
pub fn spatial_max_pool(map: &Tensor) -> Vec<f32> {
    map.channels()
        .map(|plane| plane.iter().copied().fold(f32::NEG_INFINITY, f32::max))
        .collect()
}

/// Channel-wise sum over each `H × W` map, accumulated in f64.
pub fn spatial_sum_pool(map: &Tensor) -> Vec<f32> {
    map.channels()
        .map(|plane| plane.iter().map(|&v| v as f64).sum::<f64>() as f32)
        .collect()
}

/// Every activation of the map, channel-major.
pub fn flatten_concat(map: &Tensor) -> Vec<f32> {
    map.data().to_vec()
}

/// Unit-L2 copy of `v`; the zero vector stays zero.
pub fn l2_normalize(v: &[f32]) -> Vec<f32> {
    let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|&x| (x as f64 / norm) as f32).collect()
}

/// Descriptor length for `taps` without running the network.
pub fn descriptor_dim(net: &NetworkSpec, taps: &[TapSpec]) -> Result<usize> {
    Ok(block_dims(net, taps)?.iter().sum())
}

fn block_dims(net: &NetworkSpec, taps: &[TapSpec]) -> Result<Vec<usize>> {
    let shapes = infer_shapes(net)?;
    taps.iter()
        .map(|t| {
            shapes
                .get(t.layer.as_str())
                .map(|&s| t.pool.output_len(s))
                .ok_or_else(|| Error::UnknownTap(t.layer.clone()))
        })
        .collect()
}

/// One forward pass, per-tap reduction, concatenation in tap order and
/// whole-vector L2 normalization.
pub fn extract_descriptor(
    net: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor,
    taps: &[TapSpec],
) -> Result<Descriptor> {
    extract_descriptor_with(net, weights, input, taps, Normalization::Whole)
}

pub fn extract_descriptor_with(
    net: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor,
    taps: &[TapSpec],
    norm: Normalization,
) -> Result<Descriptor> {
    if taps.is_empty() {
        return Err(Error::InvalidArgument("at least one tap is required".into()));
    }
    let names: Vec<&str> = taps.iter().map(|t| t.layer.as_str()).collect();
    let maps = forward(net, weights, input, &names)?;
    let mut values = Vec::new();
    let mut block_dims = Vec::with_capacity(taps.len());
    for tap in taps {
        let map = maps.get(&tap.layer).expect("forward returns every requested tap");
        let block = tap.pool.apply(map);
        block_dims.push(block.len());
        match norm {
            Normalization::PerBlock => values.extend(l2_normalize(&block)),
            _ => values.extend(block),
        }
    }
    if norm == Normalization::Whole {
        values = l2_normalize(&values);
    }
    Ok(Descriptor {
        values,
        meta: DescriptorMeta {
            model_code: net.code_name.clone(),
            taps: taps.to_vec(),
            block_dims,
            scale: input.shape().height,
            members: vec![],
        },
        source: None,
    })
}

/// Per-row identity in a descriptor file.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RecordInfo {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// A matrix of same-provenance descriptors, one row per record.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub meta: DescriptorMeta,
    pub records: Vec<RecordInfo>,
    pub dim: usize,
    /// Row-major `records.len() × dim`.
    pub data: Vec<f32>,
}

pub const DESCRIPTOR_MAGIC: &[u8; 4] = b"FCDS";
pub const DESCRIPTOR_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SetHeader {
    meta: DescriptorMeta,
    records: Vec<RecordInfo>,
}

impl DescriptorSet {
    pub fn new(meta: DescriptorMeta, dim: usize) -> Self {
        DescriptorSet {
            meta,
            records: vec![],
            dim,
            data: vec![],
        }
    }

    /// Collects descriptors sharing one dimension; the first one's metadata
    /// becomes the set's.
    pub fn from_descriptors(descriptors: Vec<(Descriptor, RecordInfo)>) -> Result<Self> {
        let Some((first, _)) = descriptors.first() else {
            return Err(Error::InvalidArgument("no descriptors to collect".into()));
        };
        let mut set = DescriptorSet::new(first.meta.clone(), first.dim());
        for (d, info) in descriptors {
            set.push(&d.values, info)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, values: &[f32], info: RecordInfo) -> Result<()> {
        if values.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "descriptor of length {} in a set of dimension {}",
                values.len(),
                self.dim
            )));
        }
        self.data.extend_from_slice(values);
        self.records.push(info);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn descriptor(&self, i: usize) -> Descriptor {
        Descriptor {
            values: self.row(i).to_vec(),
            meta: self.meta.clone(),
            source: Some(self.records[i].id.clone()),
        }
    }

    /// Rows whose split matches.
    pub fn filter_split(&self, split: Split) -> DescriptorSet {
        let mut out = DescriptorSet::new(self.meta.clone(), self.dim);
        for (i, r) in self.records.iter().enumerate() {
            if r.split == Some(split) {
                out.data.extend_from_slice(self.row(i));
                out.records.push(r.clone());
            }
        }
        out
    }

    /// Binary layout: magic `FCDS`, version u32, count u64, dim u64, header
    /// JSON (u64 length + bytes), then `count × dim` little-endian f32.
    pub fn encode(&self) -> Vec<u8> {
        let header = serde_json::to_string(&SetHeader {
            meta: self.meta.clone(),
            records: self.records.clone(),
        })
        .expect("descriptor metadata always serializes");
        let mut out = Vec::with_capacity(header.len() + self.data.len() * 4 + 40);
        out.extend_from_slice(DESCRIPTOR_MAGIC);
        put_u32(&mut out, DESCRIPTOR_VERSION);
        put_u64(&mut out, self.records.len() as u64);
        put_u64(&mut out, self.dim as u64);
        put_string(&mut out, &header);
        put_f32s(&mut out, &self.data);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "descriptor file");
        r.expect(DESCRIPTOR_MAGIC)?;
        let version = r.u32()?;
        if version != DESCRIPTOR_VERSION {
            return Err(r.corrupt(format!("unsupported version {version}")));
        }
        let count = r.u64()?;
        let dim = r.u64()?;
        let header = r.string()?;
        let header: SetHeader =
            serde_json::from_str(&header).map_err(|e| r.corrupt(format!("bad header: {e}")))?;
        let values = usize::try_from(count)
            .ok()
            .zip(usize::try_from(dim).ok())
            .and_then(|(c, d)| c.checked_mul(d))
            .filter(|n| n.checked_mul(4) == Some(r.remaining()))
            .ok_or_else(|| r.corrupt(format!("{count}x{dim} matrix does not match the data size")))?;
        if header.records.len() as u64 != count {
            return Err(r.corrupt(format!(
                "{} records for {count} rows",
                header.records.len()
            )));
        }
        let data = r.f32s(values)?;
        r.finish()?;
        Ok(DescriptorSet {
            meta: header.meta,
            records: header.records,
            dim: dim as usize,
            data,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        DescriptorSet::decode(&std::fs::read(path)?)
    }
}
