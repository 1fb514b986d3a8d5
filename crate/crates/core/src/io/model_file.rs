//! The `.fcm` model container.
//!
//! ```text
//! magic        4 bytes  "FCM\0"
//! version      u32      1
//! layer count  u32      number of layers in the spec section
//! spec         u64 length + UTF-8 JSON of the NetworkSpec
//! entry count  u32
//! per entry    name (u64 length + UTF-8), rank u32, dims u64 × rank,
//!              bias length u64, kernel f32 × Π dims, bias f32 × bias length
//! extension    u64 length + opaque bytes (reserved for weight importers)
//! ```
//!
//! All integers and reals are little-endian. The blob section round-trips
//! bit-exactly.

use std::fs;
use std::path::Path;

use super::binary::{put_f32s, put_string, put_u32, put_u64, Reader};
use crate::nn::{LayerWeights, NetworkSpec, WeightStore};
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"FCM\0";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(net: &NetworkSpec, weights: &WeightStore) -> Result<Vec<u8>> {
    let spec = serde_json::to_string(net).map_err(|e| Error::InvalidNetwork(e.to_string()))?;
    let mut out = Vec::with_capacity(spec.len() + weights.parameter_count() * 4 + 64);
    out.extend_from_slice(MODEL_MAGIC);
    put_u32(&mut out, MODEL_VERSION);
    put_u32(&mut out, net.layers.len() as u32);
    put_string(&mut out, &spec);
    put_u32(&mut out, weights.len() as u32);
    for (name, w) in weights.iter() {
        put_string(&mut out, name);
        put_u32(&mut out, w.shape.len() as u32);
        for &d in &w.shape {
            put_u64(&mut out, d as u64);
        }
        put_u64(&mut out, w.bias.len() as u64);
        put_f32s(&mut out, &w.weights);
        put_f32s(&mut out, &w.bias);
    }
    put_u64(&mut out, 0);
    Ok(out)
}

/// Parses a model container and checks the weights against the spec.
pub fn decode_model(bytes: &[u8]) -> Result<(NetworkSpec, WeightStore)> {
    let mut r = Reader::new(bytes, "model file");
    r.expect(MODEL_MAGIC)?;
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(r.corrupt(format!("unsupported version {version}")));
    }
    let layer_count = r.u32()? as usize;
    let spec = r.string()?;
    let net: NetworkSpec =
        serde_json::from_str(&spec).map_err(|e| r.corrupt(format!("bad spec section: {e}")))?;
    if net.layers.len() != layer_count {
        return Err(r.corrupt(format!(
            "header declares {layer_count} layers, spec has {}",
            net.layers.len()
        )));
    }
    net.validate()
        .map_err(|e| r.corrupt(format!("spec section: {e}")))?;

    let entries = r.u32()?;
    let mut store = WeightStore::new();
    for _ in 0..entries {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        if rank == 0 || rank > 4 {
            return Err(r.corrupt(format!("layer `{name}` has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.len(1)?);
        }
        let bias_len = r.len(4)?;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|n| n.checked_mul(4).is_some_and(|b| b <= r.remaining()))
            .ok_or_else(|| r.corrupt(format!("layer `{name}` blob exceeds the file")))?;
        let weights = r.f32s(count)?;
        let bias = r.f32s(bias_len)?;
        let entry = LayerWeights::new(shape, weights, bias)
            .map_err(|e| r.corrupt(format!("layer `{name}`: {e}")))?;
        store.insert(name, entry);
    }
    let ext = r.len(1)?;
    r.take(ext)?;
    r.finish()?;
    store
        .validate(&net)
        .map_err(|e| Error::CorruptFile(format!("weights do not match the spec: {e}")))?;
    Ok((net, store))
}

pub fn save_model(path: impl AsRef<Path>, net: &NetworkSpec, weights: &WeightStore) -> Result<()> {
    fs::write(path, encode_model(net, weights)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(NetworkSpec, WeightStore)> {
    decode_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{preset, Preset};

    #[test]
    fn tiny_roundtrip_is_bit_exact() {
        let net = preset(Preset::Tiny, 32).unwrap();
        let w = WeightStore::random(&net, 3).unwrap();
        let bytes = encode_model(&net, &w).unwrap();
        let (net2, w2) = decode_model(&bytes).unwrap();
        assert_eq!(net2, net);
        for ((a, x), (b, y)) in w.iter().zip(w2.iter()) {
            assert_eq!(a, b);
            assert_eq!(x.shape, y.shape);
            assert!(x.weights.iter().zip(&y.weights).all(|(p, q)| p.to_bits() == q.to_bits()));
            assert!(x.bias.iter().zip(&y.bias).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        assert_eq!(encode_model(&net2, &w2).unwrap(), bytes);
    }

    #[test]
    fn bad_magic_and_version() {
        let net = preset(Preset::Tiny, 32).unwrap();
        let mut bytes = encode_model(&net, &WeightStore::random(&net, 0).unwrap()).unwrap();
        bytes[4] = 9;
        assert!(matches!(decode_model(&bytes), Err(Error::CorruptFile(_))));
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(Error::CorruptFile(_))));
    }

    #[test]
    fn mismatched_weights_fail_on_load() {
        let net = preset(Preset::Tiny, 32).unwrap();
        let mut w = WeightStore::random(&net, 0).unwrap();
        w.insert("conv1", LayerWeights::new(vec![2, 3, 3, 3], vec![0.0; 54], vec![0.0; 2]).unwrap());
        let bytes = encode_model(&net, &w).unwrap();
        assert!(matches!(decode_model(&bytes), Err(Error::CorruptFile(_))));
    }
}
