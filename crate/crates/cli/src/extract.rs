use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fusecat::descriptor::{
    extract_descriptor_with, DescriptorMeta, DescriptorSet, Normalization, RecordInfo, TapSpec,
};
use fusecat::io::{load_image, load_model, preprocess, PreprocessSpec, ResizeMode};
use fusecat::nn::{resolve_model, NetworkSpec, WeightStore};

/// A model file path, or a reference understood by [`resolve_model`].
pub fn load_model_ref(reference: &str, seed: u64) -> Result<(NetworkSpec, WeightStore)> {
    let path = Path::new(reference);
    if path.extension().is_some_and(|e| e == "fcm") || path.is_file() {
        return load_model(path).with_context(|| format!("loading model {reference}"));
    }
    resolve_model(reference, seed).with_context(|| format!("resolving model {reference}"))
}

/// Applies `f` to every item on up to `threads` workers and returns the
/// results in input order.
pub fn parallel_map<T: Sync, U: Send>(
    items: &[T],
    threads: usize,
    f: impl Fn(&T) -> Result<U> + Sync,
) -> Result<Vec<U>> {
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let parts: Vec<Result<Vec<U>>> = std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(|| part.iter().map(&f).collect::<Result<Vec<U>>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("extraction worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

pub struct ExtractJob<'a> {
    pub net: &'a NetworkSpec,
    pub weights: &'a WeightStore,
    pub taps: &'a [TapSpec],
    pub norm: Normalization,
    pub resize: ResizeMode,
    pub threads: usize,
}

/// One descriptor row per `(image path, record)` pair, in order.
pub fn extract_images(job: &ExtractJob, items: &[(PathBuf, RecordInfo)]) -> Result<DescriptorSet> {
    let prep = PreprocessSpec {
        resize: job.resize,
        ..PreprocessSpec::new(job.net.input_shape.height)
    };
    let rows = parallel_map(items, job.threads, |(path, _)| {
        let image = load_image(path)?;
        let input = preprocess(&image, &prep)?;
        Ok(extract_descriptor_with(job.net, job.weights, &input, job.taps, job.norm)?)
    })?;
    let meta = match rows.first() {
        Some(d) => d.meta.clone(),
        None => DescriptorMeta {
            model_code: job.net.code_name.clone(),
            taps: job.taps.to_vec(),
            ..Default::default()
        },
    };
    let dim = rows.first().map_or(0, |d| d.dim());
    let mut set = DescriptorSet::new(meta, dim);
    for (d, (_, info)) in rows.into_iter().zip(items) {
        set.push(&d.values, info.clone())?;
    }
    Ok(set)
}
