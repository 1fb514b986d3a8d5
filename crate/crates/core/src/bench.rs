//! End-to-end throughput measurement: preprocess → forward through every
//! layer → descriptor from the model's feature tap, per frame.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descriptor::l2_normalize;
use crate::fusion::best_single_tap;
use crate::io::{preprocess, PreprocessSpec, RgbImage};
use crate::nn::{forward_profiled, NetworkSpec, WeightStore};
use crate::synthetic::synth_image;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Timed frames per model.
    pub iterations: usize,
    /// Untimed frames run first.
    pub warmup: usize,
    /// Worker threads sharing the timed frames.
    pub threads: usize,
    /// Seeds the synthetic source frame.
    pub seed: u64,
    /// Side of the square source frame before preprocessing.
    pub source_size: u32,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            iterations: 10,
            warmup: 1,
            threads: 1,
            seed: 0,
            source_size: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTime {
    pub layer: String,
    /// Mean milliseconds per frame.
    pub mean_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBench {
    pub code_name: String,
    pub scale: usize,
    pub frames_processed: usize,
    pub wall_seconds: f64,
    /// `frames_processed / wall_seconds`.
    pub fps: f64,
    /// Reciprocal of the median per-frame latency.
    pub median_fps: f64,
    /// Reciprocal of the mean per-frame latency.
    pub mean_fps: f64,
    pub descriptor_dim: usize,
    pub layer_times: Vec<LayerTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub cpu: String,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub environment: Environment,
    pub models: Vec<ModelBench>,
}

/// CPU model name from `/proc/cpuinfo`, or the target architecture.
pub fn cpu_description() -> String {
    std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|info| {
            info.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_string())
}

struct FrameStats {
    latencies: Vec<Duration>,
    layers: IndexMap<String, Duration>,
}

/// One full pipeline pass; returns the descriptor length.
fn run_frame(
    net: &NetworkSpec,
    weights: &WeightStore,
    frame: &RgbImage,
    prep: &PreprocessSpec,
    taps: &[&str],
    layers: Option<&mut IndexMap<String, Duration>>,
) -> Result<usize> {
    let input = preprocess(frame, prep)?;
    let (maps, timings) = forward_profiled(net, weights, &input, taps)?;
    let tap = best_single_tap(net)?;
    let map = maps.get(&tap.layer).expect("feature tap was requested");
    let descriptor = l2_normalize(&tap.pool.apply(map));
    if let Some(layers) = layers {
        for t in timings {
            *layers.entry(t.layer).or_default() += t.elapsed;
        }
    }
    Ok(descriptor.len())
}

/// Times the full pipeline of one model.
pub fn bench_model(net: &NetworkSpec, weights: &WeightStore, cfg: &BenchConfig) -> Result<ModelBench> {
    if cfg.iterations == 0 || cfg.threads == 0 {
        return Err(Error::InvalidArgument(
            "bench needs at least one iteration and one thread".into(),
        ));
    }
    weights.validate(net)?;
    let scale = net.input_shape.height;
    let prep = PreprocessSpec::new(scale);
    let frame = synth_image(0, cfg.source_size.max(1), &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let feature = best_single_tap(net)?.layer;
    let last = net.layers.last().expect("validated networks have layers").name.clone();
    let taps = [feature.as_str(), last.as_str()];

    let mut descriptor_dim = 0;
    for _ in 0..cfg.warmup {
        descriptor_dim = run_frame(net, weights, &frame, &prep, &taps, None)?;
    }

    let threads = cfg.threads.min(cfg.iterations);
    let share = |w: usize| cfg.iterations / threads + usize::from(w < cfg.iterations % threads);
    let worker = |w: usize| -> Result<(FrameStats, usize)> {
        let mut stats = FrameStats {
            latencies: Vec::with_capacity(share(w)),
            layers: IndexMap::new(),
        };
        let mut dim = 0;
        for _ in 0..share(w) {
            let start = Instant::now();
            dim = run_frame(net, weights, &frame, &prep, &taps, Some(&mut stats.layers))?;
            stats.latencies.push(start.elapsed());
        }
        Ok((stats, dim))
    };
    let start = Instant::now();
    let results: Vec<Result<(FrameStats, usize)>> = if threads == 1 {
        vec![worker(0)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads).map(|w| s.spawn(move || worker(w))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("bench worker panicked"))
                .collect()
        })
    };
    let wall = start.elapsed().as_secs_f64().max(1e-9);

    let mut latencies = Vec::with_capacity(cfg.iterations);
    let mut layers: IndexMap<String, Duration> = IndexMap::new();
    for r in results {
        let (stats, dim) = r?;
        descriptor_dim = dim;
        latencies.extend(stats.latencies);
        for (name, d) in stats.layers {
            *layers.entry(name).or_default() += d;
        }
    }
    let frames = latencies.len();
    let mut secs: Vec<f64> = latencies.iter().map(|d| d.as_secs_f64().max(1e-9)).collect();
    secs.sort_by(f64::total_cmp);
    let median = if frames % 2 == 1 {
        secs[frames / 2]
    } else {
        0.5 * (secs[frames / 2 - 1] + secs[frames / 2])
    };
    let mean = secs.iter().sum::<f64>() / frames as f64;
    Ok(ModelBench {
        code_name: net.code_name.clone(),
        scale,
        frames_processed: frames,
        wall_seconds: wall,
        fps: frames as f64 / wall,
        median_fps: 1.0 / median,
        mean_fps: 1.0 / mean,
        descriptor_dim,
        layer_times: layers
            .into_iter()
            .map(|(layer, d)| LayerTime {
                layer,
                mean_ms: d.as_secs_f64() * 1e3 / frames as f64,
            })
            .collect(),
    })
}

/// Benchmarks each model in turn.
pub fn bench(models: &[(NetworkSpec, WeightStore)], cfg: &BenchConfig) -> Result<BenchReport> {
    let models = models
        .iter()
        .map(|(net, weights)| bench_model(net, weights, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchReport {
        environment: Environment {
            cpu: cpu_description(),
            threads: cfg.threads,
        },
        models,
    })
}

impl BenchReport {
    /// Human-readable summary table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "cpu: {}  threads: {}", self.environment.cpu, self.environment.threads);
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>7} {:>9} {:>9} {:>10} {:>10}",
            "model", "scale", "frames", "wall_s", "fps", "median_fps", "mean_fps"
        );
        for m in &self.models {
            let _ = writeln!(
                out,
                "{:<12} {:>6} {:>7} {:>9.3} {:>9.2} {:>10.2} {:>10.2}",
                m.code_name, m.scale, m.frames_processed, m.wall_seconds, m.fps, m.median_fps, m.mean_fps
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{preset, Preset};

    #[test]
    fn tiny_report_is_wellformed() {
        let net = preset(Preset::Tiny, 32).unwrap();
        let weights = WeightStore::random(&net, 1).unwrap();
        let cfg = BenchConfig {
            iterations: 3,
            warmup: 0,
            threads: 2,
            ..Default::default()
        };
        let report = bench(&[(net, weights)], &cfg).unwrap();
        let m = &report.models[0];
        assert_eq!(m.frames_processed, 3);
        assert!(m.wall_seconds > 0.0 && m.fps > 0.0);
        assert!((m.fps - m.frames_processed as f64 / m.wall_seconds).abs() < 1e-9 * m.fps.max(1.0));
        assert_eq!(m.descriptor_dim, 128);
        assert!(m.layer_times.iter().any(|l| l.layer == "conv1"));
        assert!(report.to_table().contains("tiny"));
    }

    #[test]
    fn zero_iterations_rejected() {
        let net = preset(Preset::Tiny, 32).unwrap();
        let weights = WeightStore::random(&net, 1).unwrap();
        let cfg = BenchConfig {
            iterations: 0,
            ..Default::default()
        };
        assert!(bench_model(&net, &weights, &cfg).is_err());
    }
}
