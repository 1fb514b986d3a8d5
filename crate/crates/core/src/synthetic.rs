//! Seeded procedural images for end-to-end checks without real datasets.
//!
//! Three classes that differ in colour and texture statistics:
//! warm smooth blobs, cool horizontal stripes and green checkerboards.
//! Every image gets random hue jitter, pattern phase/frequency and
//! pixel noise, so no two images are alike.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::io::{format_manifest, ManifestRecord, RgbImage, Split};
use crate::Result;

pub const CLASS_NAMES: [&str; 3] = ["blobs", "stripes", "checks"];

/// One image of class `class` (0..3) drawn with `rng`.
pub fn synth_image(class: usize, size: u32, rng: &mut impl Rng) -> RgbImage {
    let base: [f32; 3] = match class % 3 {
        0 => [0.75, 0.35, 0.2],
        1 => [0.2, 0.35, 0.75],
        _ => [0.3, 0.65, 0.3],
    };
    let jitter: [f32; 3] = std::array::from_fn(|_| rng.gen_range(-0.25..0.25));
    let freq = rng.gen_range(2.0f32..5.0);
    let phase = rng.gen_range(0.0f32..std::f32::consts::TAU);
    let (cx, cy) = (rng.gen_range(0.25f32..0.75), rng.gen_range(0.25f32..0.75));
    let contrast = rng.gen_range(0.03f32..0.2);
    let s = size as f32;
    RgbImage::from_fn(size, size, |x, y| {
        let (u, v) = (x as f32 / s, y as f32 / s);
        let pattern = match class % 3 {
            0 => {
                let d2 = (u - cx).powi(2) + (v - cy).powi(2);
                (-d2 * 8.0).exp() * 2.0 - 1.0
            }
            1 => (v * freq * std::f32::consts::TAU + phase).sin().signum(),
            _ => {
                let cu = (u * freq * 2.0 + phase).floor() as i32;
                let cv = (v * freq * 2.0 + phase).floor() as i32;
                if (cu + cv) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        let px: [u8; 3] = std::array::from_fn(|c| {
            let noise = rng.gen_range(-0.15f32..0.15);
            let value = base[c] + jitter[c] + contrast * pattern + noise;
            (value.clamp(0.0, 1.0) * 255.0).round() as u8
        });
        image::Rgb(px)
    })
}

/// Labelled synthetic images, class-interleaved, deterministic in `seed`.
pub fn synth_dataset(per_class: usize, size: u32, seed: u64) -> Vec<(RgbImage, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..per_class * CLASS_NAMES.len())
        .map(|i| {
            let class = i % CLASS_NAMES.len();
            (synth_image(class, size, &mut rng), class)
        })
        .collect()
}

/// Writes PNGs plus `manifest.tsv` under `dir` and returns the manifest
/// records. Train and test images come from disjoint random streams.
pub fn write_synth_dataset(
    dir: impl AsRef<Path>,
    train_per_class: usize,
    test_per_class: usize,
    size: u32,
    seed: u64,
) -> Result<Vec<ManifestRecord>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("images"))?;
    let mut records = Vec::new();
    for (split, count, stream) in [
        (Split::Train, train_per_class, seed.wrapping_mul(2)),
        (Split::Test, test_per_class, seed.wrapping_mul(2).wrapping_add(1)),
    ] {
        for (i, (img, class)) in synth_dataset(count, size, stream).into_iter().enumerate() {
            let rel = format!("images/{split}-{i:04}.png");
            img.save(dir.join(&rel))
                .map_err(|e| crate::Error::Decode(format!("{rel}: {e}")))?;
            records.push(ManifestRecord {
                path: rel,
                label: CLASS_NAMES[class].to_string(),
                split,
            });
        }
    }
    std::fs::write(dir.join("manifest.tsv"), format_manifest(&records))?;
    Ok(records)
}
