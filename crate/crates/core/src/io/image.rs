//! Image decoding and conversion into network input tensors.

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use image::RgbImage;

use crate::tensor::{Shape, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResizeMode {
    /// Plain resize to `S × S`, ignoring aspect ratio.
    #[default]
    Warp,
    /// Resize the shorter side to `S`, then take the central `S × S` crop.
    ShorterSideCenterCrop,
}

/// How an image becomes a `3 × S × S` tensor. Pixel values are scaled to
/// `[0, 1]` and the per-channel means (in the same units) are subtracted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub target_scale: usize,
    pub channel_means: [f32; 3],
    pub resize: ResizeMode,
}

impl PreprocessSpec {
    pub fn new(target_scale: usize) -> Self {
        PreprocessSpec {
            target_scale,
            channel_means: [0.0; 3],
            resize: ResizeMode::Warp,
        }
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
    Ok(img.to_rgb8())
}

/// Deterministic single-view preprocessing: bilinear resize (and optional
/// centre crop), RGB channel order, mean subtraction.
pub fn preprocess(image: &RgbImage, spec: &PreprocessSpec) -> Result<Tensor> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::Decode("image has no pixels".into()));
    }
    let s = spec.target_scale;
    if s == 0 {
        return Err(Error::InvalidArgument("target scale must be positive".into()));
    }
    let planes = to_planes(image);
    let (rw, rh) = match spec.resize {
        ResizeMode::Warp => (s, s),
        ResizeMode::ShorterSideCenterCrop => shorter_side_dims(w, h, s),
    };
    let (x0, y0) = ((rw - s) / 2, (rh - s) / 2);
    let mut data = Vec::with_capacity(3 * s * s);
    for (plane, mean) in planes.iter().zip(spec.channel_means) {
        let resized = resize_bilinear(plane, w, h, rw, rh);
        for y in y0..y0 + s {
            data.extend(resized[y * rw + x0..y * rw + x0 + s].iter().map(|v| v - mean));
        }
    }
    Tensor::new(Shape::new(3, s, s), data)
}

/// Size after scaling the shorter side to `s`, rounding the longer side.
fn shorter_side_dims(w: usize, h: usize, s: usize) -> (usize, usize) {
    if w <= h {
        (s, ((h as f64 * s as f64 / w as f64).round() as usize).max(s))
    } else {
        (((w as f64 * s as f64 / h as f64).round() as usize).max(s), s)
    }
}

fn to_planes(image: &RgbImage) -> [Vec<f32>; 3] {
    let n = (image.width() * image.height()) as usize;
    let mut planes = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for px in image.pixels() {
        for (plane, &v) in planes.iter_mut().zip(&px.0) {
            plane.push(v as f32 / 255.0);
        }
    }
    planes
}

/// Bilinear resampling of one row-major plane with pixel centres at
/// half-integer coordinates and edge clamping. Equal sizes are the identity.
pub fn resize_bilinear(src: &[f32], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f32> {
    assert_eq!(src.len(), sw * sh);
    let taps = |d: usize, s: usize| -> Vec<(usize, usize, f32)> {
        let ratio = s as f64 / d as f64;
        (0..d)
            .map(|o| {
                let pos = ((o as f64 + 0.5) * ratio - 0.5).clamp(0.0, (s - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(s - 1);
                (lo, hi, (pos - lo as f64) as f32)
            })
            .collect()
    };
    let xs = taps(dw, sw);
    let ys = taps(dh, sh);
    let mut out = Vec::with_capacity(dw * dh);
    for &(y0, y1, fy) in &ys {
        let (r0, r1) = (&src[y0 * sw..(y0 + 1) * sw], &src[y1 * sw..(y1 + 1) * sw]);
        for &(x0, x1, fx) in &xs {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
            out.push(top + (bottom - top) * fy);
        }
    }
    out
}
