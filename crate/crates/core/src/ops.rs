//! Numeric kernels that every network layer is built from.
//!
//! All kernels take tensors by reference and return fresh tensors. Padding is
//! always zero padding for convolution and "ignore" padding for pooling.

use crate::tensor::{Shape, Tensor};
use crate::{Error, Result};

/// Upper bound on the number of `f32` values held by the im2col scratch
/// buffer at once. Large inputs are processed in bands of output rows.
const IM2COL_BUDGET: usize = 1 << 22;

/// Geometry of a bank of convolution kernels, `out × in × kh × kw`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterShape {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
}

impl FilterShape {
    pub fn len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_h * self.kernel_w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements in one output channel's kernel.
    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }
}

/// Window geometry shared by max and average pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeometry {
    pub window: usize,
    pub stride: usize,
    pub pad: usize,
    /// Round the output size up instead of down, so a partial window at the
    /// bottom/right edge still produces an output.
    pub ceil_mode: bool,
}

impl PoolGeometry {
    pub fn new(window: usize, stride: usize) -> Self {
        PoolGeometry {
            window,
            stride,
            pad: 0,
            ceil_mode: false,
        }
    }
}

/// `⌊(dim + 2·pad − kernel)/stride⌋ + 1`, or `None` when no window fits.
pub fn conv_output_dim(dim: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = dim + 2 * pad;
    if stride == 0 || kernel == 0 || kernel > padded {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Output size of a pooling window sweep. In ceil mode the last window must
/// still start inside the (left-padded) input.
pub fn pool_output_dim(dim: usize, geom: PoolGeometry) -> Option<usize> {
    let padded = dim + 2 * geom.pad;
    if geom.stride == 0 || geom.window == 0 || geom.window > padded {
        return None;
    }
    if !geom.ceil_mode {
        return Some((padded - geom.window) / geom.stride + 1);
    }
    let mut out = (padded - geom.window).div_ceil(geom.stride) + 1;
    if geom.pad > 0 && (out - 1) * geom.stride >= dim + geom.pad {
        out -= 1;
    }
    Some(out)
}

fn geometry_error(what: &str, input: Shape, kernel: usize, stride: usize, pad: usize) -> Error {
    Error::InvalidGeometry(format!(
        "{what}: window {kernel} stride {stride} pad {pad} does not fit input {input}"
    ))
}

/// 2-D cross-correlation with zero padding, plus a per-channel bias.
///
/// Lowered to im2col + SGEMM, banded over output rows so the column buffer
/// stays bounded for large inputs.
pub fn conv2d(
    input: &Tensor,
    kernels: &[f32],
    filter: FilterShape,
    bias: &[f32],
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let shape = input.shape();
    if filter.in_channels != shape.channels {
        return Err(Error::ShapeMismatch(format!(
            "conv2d expects {} input channels, input is {shape}",
            filter.in_channels
        )));
    }
    if kernels.len() != filter.len() {
        return Err(Error::ShapeMismatch(format!(
            "conv2d kernel bank needs {} values, got {}",
            filter.len(),
            kernels.len()
        )));
    }
    if bias.len() != filter.out_channels {
        return Err(Error::ShapeMismatch(format!(
            "conv2d bias needs {} values, got {}",
            filter.out_channels,
            bias.len()
        )));
    }
    let out_h = conv_output_dim(shape.height, filter.kernel_h, stride, pad)
        .ok_or_else(|| geometry_error("conv2d", shape, filter.kernel_h, stride, pad))?;
    let out_w = conv_output_dim(shape.width, filter.kernel_w, stride, pad)
        .ok_or_else(|| geometry_error("conv2d", shape, filter.kernel_w, stride, pad))?;

    let positions = out_h * out_w;
    let depth = filter.fan_in();
    let mut out = vec![0.0f32; filter.out_channels * positions];
    for (plane, &b) in out.chunks_exact_mut(positions).zip(bias) {
        plane.fill(b);
    }

    let pointwise = filter.kernel_h == 1 && filter.kernel_w == 1 && stride == 1 && pad == 0;
    if pointwise {
        // The input already is the column matrix.
        gemm_accumulate(
            filter.out_channels,
            depth,
            positions,
            kernels,
            input.data(),
            positions,
            &mut out,
            positions,
        );
    } else {
        let band_rows = (IM2COL_BUDGET / (depth * out_w)).clamp(1, out_h);
        let mut cols = vec![0.0f32; depth * band_rows * out_w];
        let mut y0 = 0;
        while y0 < out_h {
            let rows = band_rows.min(out_h - y0);
            let n = rows * out_w;
            im2col_band(input, filter, stride, pad, y0, rows, out_w, &mut cols[..depth * n]);
            gemm_accumulate(
                filter.out_channels,
                depth,
                n,
                kernels,
                &cols[..depth * n],
                n,
                &mut out[y0 * out_w..],
                positions,
            );
            y0 += rows;
        }
    }
    Tensor::new(Shape::new(filter.out_channels, out_h, out_w), out)
}

/// Fills `cols` (`depth × rows·out_w`) with the receptive fields of output
/// rows `y0..y0 + rows`.
#[allow(clippy::too_many_arguments)]
fn im2col_band(
    input: &Tensor,
    filter: FilterShape,
    stride: usize,
    pad: usize,
    y0: usize,
    rows: usize,
    out_w: usize,
    cols: &mut [f32],
) {
    let shape = input.shape();
    let (h, w) = (shape.height as isize, shape.width as isize);
    let n = rows * out_w;
    let mut row_idx = 0;
    for c in 0..filter.in_channels {
        let plane = input.channel(c);
        for ky in 0..filter.kernel_h {
            for kx in 0..filter.kernel_w {
                let dst = &mut cols[row_idx * n..(row_idx + 1) * n];
                row_idx += 1;
                for r in 0..rows {
                    let iy = ((y0 + r) * stride + ky) as isize - pad as isize;
                    let line = &mut dst[r * out_w..(r + 1) * out_w];
                    if iy < 0 || iy >= h {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * shape.width..(iy as usize + 1) * shape.width];
                    if stride == 1 {
                        // Valid x range is contiguous: ix = x + kx - pad.
                        let offset = kx as isize - pad as isize;
                        let lo = (-offset).clamp(0, out_w as isize) as usize;
                        let hi = (w - offset).clamp(0, out_w as isize) as usize;
                        line[..lo].fill(0.0);
                        if hi > lo {
                            let s = (lo as isize + offset) as usize;
                            line[lo..hi].copy_from_slice(&src[s..s + (hi - lo)]);
                        }
                        line[hi.max(lo)..].fill(0.0);
                    } else {
                        for (x, v) in line.iter_mut().enumerate() {
                            let ix = (x * stride + kx) as isize - pad as isize;
                            *v = if ix >= 0 && ix < w { src[ix as usize] } else { 0.0 };
                        }
                    }
                }
            }
        }
    }
}

/// `c[m × n] += a[m × k] · b[k × n]`, with explicit row strides for `b` and `c`.
#[allow(clippy::too_many_arguments)]
fn gemm_accumulate(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    b: &[f32],
    b_row_stride: usize,
    c: &mut [f32],
    c_row_stride: usize,
) {
    assert!(a.len() >= m * k);
    assert!(k == 0 || b.len() >= (k - 1) * b_row_stride + n);
    assert!(m == 0 || c.len() >= (m - 1) * c_row_stride + n);
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            b_row_stride as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            c_row_stride as isize,
            1,
        );
    }
}

/// Max pooling without padding, output size rounded down.
pub fn maxpool2d(input: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
    maxpool2d_with(input, PoolGeometry::new(window, stride))
}

pub fn maxpool2d_with(input: &Tensor, geom: PoolGeometry) -> Result<Tensor> {
    pool2d(input, geom, "maxpool2d", |window| {
        window.fold(f32::NEG_INFINITY, f32::max)
    })
}

/// Average pooling; padded cells are excluded from the mean.
pub fn avgpool2d(input: &Tensor, geom: PoolGeometry) -> Result<Tensor> {
    pool2d(input, geom, "avgpool2d", |window| {
        let (sum, count) = window.fold((0.0f64, 0usize), |(s, n), v| (s + v as f64, n + 1));
        (sum / count as f64) as f32
    })
}

fn pool2d<F>(input: &Tensor, geom: PoolGeometry, what: &str, reduce: F) -> Result<Tensor>
where
    F: Fn(&mut dyn Iterator<Item = f32>) -> f32,
{
    let shape = input.shape();
    let err = || geometry_error(what, shape, geom.window, geom.stride, geom.pad);
    let out_h = pool_output_dim(shape.height, geom).ok_or_else(err)?;
    let out_w = pool_output_dim(shape.width, geom).ok_or_else(err)?;
    let mut out = Vec::with_capacity(shape.channels * out_h * out_w);
    let span = |o: usize, dim: usize| {
        let start = (o * geom.stride) as isize - geom.pad as isize;
        let lo = start.max(0) as usize;
        let hi = ((start + geom.window as isize).max(0) as usize).min(dim);
        lo..hi
    };
    for plane in input.channels() {
        for oy in 0..out_h {
            let ys = span(oy, shape.height);
            for ox in 0..out_w {
                let xs = span(ox, shape.width);
                let mut it = ys
                    .clone()
                    .flat_map(|y| plane[y * shape.width + xs.start..y * shape.width + xs.end].iter().copied());
                out.push(reduce(&mut it));
            }
        }
    }
    Tensor::new(Shape::new(shape.channels, out_h, out_w), out)
}

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    relu_inplace(&mut out);
    out
}

pub fn relu_inplace(t: &mut Tensor) {
    for v in t.data_mut() {
        *v = v.max(0.0);
    }
}

/// Local response normalization across channels:
/// `out = in / (k + alpha/n · Σ in²)^beta`, window of `n` channels centred on
/// each channel and clipped at the ends.
pub fn lrn(input: &Tensor, local_size: usize, alpha: f32, beta: f32, k: f32) -> Result<Tensor> {
    if local_size == 0 || local_size.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "lrn window must be odd and positive, got {local_size}"
        )));
    }
    let shape = input.shape();
    let plane = shape.plane();
    let half = local_size / 2;
    let squares: Vec<f32> = input.data().iter().map(|v| v * v).collect();
    let scale = alpha as f64 / local_size as f64;
    let mut out = vec![0.0f32; shape.len()];
    for c in 0..shape.channels {
        let lo = c.saturating_sub(half);
        let hi = (c + half).min(shape.channels - 1);
        let dst = &mut out[c * plane..(c + 1) * plane];
        let src = input.channel(c);
        for p in 0..plane {
            let sum: f64 = (lo..=hi).map(|cc| squares[cc * plane + p] as f64).sum();
            let denom = (k as f64 + scale * sum).powf(beta as f64);
            dst[p] = (src[p] as f64 / denom) as f32;
        }
    }
    Tensor::new(shape, out)
}

/// `W · flatten(input) + b`, returned as an `out × 1 × 1` tensor.
pub fn fully_connected(input: &Tensor, weights: &[f32], out_dim: usize, bias: &[f32]) -> Result<Tensor> {
    let x = input.data();
    let in_dim = x.len();
    if weights.len() != out_dim * in_dim {
        return Err(Error::ShapeMismatch(format!(
            "fully_connected weights must be {out_dim}x{in_dim}, got {} values",
            weights.len()
        )));
    }
    if bias.len() != out_dim {
        return Err(Error::ShapeMismatch(format!(
            "fully_connected bias needs {out_dim} values, got {}",
            bias.len()
        )));
    }
    let out = weights
        .chunks_exact(in_dim)
        .zip(bias)
        .map(|(row, &b)| (dot_f64(row, x) + b as f64) as f32)
        .collect();
    Tensor::new(Shape::vector(out_dim), out)
}

/// Dot product with eight independent f64 accumulators.
fn dot_f64(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(&x, &y)| x as f64 * y as f64)
        .sum();
    for (xa, xb) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += xa[i] as f64 * xb[i] as f64;
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Softmax over channels, independently at every spatial position. For a
/// flat `n × 1 × 1` vector this is the ordinary softmax.
pub fn softmax(input: &Tensor) -> Tensor {
    let shape = input.shape();
    let plane = shape.plane();
    let mut out = Tensor::zeros(shape);
    let src = input.data();
    let dst = out.data_mut();
    for p in 0..plane {
        let at = |c: usize| c * plane + p;
        let max = (0..shape.channels).map(|c| src[at(c)]).fold(f32::NEG_INFINITY, f32::max);
        let total: f64 = (0..shape.channels)
            .map(|c| ((src[at(c)] - max) as f64).exp())
            .sum();
        for c in 0..shape.channels {
            dst[at(c)] = (((src[at(c)] - max) as f64).exp() / total) as f32;
        }
    }
    out
}

/// Stacks tensors along the channel axis in input order.
pub fn concat_channels(inputs: &[&Tensor]) -> Result<Tensor> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat_channels needs at least one input".into()))?
        .shape();
    let mut channels = 0;
    for t in inputs {
        let s = t.shape();
        if s.height != first.height || s.width != first.width {
            return Err(Error::ShapeMismatch(format!(
                "concat_channels spatial dims differ: {first} vs {s}"
            )));
        }
        channels += s.channels;
    }
    let mut data = Vec::with_capacity(channels * first.plane());
    for t in inputs {
        data.extend_from_slice(t.data());
    }
    Tensor::new(Shape::new(channels, first.height, first.width), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(shape: Shape) -> Tensor {
        Tensor::new(shape, (0..shape.len()).map(|v| v as f32 * 0.1 - 1.0).collect()).unwrap()
    }

    #[test]
    fn conv_alexnet_first_layer_geometry() {
        assert_eq!(conv_output_dim(227, 11, 4, 0), Some(55));
        assert_eq!(conv_output_dim(4, 5, 1, 0), None);
        assert_eq!(conv_output_dim(4, 5, 1, 1), Some(2));
    }

    #[test]
    fn conv_identity_kernel() {
        let x = seq(Shape::new(1, 5, 5));
        let f = FilterShape {
            out_channels: 1,
            in_channels: 1,
            kernel_h: 1,
            kernel_w: 1,
        };
        let y = conv2d(&x, &[1.0], f, &[0.0], 1, 0).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_channel_mismatch() {
        let x = seq(Shape::new(2, 5, 5));
        let f = FilterShape {
            out_channels: 1,
            in_channels: 3,
            kernel_h: 1,
            kernel_w: 1,
        };
        assert!(matches!(
            conv2d(&x, &[1.0; 3], f, &[0.0], 1, 0),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn conv_kernel_larger_than_input() {
        let x = seq(Shape::new(1, 3, 3));
        let f = FilterShape {
            out_channels: 1,
            in_channels: 1,
            kernel_h: 5,
            kernel_w: 5,
        };
        assert!(matches!(
            conv2d(&x, &[0.0; 25], f, &[0.0], 1, 0),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn maxpool_constant_input() {
        let x = Tensor::filled(Shape::new(3, 7, 7), 2.5);
        let y = maxpool2d(&x, 3, 2).unwrap();
        assert_eq!(y.shape(), Shape::new(3, 3, 3));
        assert!(y.data().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn maxpool_window_too_big() {
        let x = Tensor::zeros(Shape::new(1, 2, 2));
        assert!(matches!(maxpool2d(&x, 3, 1), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn ceil_mode_pool_dims() {
        let g = PoolGeometry {
            window: 3,
            stride: 2,
            pad: 0,
            ceil_mode: true,
        };
        assert_eq!(pool_output_dim(112, g), Some(56));
        assert_eq!(pool_output_dim(14, g), Some(7));
        assert_eq!(pool_output_dim(112, PoolGeometry::new(3, 2)), Some(55));
    }

    #[test]
    fn padded_pool_keeps_size() {
        let g = PoolGeometry {
            window: 3,
            stride: 1,
            pad: 1,
            ceil_mode: true,
        };
        let x = seq(Shape::new(2, 7, 7));
        let y = maxpool2d_with(&x, g).unwrap();
        assert_eq!(y.shape(), x.shape());
        // Bottom-right corner sees only itself and its upper/left neighbours.
        assert_eq!(y.at(0, 6, 6), x.at(0, 6, 6));
    }

    #[test]
    fn avgpool_over_whole_map() {
        let x = Tensor::new(Shape::new(1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = avgpool2d(&x, PoolGeometry::new(2, 1)).unwrap();
        assert_eq!(y.data(), &[2.5]);
    }

    #[test]
    fn relu_signs() {
        let neg = Tensor::filled(Shape::new(2, 2, 2), -1.0);
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));
        let pos = Tensor::filled(Shape::new(2, 2, 2), 0.5);
        assert_eq!(relu(&pos), pos);
    }

    #[test]
    fn lrn_zero_and_scaling() {
        let z = Tensor::zeros(Shape::new(4, 3, 3));
        assert_eq!(lrn(&z, 5, 1e-4, 0.75, 2.0).unwrap(), z);

        let x = seq(Shape::new(1, 3, 3));
        let y = lrn(&x, 1, 0.0, 0.75, 2.0).unwrap();
        let s = 2.0f32.powf(0.75);
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b / s).abs() < 1e-6);
        }
        assert!(lrn(&x, 4, 1e-4, 0.75, 1.0).is_err());
    }

    #[test]
    fn fc_identity() {
        let x = seq(Shape::new(2, 2, 2));
        let mut w = vec![0.0; 64];
        for i in 0..8 {
            w[i * 8 + i] = 1.0;
        }
        let y = fully_connected(&x, &w, 8, &[0.0; 8]).unwrap();
        assert_eq!(y.shape(), Shape::vector(8));
        assert_eq!(y.data(), x.data());
        assert!(fully_connected(&x, &w[..63], 8, &[0.0; 8]).is_err());
    }

    #[test]
    fn softmax_uniform_and_peaked() {
        let u = softmax(&Tensor::filled(Shape::vector(4), 3.0));
        assert!(u.data().iter().all(|&v| (v - 0.25).abs() < 1e-7));
        let mut logits = vec![0.0; 5];
        logits[2] = 100.0;
        let p = softmax(&Tensor::from_vec(logits).unwrap());
        assert!((p.data()[2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn concat_inception_widths() {
        let branches: Vec<Tensor> = [384, 384, 128, 128]
            .iter()
            .map(|&c| Tensor::zeros(Shape::new(c, 7, 7)))
            .collect();
        let refs: Vec<&Tensor> = branches.iter().collect();
        assert_eq!(concat_channels(&refs).unwrap().shape(), Shape::new(1024, 7, 7));
        let single = seq(Shape::new(3, 2, 2));
        assert_eq!(concat_channels(&[&single]).unwrap(), single);
        let odd = Tensor::zeros(Shape::new(1, 6, 7));
        assert!(matches!(
            concat_channels(&[&branches[0], &odd]),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
