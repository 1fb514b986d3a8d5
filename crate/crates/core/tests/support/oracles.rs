//! Direct-loop reference implementations, written independently of the
//! library kernels and evaluated in f64.
#![allow(dead_code)]

pub struct Map<'a> {
    pub data: &'a [f32],
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Map<'_> {
    fn get(&self, c: usize, y: isize, x: isize) -> Option<f64> {
        if y < 0 || x < 0 || y as usize >= self.h || x as usize >= self.w {
            return None;
        }
        Some(self.data[(c * self.h + y as usize) * self.w + x as usize] as f64)
    }
}

/// Zero-padded cross-correlation; returns (values, out_h, out_w).
#[allow(clippy::too_many_arguments)]
pub fn conv(
    m: &Map,
    kernels: &[f32],
    out: usize,
    kh: usize,
    kw: usize,
    bias: &[f32],
    stride: usize,
    pad: usize,
) -> (Vec<f64>, usize, usize) {
    let oh = (m.h + 2 * pad - kh) / stride + 1;
    let ow = (m.w + 2 * pad - kw) / stride + 1;
    let mut res = Vec::with_capacity(out * oh * ow);
    for o in 0..out {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = bias[o] as f64;
                for c in 0..m.c {
                    for i in 0..kh {
                        for j in 0..kw {
                            let yy = (y * stride + i) as isize - pad as isize;
                            let xx = (x * stride + j) as isize - pad as isize;
                            if let Some(v) = m.get(c, yy, xx) {
                                acc += v * kernels[((o * m.c + c) * kh + i) * kw + j] as f64;
                            }
                        }
                    }
                }
                res.push(acc);
            }
        }
    }
    (res, oh, ow)
}

/// Max pooling that skips padded cells. With `ceil`, the last window may
/// hang past the edge but must start inside the (left-padded) input.
pub fn maxpool(m: &Map, window: usize, stride: usize, pad: usize, ceil: bool) -> (Vec<f64>, usize, usize) {
    let dim = |n: usize| {
        let span = n + 2 * pad - window;
        let mut o = if ceil { span.div_ceil(stride) } else { span / stride } + 1;
        if ceil && pad > 0 && (o - 1) * stride >= n + pad {
            o -= 1;
        }
        o
    };
    let (oh, ow) = (dim(m.h), dim(m.w));
    let mut res = Vec::new();
    for c in 0..m.c {
        for y in 0..oh {
            for x in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for i in 0..window {
                    for j in 0..window {
                        let yy = (y * stride + i) as isize - pad as isize;
                        let xx = (x * stride + j) as isize - pad as isize;
                        if let Some(v) = m.get(c, yy, xx) {
                            best = best.max(v);
                        }
                    }
                }
                res.push(best);
            }
        }
    }
    (res, oh, ow)
}

pub fn lrn(m: &Map, size: usize, alpha: f64, beta: f64, k: f64) -> Vec<f64> {
    let half = (size / 2) as isize;
    let mut res = Vec::new();
    for c in 0..m.c {
        for y in 0..m.h {
            for x in 0..m.w {
                let mut sum = 0.0;
                for d in -half..=half {
                    let cc = c as isize + d;
                    if cc >= 0 && (cc as usize) < m.c {
                        let v = m.get(cc as usize, y as isize, x as isize).unwrap();
                        sum += v * v;
                    }
                }
                let v = m.get(c, y as isize, x as isize).unwrap();
                res.push(v / (k + alpha / size as f64 * sum).powf(beta));
            }
        }
    }
    res
}

pub fn fc(x: &[f32], weights: &[f32], out: usize, bias: &[f32]) -> Vec<f64> {
    (0..out)
        .map(|o| {
            bias[o] as f64
                + x.iter()
                    .enumerate()
                    .map(|(i, &v)| v as f64 * weights[o * x.len() + i] as f64)
                    .sum::<f64>()
        })
        .collect()
}

pub fn spatial_max(m: &Map) -> Vec<f64> {
    (0..m.c)
        .map(|c| {
            let mut best = f64::NEG_INFINITY;
            for y in 0..m.h {
                for x in 0..m.w {
                    best = best.max(m.get(c, y as isize, x as isize).unwrap());
                }
            }
            best
        })
        .collect()
}

pub fn spatial_sum(m: &Map) -> Vec<f64> {
    (0..m.c)
        .map(|c| {
            let mut acc = 0.0;
            for y in 0..m.h {
                for x in 0..m.w {
                    acc += m.get(c, y as isize, x as isize).unwrap();
                }
            }
            acc
        })
        .collect()
}

/// Largest absolute deviation divided by the oracle's largest magnitude.
pub fn rel_err(got: &[f32], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len(), "length mismatch");
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-30);
    got.iter()
        .zip(want)
        .map(|(&g, &w)| (g as f64 - w).abs())
        .fold(0.0, f64::max)
        / scale
}
