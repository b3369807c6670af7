#![allow(dead_code)]

pub mod gradcheck;

use densefuse::conv::ConvLayer;
use densefuse::{Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: Shape, lo: f64, hi: f64, seed: u64) -> Tensor<f64> {
    let mut r = rng(seed);
    Tensor::from_fn(shape, |_, _, _, _| r.random_range(lo..hi))
}

pub fn random_tensor_f32(shape: Shape, lo: f32, hi: f32, seed: u64) -> Tensor<f32> {
    let mut r = rng(seed);
    Tensor::from_fn(shape, |_, _, _, _| r.random_range(lo..hi))
}

pub fn random_layer(c_in: usize, c_out: usize, relu: bool, seed: u64) -> ConvLayer<f64> {
    let mut r = rng(seed);
    let w = (0..c_out * c_in * 9).map(|_| r.random_range(-0.5..0.5)).collect();
    let b = (0..c_out).map(|_| r.random_range(-0.2..0.2)).collect();
    ConvLayer::new(c_in, c_out, w, b, relu).unwrap()
}

/// `|analytic − numeric| / max(|analytic|, |numeric|, floor)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / scale
}

pub const FD_EPS: f64 = 1e-4;
pub const FD_TOL: f64 = 1e-3;

/// Central difference of `f` around `x[i]`.
pub fn central_diff(x: &mut [f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + FD_EPS;
    let plus = f(x);
    x[i] = orig - FD_EPS;
    let minus = f(x);
    x[i] = orig;
    (plus - minus) / (2.0 * FD_EPS)
}

/// Brute-force same-padded 3×3 convolution over explicit `(dy, dx)` offsets.
pub fn direct_conv(input: &Tensor<f64>, layer: &ConvLayer<f64>) -> Tensor<f64> {
    let s = input.shape();
    let mut out = Tensor::zeros(s.with_channels(layer.c_out()));
    for n in 0..s.n {
        for o in 0..layer.c_out() {
            for y in 0..s.h {
                for x in 0..s.w {
                    let mut acc = layer.bias()[o];
                    for i in 0..layer.c_in() {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let sy = y as i64 + ky as i64 - 1;
                                let sx = x as i64 + kx as i64 - 1;
                                let v = if sy < 0 || sx < 0 || sy >= s.h as i64 || sx >= s.w as i64 {
                                    0.0
                                } else {
                                    input.get(n, i, sy as usize, sx as usize)
                                };
                                acc += layer.weights()[((o * layer.c_in() + i) * 3 + ky) * 3 + kx] * v;
                            }
                        }
                    }
                    if layer.apply_relu() {
                        acc = acc.max(0.0);
                    }
                    out.set(n, o, y, x, acc);
                }
            }
        }
    }
    out
}

/// Independent SSIM: explicit 2-D Gaussian window, per-position moments, f64.
pub fn ssim_oracle(a: &Tensor<f64>, b: &Tensor<f64>, window: usize, sigma: f64) -> f64 {
    let half = (window / 2) as f64;
    let mut g = vec![0.0; window * window];
    for i in 0..window {
        for j in 0..window {
            let (dy, dx) = (i as f64 - half, j as f64 - half);
            g[i * window + j] = (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= total);
    let s = a.shape();
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut sum = 0.0;
    let mut count = 0usize;
    for n in 0..s.n {
        for py in 0..=s.h - window {
            for px in 0..=s.w - window {
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..window {
                    for j in 0..window {
                        let k = g[i * window + j];
                        mx += k * a.get(n, 0, py + i, px + j);
                        my += k * b.get(n, 0, py + i, px + j);
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for i in 0..window {
                    for j in 0..window {
                        let k = g[i * window + j];
                        let dx = a.get(n, 0, py + i, px + j) - mx;
                        let dy = b.get(n, 0, py + i, px + j) - my;
                        vx += k * dx * dx;
                        vy += k * dy * dy;
                        cxy += k * dx * dy;
                    }
                }
                sum += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
    }
    sum / count as f64
}
