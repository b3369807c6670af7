//! Deterministic synthetic scenes for demos and tests.
//!
//! `infrared_scene` mimics a thermal frame (dim background, a few warm blobs);
//! `visible_scene` mimics daylight texture (gradients, stripes, edges).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

fn image(h: usize, w: usize, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let pixels = (0..h * w)
        .map(|i| {
            let y = (i / w) as f64 / h.max(2).saturating_sub(1) as f64;
            let x = (i % w) as f64 / w.max(2).saturating_sub(1) as f64;
            f(y, x).clamp(0.0, 1.0) as f32
        })
        .collect();
    Tensor::image(h, w, pixels).expect("length matches")
}

/// Dark background with a few seeded Gaussian hot spots.
pub fn infrared_scene(h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.2..0.8),
                rng.random_range(0.2..0.8),
                rng.random_range(0.06..0.15),
                rng.random_range(0.6..0.9),
            )
        })
        .collect();
    image(h, w, |y, x| {
        let mut v = 0.12 + 0.05 * y;
        for &(cy, cx, r, amp) in &blobs {
            let d2 = (y - cy).powi(2) + (x - cx).powi(2);
            v += amp * (-d2 / (2.0 * r * r)).exp();
        }
        v
    })
}

/// Mid-gray scene with oriented stripes, a lit gradient and a hard edge.
pub fn visible_scene(h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freq = rng.random_range(10.0..18.0);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let edge = rng.random_range(0.3..0.7);
    let (s, c) = angle.sin_cos();
    image(h, w, |y, x| {
        let stripes = 0.15 * (freq * (x * c + y * s)).sin();
        let light = 0.25 + 0.35 * x;
        let building = if x > edge && y > 0.4 { 0.2 } else { 0.0 };
        light + stripes + building
    })
}

/// Smooth patch mixing a ramp and low-frequency waves.
pub fn smooth_patch(size: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fy, fx) = (rng.random_range(2.0..5.0), rng.random_range(2.0..5.0));
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    image(size, size, |y, x| {
        0.5 + 0.25 * (fy * y + phase).sin() * (fx * x).cos() + 0.15 * (x - y)
    })
}
