//! Test-time fusion of two 64-channel feature stacks.

use std::fmt;
use std::str::FromStr;

use crate::error::{shape_err, Error, Result};
use crate::network::FeatureMaps;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Fusion strategy applied between encoder and decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Elementwise sum of the two feature stacks.
    Addition,
    /// Per-pixel blend weighted by block-averaged ℓ1 activity.
    L1Norm,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Addition => "addition",
            Strategy::L1Norm => "l1",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "addition" => Ok(Strategy::Addition),
            "l1" => Ok(Strategy::L1Norm),
            other => Err(Error::Argument(format!(
                "unknown strategy {other:?} (expected addition or l1)"
            ))),
        }
    }
}

/// Nonnegative per-pixel activity values, `h × w` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityMap<T = f32> {
    h: usize,
    w: usize,
    values: Vec<T>,
}

impl<T: Scalar> ActivityMap<T> {
    pub fn new(h: usize, w: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != h * w {
            return shape_err(format!("activity map needs {} values, got {}", h * w, values.len()));
        }
        if values.iter().any(|v| v.is_nan() || *v < T::zero()) {
            return Err(Error::Argument("activity values must be nonnegative".into()));
        }
        Ok(ActivityMap { h, w, values })
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> T {
        self.values[y * self.w + x]
    }
}

/// Per-pixel blend weights; `w1 + w2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights<T = f32> {
    pub w1: Vec<T>,
    pub w2: Vec<T>,
}

fn check_pair<T: Scalar>(a: &FeatureMaps<T>, b: &FeatureMaps<T>) -> Result<()> {
    a.tensor().expect_same_shape(b.tensor())?;
    if a.tensor().shape().n != 1 {
        return shape_err(format!(
            "fusion works on one image pair at a time, got batch of {}",
            a.tensor().shape().n
        ));
    }
    Ok(())
}

/// `f^m(x, y) = φ1^m(x, y) + φ2^m(x, y)`.
pub fn fuse_addition<T: Scalar>(phi1: &FeatureMaps<T>, phi2: &FeatureMaps<T>) -> Result<FeatureMaps<T>> {
    check_pair(phi1, phi2)?;
    FeatureMaps::new(phi1.tensor().add(phi2.tensor())?)
}

/// ℓ1 norm across channels at each pixel.
pub fn activity_map<T: Scalar>(phi: &FeatureMaps<T>) -> Result<ActivityMap<T>> {
    let t = phi.tensor();
    let s = t.shape();
    if s.n != 1 {
        return shape_err(format!("activity map needs a single sample, got {}", s.n));
    }
    let mut values = vec![T::zero(); s.plane()];
    for c in 0..s.c {
        for (acc, &v) in values.iter_mut().zip(t.plane(0, c)) {
            *acc += v.abs();
        }
    }
    Ok(ActivityMap { h: s.h, w: s.w, values })
}

/// Box average over a `(2r+1)²` block. Out-of-range neighbors count as zero and
/// the divisor stays `(2r+1)²` at the borders.
pub fn block_average<T: Scalar>(map: &ActivityMap<T>, r: usize) -> ActivityMap<T> {
    let (h, w) = (map.h, map.w);
    let side = 2 * r + 1;
    let divisor = T::lit((side * side) as f64);
    let mut values = vec![T::zero(); h * w];
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r).min(h - 1);
        for x in 0..w {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r).min(w - 1);
            let mut acc = T::zero();
            for yy in y0..=y1 {
                for &v in &map.values[yy * w + x0..=yy * w + x1] {
                    acc += v;
                }
            }
            values[y * w + x] = acc / divisor;
        }
    }
    ActivityMap { h, w, values }
}

/// `w_k = Ĉ_k / (Ĉ1 + Ĉ2)`, falling back to 0.5 each where both vanish.
pub fn fusion_weights<T: Scalar>(c1: &ActivityMap<T>, c2: &ActivityMap<T>) -> Result<FusionWeights<T>> {
    if (c1.h, c1.w) != (c2.h, c2.w) {
        return shape_err("activity maps differ in size");
    }
    let half = T::lit(0.5);
    let (w1, w2) = c1
        .values
        .iter()
        .zip(&c2.values)
        .map(|(&a, &b)| {
            let sum = a + b;
            if sum > T::zero() {
                (a / sum, b / sum)
            } else {
                (half, half)
            }
        })
        .unzip();
    Ok(FusionWeights { w1, w2 })
}

/// Soft-max weighted blend of the two stacks using block radius `r` (1 by default).
pub fn fuse_l1norm<T: Scalar>(phi1: &FeatureMaps<T>, phi2: &FeatureMaps<T>, r: usize) -> Result<FeatureMaps<T>> {
    check_pair(phi1, phi2)?;
    let hat1 = block_average(&activity_map(phi1)?, r);
    let hat2 = block_average(&activity_map(phi2)?, r);
    let weights = fusion_weights(&hat1, &hat2)?;
    let (a, b) = (phi1.tensor(), phi2.tensor());
    let s = a.shape();
    let mut out = Tensor::zeros(s);
    for c in 0..s.c {
        let (pa, pb) = (a.plane(0, c), b.plane(0, c));
        let dst = out.plane_mut(0, c);
        for i in 0..s.plane() {
            let (u, v) = (pa[i], pb[i]);
            let blended = weights.w1[i] * u + weights.w2[i] * v;
            // Rounding can push the blend one ulp outside [min, max].
            dst[i] = blended.max(u.min(v)).min(u.max(v));
        }
    }
    FeatureMaps::new(out)
}

/// Fuses with the chosen strategy (`r = 1` for ℓ1-norm).
pub fn fuse<T: Scalar>(strategy: Strategy, phi1: &FeatureMaps<T>, phi2: &FeatureMaps<T>) -> Result<FeatureMaps<T>> {
    match strategy {
        Strategy::Addition => fuse_addition(phi1, phi2),
        Strategy::L1Norm => fuse_l1norm(phi1, phi2, 1),
    }
}
