//! Reconstruction objective `λ·(1 − SSIM(O, I)) + MSE(O, I)` and its gradient.
//!
//! SSIM uses a normalized Gaussian window (11×11, σ = 1.5 by default) slid over
//! every fully-covered position; the index is the uniform mean over positions.
//! The gradient is derived from the per-window moments: for each window `p`
//! the local index depends on `x` only through `μx`, `E[x²]` and `E[xy]`, so
//!
//! ```text
//! ∂S/∂x_q = Σ_p g(q − p) · (a_p + b_p·x_q + c_p·y_q)
//! ```
//!
//! which is a transposed window filter of three per-window coefficient maps.

use crate::error::{arg_err, shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Luminance stabilizer `(0.01·L)²` with dynamic range `L = 1`.
pub const SSIM_C1: f64 = 0.01 * 0.01;
/// Contrast stabilizer `(0.03·L)²`.
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    /// Odd window side length.
    pub window: usize,
    pub sigma: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig { window: 11, sigma: 1.5 }
    }
}

impl SsimConfig {
    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let half = (self.window / 2) as f64;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - half;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return arg_err(format!("SSIM window must be odd, got {}", self.window));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return arg_err(format!("SSIM sigma must be positive, got {}", self.sigma));
        }
        Ok(())
    }
}

/// Components of the training objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T = f32> {
    pub total: T,
    pub pixel: T,
    pub ssim: T,
    pub lambda: T,
}

/// Mean squared error over all elements.
pub fn pixel_loss<T: Scalar>(output: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    output.expect_same_shape(target)?;
    let sum: T = output
        .data()
        .iter()
        .zip(target.data())
        .map(|(&o, &i)| (o - i) * (o - i))
        .sum();
    Ok(sum / T::lit(output.len() as f64))
}

pub fn pixel_loss_grad<T: Scalar>(output: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    let scale = T::lit(2.0 / output.len() as f64);
    output.zip_map(target, |o, i| scale * (o - i))
}

/// Valid-coverage separable filter of one `h × w` plane.
fn filter_valid<T: Scalar>(plane: &[T], h: usize, w: usize, taps: &[T]) -> Vec<T> {
    let k = taps.len();
    let (ph, pw) = (h + 1 - k, w + 1 - k);
    let mut rows = vec![T::zero(); h * pw];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..pw {
            let mut acc = T::zero();
            for (t, &g) in taps.iter().enumerate() {
                acc += g * src[x + t];
            }
            rows[y * pw + x] = acc;
        }
    }
    let mut out = vec![T::zero(); ph * pw];
    for y in 0..ph {
        for (t, &g) in taps.iter().enumerate() {
            let src = &rows[(y + t) * pw..(y + t + 1) * pw];
            for (o, &v) in out[y * pw..(y + 1) * pw].iter_mut().zip(src) {
                *o += g * v;
            }
        }
    }
    out
}

/// Transpose of [`filter_valid`]: scatters a window-position map back onto the plane.
fn filter_valid_transpose<T: Scalar>(map: &[T], h: usize, w: usize, taps: &[T]) -> Vec<T> {
    let k = taps.len();
    let (ph, pw) = (h + 1 - k, w + 1 - k);
    let mut cols = vec![T::zero(); h * pw];
    for y in 0..ph {
        for (t, &g) in taps.iter().enumerate() {
            let dst = &mut cols[(y + t) * pw..(y + t + 1) * pw];
            for (o, &v) in dst.iter_mut().zip(&map[y * pw..(y + 1) * pw]) {
                *o += g * v;
            }
        }
    }
    let mut out = vec![T::zero(); h * w];
    for y in 0..h {
        let src = &cols[y * pw..(y + 1) * pw];
        let dst = &mut out[y * w..(y + 1) * w];
        for (x, &v) in src.iter().enumerate() {
            for (t, &g) in taps.iter().enumerate() {
                dst[x + t] += g * v;
            }
        }
    }
    out
}

fn check_ssim_inputs<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, cfg: &SsimConfig) -> Result<()> {
    cfg.validate()?;
    a.expect_same_shape(b)?;
    let s = a.shape();
    if s.c != 1 {
        return shape_err(format!("SSIM expects single-channel images, got {} channels", s.c));
    }
    if s.h < cfg.window || s.w < cfg.window {
        return arg_err(format!(
            "image {}x{} is smaller than the {}x{} SSIM window",
            s.h, s.w, cfg.window, cfg.window
        ));
    }
    Ok(())
}

/// Mean SSIM and, optionally, its gradient with respect to `a`.
fn ssim_impl<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    cfg: &SsimConfig,
    want_grad: bool,
) -> Result<(T, Option<Tensor<T>>)> {
    check_ssim_inputs(a, b, cfg)?;
    let s = a.shape();
    let taps: Vec<T> = cfg.taps().into_iter().map(T::lit).collect();
    let (h, w) = (s.h, s.w);
    let positions = (h + 1 - cfg.window) * (w + 1 - cfg.window);
    let count = T::lit((positions * s.n) as f64);
    let c1 = T::lit(SSIM_C1);
    let c2 = T::lit(SSIM_C2);
    let two = T::lit(2.0);

    let mut total = T::zero();
    let mut grad = want_grad.then(|| Tensor::zeros(s));
    for n in 0..s.n {
        let x = a.plane(n, 0);
        let y = b.plane(n, 0);
        let prod = |f: fn(T, T) -> T| -> Vec<T> { x.iter().zip(y).map(|(&p, &q)| f(p, q)).collect() };
        let mu_x = filter_valid(x, h, w, &taps);
        let mu_y = filter_valid(y, h, w, &taps);
        let exx = filter_valid(&prod(|p, _| p * p), h, w, &taps);
        let eyy = filter_valid(&prod(|_, q| q * q), h, w, &taps);
        let exy = filter_valid(&prod(|p, q| p * q), h, w, &taps);

        let mut coef_a = vec![T::zero(); positions];
        let mut coef_b = vec![T::zero(); positions];
        let mut coef_c = vec![T::zero(); positions];
        for p in 0..positions {
            let (mx, my) = (mu_x[p], mu_y[p]);
            let sxx = exx[p] - mx * mx;
            let syy = eyy[p] - my * my;
            let sxy = exy[p] - mx * my;
            let a1 = two * mx * my + c1;
            let a2 = two * sxy + c2;
            let b1 = mx * mx + my * my + c1;
            let b2 = sxx + syy + c2;
            let idx = (a1 * a2) / (b1 * b2);
            total += idx;
            if want_grad {
                let d_mu = two * my * a2 / (b1 * b2) - two * mx * idx / b1;
                let d_sxx = -idx / b2;
                let d_sxy = two * a1 / (b1 * b2);
                coef_a[p] = d_mu - two * mx * d_sxx - my * d_sxy;
                coef_b[p] = two * d_sxx;
                coef_c[p] = d_sxy;
            }
        }
        if let Some(g) = grad.as_mut() {
            let ta = filter_valid_transpose(&coef_a, h, w, &taps);
            let tb = filter_valid_transpose(&coef_b, h, w, &taps);
            let tc = filter_valid_transpose(&coef_c, h, w, &taps);
            let dst = g.plane_mut(n, 0);
            for q in 0..h * w {
                dst[q] = (ta[q] + tb[q] * x[q] + tc[q] * y[q]) / count;
            }
        }
    }
    Ok((total / count, grad))
}

/// Mean SSIM over all window positions (and batch samples) with a custom window.
pub fn ssim_with<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, cfg: &SsimConfig) -> Result<T> {
    ssim_impl(a, b, cfg, false).map(|(v, _)| v)
}

/// Mean SSIM with the default 11×11, σ = 1.5 Gaussian window.
pub fn ssim<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<T> {
    ssim_with(a, b, &SsimConfig::default())
}

/// Gradient of mean SSIM with respect to `a`.
pub fn ssim_grad_with<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, cfg: &SsimConfig) -> Result<Tensor<T>> {
    Ok(ssim_impl(a, b, cfg, true)?.1.expect("gradient requested"))
}

pub fn ssim_loss<T: Scalar>(output: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    Ok(T::one() - ssim(output, target)?)
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda <= T::zero() || !lambda.is_finite() {
        return arg_err(format!("lambda must be positive and finite, got {lambda}"));
    }
    Ok(())
}

/// Loss value and gradient with respect to `output`.
pub fn total_loss_and_grad_with<T: Scalar>(
    output: &Tensor<T>,
    target: &Tensor<T>,
    lambda: T,
    cfg: &SsimConfig,
) -> Result<(LossBreakdown<T>, Tensor<T>)> {
    check_lambda(lambda)?;
    let (s, ssim_grad) = ssim_impl(output, target, cfg, true)?;
    let pixel = pixel_loss(output, target)?;
    let ssim = T::one() - s;
    let breakdown = LossBreakdown {
        total: lambda * ssim + pixel,
        pixel,
        ssim,
        lambda,
    };
    let ssim_grad = ssim_grad.expect("gradient requested");
    let grad = pixel_loss_grad(output, target)?.zip_map(&ssim_grad, |p, g| p - lambda * g)?;
    Ok((breakdown, grad))
}

pub fn total_loss_with<T: Scalar>(
    output: &Tensor<T>,
    target: &Tensor<T>,
    lambda: T,
    cfg: &SsimConfig,
) -> Result<LossBreakdown<T>> {
    check_lambda(lambda)?;
    let pixel = pixel_loss(output, target)?;
    let ssim = T::one() - ssim_with(output, target, cfg)?;
    Ok(LossBreakdown {
        total: lambda * ssim + pixel,
        pixel,
        ssim,
        lambda,
    })
}

pub fn total_loss<T: Scalar>(output: &Tensor<T>, target: &Tensor<T>, lambda: T) -> Result<LossBreakdown<T>> {
    total_loss_with(output, target, lambda, &SsimConfig::default())
}

/// Gradient of [`total_loss`] with respect to `output`.
pub fn total_loss_backward<T: Scalar>(output: &Tensor<T>, target: &Tensor<T>, lambda: T) -> Result<Tensor<T>> {
    total_loss_and_grad_with(output, target, lambda, &SsimConfig::default()).map(|(_, g)| g)
}
