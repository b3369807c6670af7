//! Stride-1, same-padded 3×3 convolution.
//!
//! Every output element accumulates its products in ascending
//! `(input channel, dy, dx)` order and adds the bias last, so results are
//! bit-reproducible across runs.

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Kernel side length. Only 3×3 kernels exist in this network.
pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// One 3×3 convolution: weights `(c_out, c_in, 3, 3)`, bias `c_out`, optional ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T = f32> {
    c_in: usize,
    c_out: usize,
    weights: Vec<T>,
    bias: Vec<T>,
    apply_relu: bool,
}

/// Gradients of a [`ConvLayer`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T = f32> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvGrads<T> {
    pub fn zeros_like(layer: &ConvLayer<T>) -> Self {
        ConvGrads {
            weights: vec![T::zero(); layer.weights.len()],
            bias: vec![T::zero(); layer.bias.len()],
        }
    }

    pub fn accumulate(&mut self, other: &Self) {
        for (a, &b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, &b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }
}

impl<T: Scalar> ConvLayer<T> {
    pub fn new(c_in: usize, c_out: usize, weights: Vec<T>, bias: Vec<T>, apply_relu: bool) -> Result<Self> {
        if c_in == 0 || c_out == 0 {
            return shape_err("convolution needs at least one input and output channel");
        }
        if weights.len() != c_out * c_in * TAPS {
            return shape_err(format!(
                "weights hold {} values, expected {c_out}x{c_in}x3x3",
                weights.len()
            ));
        }
        if bias.len() != c_out {
            return shape_err(format!("bias holds {} values, expected {c_out}", bias.len()));
        }
        Ok(ConvLayer {
            c_in,
            c_out,
            weights,
            bias,
            apply_relu,
        })
    }

    pub fn zeros(c_in: usize, c_out: usize, apply_relu: bool) -> Self {
        ConvLayer {
            c_in,
            c_out,
            weights: vec![T::zero(); c_out * c_in * TAPS],
            bias: vec![T::zero(); c_out],
            apply_relu,
        }
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn apply_relu(&self) -> bool {
        self.apply_relu
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn kernel(&self, o: usize, i: usize) -> &[T] {
        let start = (o * self.c_in + i) * TAPS;
        &self.weights[start..start + TAPS]
    }

    pub fn cast<U: Scalar>(&self) -> ConvLayer<U> {
        ConvLayer {
            c_in: self.c_in,
            c_out: self.c_out,
            weights: self.weights.iter().map(|&v| U::lit(v.as_f64())).collect(),
            bias: self.bias.iter().map(|&v| U::lit(v.as_f64())).collect(),
            apply_relu: self.apply_relu,
        }
    }
}

/// Valid index range of `dst` for which `dst + d - 1` lies inside `0..len`.
#[inline]
fn tap_range(d: usize, len: usize) -> (usize, usize) {
    let lo = usize::from(d == 0);
    let hi = if d == 2 { len.saturating_sub(1) } else { len };
    (lo, hi)
}

/// `acc[y][x] += k · src[y + dy - 1][x + dx - 1]` over the same-padded plane.
#[inline]
fn accumulate_shifted<T: Scalar>(acc: &mut [T], src: &[T], h: usize, w: usize, dy: usize, dx: usize, k: T) {
    let (y0, y1) = tap_range(dy, h);
    let (x0, x1) = tap_range(dx, w);
    if x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let sy = y + dy - 1;
        let dst = &mut acc[y * w + x0..y * w + x1];
        let s = &src[sy * w + x0 + dx - 1..sy * w + x1 + dx - 1];
        for (a, &v) in dst.iter_mut().zip(s) {
            *a += k * v;
        }
    }
}

/// `Σ_{y,x} a[y][x] · src[y + dy - 1][x + dx - 1]` over the same-padded plane.
#[inline]
fn shifted_dot<T: Scalar>(a: &[T], src: &[T], h: usize, w: usize, dy: usize, dx: usize) -> T {
    let (y0, y1) = tap_range(dy, h);
    let (x0, x1) = tap_range(dx, w);
    let mut total = T::zero();
    if x0 >= x1 {
        return total;
    }
    for y in y0..y1 {
        let sy = y + dy - 1;
        let row = &a[y * w + x0..y * w + x1];
        let s = &src[sy * w + x0 + dx - 1..sy * w + x1 + dx - 1];
        for (&g, &v) in row.iter().zip(s) {
            total += g * v;
        }
    }
    total
}

/// `acc[y + dy - 1][x + dx - 1] += k · g[y][x]`, the transpose of [`accumulate_shifted`].
#[inline]
fn scatter_shifted<T: Scalar>(acc: &mut [T], g: &[T], h: usize, w: usize, dy: usize, dx: usize, k: T) {
    let (y0, y1) = tap_range(dy, h);
    let (x0, x1) = tap_range(dx, w);
    if x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let sy = y + dy - 1;
        let dst = &mut acc[sy * w + x0 + dx - 1..sy * w + x1 + dx - 1];
        let row = &g[y * w + x0..y * w + x1];
        for (a, &v) in dst.iter_mut().zip(row) {
            *a += k * v;
        }
    }
}

fn check_input<T: Scalar>(input: &Tensor<T>, layer: &ConvLayer<T>) -> Result<()> {
    let s = input.shape();
    if s.c != layer.c_in {
        return shape_err(format!(
            "convolution expects {} input channels, got {}",
            layer.c_in, s.c
        ));
    }
    if s.h == 0 || s.w == 0 {
        return shape_err(format!("convolution input {s} has an empty plane"));
    }
    Ok(())
}

/// Pre-activation output `Σ_i input[i] ⊛ weights[o,i] + bias[o]`.
fn linear_forward<T: Scalar>(input: &Tensor<T>, layer: &ConvLayer<T>) -> Tensor<T> {
    let s = input.shape();
    let out_shape = s.with_channels(layer.c_out);
    let mut out = Tensor::zeros(out_shape);
    for n in 0..s.n {
        for o in 0..layer.c_out {
            let acc = out.plane_mut(n, o);
            for i in 0..layer.c_in {
                let k = layer.kernel(o, i);
                let src = input.plane(n, i);
                for dy in 0..KERNEL {
                    for dx in 0..KERNEL {
                        accumulate_shifted(acc, src, s.h, s.w, dy, dx, k[dy * KERNEL + dx]);
                    }
                }
            }
            let b = layer.bias[o];
            for v in acc.iter_mut() {
                *v += b;
            }
        }
    }
    out
}

/// Same-padded 3×3 convolution followed by ReLU when the layer asks for it.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, layer: &ConvLayer<T>) -> Result<Tensor<T>> {
    check_input(input, layer)?;
    input.expect_finite("convolution input")?;
    let mut out = linear_forward(input, layer);
    if layer.apply_relu {
        for v in out.data_mut() {
            *v = v.max(T::zero());
        }
    }
    Ok(out)
}

/// Gradient of the scalar loss with respect to a convolution's input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBackward<T = f32> {
    pub grad_input: Tensor<T>,
    pub grads: ConvGrads<T>,
}

/// Backward pass of [`conv2d_forward`].
///
/// `grad_out` is the gradient with respect to the layer output (post-ReLU when
/// the layer has one). The pre-activation is recomputed to gate it.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    layer: &ConvLayer<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvBackward<T>> {
    check_input(input, layer)?;
    let output = if layer.apply_relu {
        Some(conv2d_forward(input, layer)?)
    } else {
        None
    };
    backward_impl(input, layer, output.as_ref(), grad_out)
}

/// Backward pass reusing the forward output already computed by the caller.
///
/// ReLU(z) > 0 exactly when z > 0, so the post-activation output is enough to gate.
pub fn conv2d_backward_with_output<T: Scalar>(
    input: &Tensor<T>,
    layer: &ConvLayer<T>,
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvBackward<T>> {
    check_input(input, layer)?;
    let expected = input.shape().with_channels(layer.c_out);
    if output.shape() != expected {
        return shape_err(format!("forward output {} != {expected}", output.shape()));
    }
    backward_impl(input, layer, layer.apply_relu.then_some(output), grad_out)
}

fn backward_impl<T: Scalar>(
    input: &Tensor<T>,
    layer: &ConvLayer<T>,
    relu_output: Option<&Tensor<T>>,
    grad_out: &Tensor<T>,
) -> Result<ConvBackward<T>> {
    let s = input.shape();
    let expected: Shape = s.with_channels(layer.c_out);
    if grad_out.shape() != expected {
        return shape_err(format!(
            "upstream gradient {} does not match layer output {expected}",
            grad_out.shape()
        ));
    }

    let gated;
    let grad = match relu_output {
        Some(out) => {
            gated = grad_out.zip_map(out, |g, y| if y > T::zero() { g } else { T::zero() })?;
            &gated
        }
        None => grad_out,
    };

    let mut grad_input = Tensor::zeros(s);
    let mut grads = ConvGrads::zeros_like(layer);
    for n in 0..s.n {
        for o in 0..layer.c_out {
            let g = grad.plane(n, o);
            grads.bias[o] += g.iter().copied().sum::<T>();
            for i in 0..layer.c_in {
                let src = input.plane(n, i);
                let base = (o * layer.c_in + i) * TAPS;
                for dy in 0..KERNEL {
                    for dx in 0..KERNEL {
                        grads.weights[base + dy * KERNEL + dx] += shifted_dot(g, src, s.h, s.w, dy, dx);
                    }
                }
            }
        }
        for i in 0..layer.c_in {
            let acc = grad_input.plane_mut(n, i);
            for o in 0..layer.c_out {
                let g = grad.plane(n, o);
                let k = layer.kernel(o, i);
                for dy in 0..KERNEL {
                    for dx in 0..KERNEL {
                        scatter_shifted(acc, g, s.h, s.w, dy, dx, k[dy * KERNEL + dx]);
                    }
                }
            }
        }
    }
    Ok(ConvBackward { grad_input, grads })
}
