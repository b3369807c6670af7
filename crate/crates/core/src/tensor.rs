//! Rank-4 tensors in `(batch, channels, rows, columns)` layout.

use crate::error::{arg_err, shape_err, Error, Result};
use crate::scalar::Scalar;

/// Tensor shape as `(n, c, h, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub const fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of elements in one `h × w` plane.
    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    pub const fn with_channels(self, c: usize) -> Self {
        Shape { c, ..self }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Dense row-major tensor. Images, feature maps and gradients all use it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return shape_err(format!(
                "data length {} does not match shape {shape} ({} elements)",
                data.len(),
                shape.len()
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.len()],
        }
    }

    /// Builds a tensor from a function of `(n, c, y, x)`.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for y in 0..shape.h {
                    for x in 0..shape.w {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    /// Single image `(1, 1, h, w)` from row-major pixel values.
    pub fn image(h: usize, w: usize, pixels: Vec<T>) -> Result<Self> {
        Self::new(Shape::new(1, 1, h, w), pixels)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        let s = self.shape;
        ((n * s.c + c) * s.h + y) * s.w + x
    }

    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.index(n, c, y, x)]
    }

    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, v: T) {
        let i = self.index(n, c, y, x);
        self.data[i] = v;
    }

    /// The `h × w` plane of sample `n`, channel `c`.
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let start = self.index(n, c, 0, 0);
        &self.data[start..start + self.shape.plane()]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let start = self.index(n, c, 0, 0);
        let len = self.shape.plane();
        &mut self.data[start..start + len]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.expect_same_shape(other)?;
        Ok(Tensor {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.expect_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn clamp01(&self) -> Self {
        self.map(|v| v.max(T::zero()).min(T::one()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn expect_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Numeric(format!("{what} contains NaN or infinite values")))
        }
    }

    pub fn expect_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return shape_err(format!("shape {} != {}", self.shape, other.shape));
        }
        Ok(())
    }

    pub fn expect_channels(&self, c: usize, what: &str) -> Result<()> {
        if self.shape.c != c {
            return shape_err(format!("{what} expects {c} channels, got {}", self.shape.c));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.expect_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Element type conversion (e.g. `f32` parameters to `f64` for gradient checks).
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }

    /// Samples `start..start + len` along the batch axis.
    pub fn batch_slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.shape.n {
            return shape_err(format!(
                "batch slice {start}..{} out of range for {} samples",
                start + len,
                self.shape.n
            ));
        }
        let per = self.shape.c * self.shape.plane();
        Ok(Tensor {
            shape: Shape { n: len, ..self.shape },
            data: self.data[start * per..(start + len) * per].to_vec(),
        })
    }

    /// Stacks tensors of equal `(c, h, w)` along the batch axis.
    pub fn stack(parts: &[&Self]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return arg_err("cannot stack an empty list");
        };
        let base = first.shape;
        let mut data = Vec::new();
        let mut n = 0;
        for p in parts {
            let s = p.shape;
            if (s.c, s.h, s.w) != (base.c, base.h, base.w) {
                return shape_err(format!("cannot stack {s} with {base}"));
            }
            n += s.n;
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            shape: Shape { n, ..base },
            data,
        })
    }
}

/// Elementwise `max(0, x)`.
pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| v.max(T::zero()))
}

/// Concatenates tensors along the channel axis, preserving part order.
pub fn concat_channels<T: Scalar>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let Some(first) = parts.first() else {
        return arg_err("cannot concatenate an empty list");
    };
    let base = first.shape;
    let mut channels = 0;
    for p in parts {
        let s = p.shape;
        if (s.n, s.h, s.w) != (base.n, base.h, base.w) {
            return shape_err(format!("cannot concatenate {s} with {base}"));
        }
        channels += s.c;
    }
    let out_shape = base.with_channels(channels);
    let mut data = Vec::with_capacity(out_shape.len());
    for n in 0..base.n {
        for p in parts {
            let per = p.shape.c * base.plane();
            data.extend_from_slice(&p.data[n * per..(n + 1) * per]);
        }
    }
    Ok(Tensor { shape: out_shape, data })
}

/// Splits along the channel axis into parts with the given channel counts.
/// Inverse of [`concat_channels`].
pub fn split_channels<T: Scalar>(input: &Tensor<T>, sizes: &[usize]) -> Result<Vec<Tensor<T>>> {
    let s = input.shape;
    if sizes.iter().sum::<usize>() != s.c {
        return shape_err(format!("split sizes {sizes:?} do not sum to {} channels", s.c));
    }
    let mut parts: Vec<Tensor<T>> = sizes
        .iter()
        .map(|&c| Tensor {
            shape: s.with_channels(c),
            data: Vec::with_capacity(s.n * c * s.plane()),
        })
        .collect();
    let mut offset = 0;
    for n in 0..s.n {
        for (part, &c) in parts.iter_mut().zip(sizes) {
            let len = c * s.plane();
            part.data.extend_from_slice(&input.data[offset..offset + len]);
            offset += len;
        }
        debug_assert_eq!(offset, (n + 1) * s.c * s.plane());
    }
    Ok(parts)
}
