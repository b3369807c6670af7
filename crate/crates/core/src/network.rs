//! Encoder (C1 + dense block DC1..DC3) and decoder (C2..C5).
//!
//! ```text
//! image ─C1─► y0 ─DC1─► d1
//!             y0,d1 ─DC2─► d2
//!             y0,d1,d2 ─DC3─► d3
//!             features = [y0 | d1 | d2 | d3]   (64 channels)
//! features ─C2─► 64 ─C3─► 32 ─C4─► 16 ─C5─► 1
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::conv::{conv2d_backward_with_output, conv2d_forward, ConvGrads, ConvLayer};
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::{concat_channels, split_channels, Tensor};

/// Channels produced by each encoder layer.
pub const GROWTH: usize = 16;
/// Channels of the encoder output.
pub const FEATURE_CHANNELS: usize = 4 * GROWTH;

/// `(name, c_in, c_out, relu)` for every layer, in model-file order.
pub const LAYER_TABLE: [(&str, usize, usize, bool); 8] = [
    ("c1", 1, 16, true),
    ("dc1", 16, 16, true),
    ("dc2", 32, 16, true),
    ("dc3", 48, 16, true),
    ("c2", 64, 64, true),
    ("c3", 64, 32, true),
    ("c4", 32, 16, true),
    ("c5", 16, 1, false),
];

fn check_layer<T: Scalar>(layer: &ConvLayer<T>, index: usize) -> Result<()> {
    let (name, c_in, c_out, relu) = LAYER_TABLE[index];
    if layer.c_in() != c_in || layer.c_out() != c_out || layer.apply_relu() != relu {
        return shape_err(format!(
            "layer {name} must be {c_in}->{c_out} (relu={relu}), got {}->{} (relu={})",
            layer.c_in(),
            layer.c_out(),
            layer.apply_relu()
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T = f32> {
    pub c1: ConvLayer<T>,
    pub dc1: ConvLayer<T>,
    pub dc2: ConvLayer<T>,
    pub dc3: ConvLayer<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams<T = f32> {
    pub c2: ConvLayer<T>,
    pub c3: ConvLayer<T>,
    pub c4: ConvLayer<T>,
    pub c5: ConvLayer<T>,
}

impl<T: Scalar> EncoderParams<T> {
    pub fn new(c1: ConvLayer<T>, dc1: ConvLayer<T>, dc2: ConvLayer<T>, dc3: ConvLayer<T>) -> Result<Self> {
        let p = EncoderParams { c1, dc1, dc2, dc3 };
        for (i, layer) in p.layers().into_iter().enumerate() {
            check_layer(layer, i)?;
        }
        Ok(p)
    }

    pub fn zeros() -> Self {
        let l = |i: usize| {
            let (_, c_in, c_out, relu) = LAYER_TABLE[i];
            ConvLayer::zeros(c_in, c_out, relu)
        };
        EncoderParams {
            c1: l(0),
            dc1: l(1),
            dc2: l(2),
            dc3: l(3),
        }
    }

    pub fn layers(&self) -> [&ConvLayer<T>; 4] {
        [&self.c1, &self.dc1, &self.dc2, &self.dc3]
    }

    pub fn layers_mut(&mut self) -> [&mut ConvLayer<T>; 4] {
        [&mut self.c1, &mut self.dc1, &mut self.dc2, &mut self.dc3]
    }

    pub fn cast<U: Scalar>(&self) -> EncoderParams<U> {
        EncoderParams {
            c1: self.c1.cast(),
            dc1: self.dc1.cast(),
            dc2: self.dc2.cast(),
            dc3: self.dc3.cast(),
        }
    }
}

impl<T: Scalar> DecoderParams<T> {
    pub fn new(c2: ConvLayer<T>, c3: ConvLayer<T>, c4: ConvLayer<T>, c5: ConvLayer<T>) -> Result<Self> {
        let p = DecoderParams { c2, c3, c4, c5 };
        for (i, layer) in p.layers().into_iter().enumerate() {
            check_layer(layer, i + 4)?;
        }
        Ok(p)
    }

    pub fn zeros() -> Self {
        let l = |i: usize| {
            let (_, c_in, c_out, relu) = LAYER_TABLE[i];
            ConvLayer::zeros(c_in, c_out, relu)
        };
        DecoderParams {
            c2: l(4),
            c3: l(5),
            c4: l(6),
            c5: l(7),
        }
    }

    pub fn layers(&self) -> [&ConvLayer<T>; 4] {
        [&self.c2, &self.c3, &self.c4, &self.c5]
    }

    pub fn layers_mut(&mut self) -> [&mut ConvLayer<T>; 4] {
        [&mut self.c2, &mut self.c3, &mut self.c4, &mut self.c5]
    }

    pub fn cast<U: Scalar>(&self) -> DecoderParams<U> {
        DecoderParams {
            c2: self.c2.cast(),
            c3: self.c3.cast(),
            c4: self.c4.cast(),
            c5: self.c5.cast(),
        }
    }
}

/// Encoder output: 64 channels, spatially aligned with the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaps<T = f32>(Tensor<T>);

impl<T: Scalar> FeatureMaps<T> {
    pub fn new(t: Tensor<T>) -> Result<Self> {
        t.expect_channels(FEATURE_CHANNELS, "feature maps")?;
        Ok(FeatureMaps(t))
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.0
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    image: Tensor<T>,
    y0: Tensor<T>,
    d1: Tensor<T>,
    d2: Tensor<T>,
    d3: Tensor<T>,
    cat01: Tensor<T>,
    cat012: Tensor<T>,
}

impl<T: Scalar> EncoderCache<T> {
    /// Channel counts seen by DC1, DC2 and DC3.
    pub fn dense_input_channels(&self) -> [usize; 3] {
        [self.y0.shape().c, self.cat01.shape().c, self.cat012.shape().c]
    }
}

/// Runs the encoder and keeps every intermediate activation.
pub fn encode_with_cache<T: Scalar>(
    image: &Tensor<T>,
    params: &EncoderParams<T>,
) -> Result<(FeatureMaps<T>, EncoderCache<T>)> {
    image.expect_channels(1, "encoder")?;
    let y0 = conv2d_forward(image, &params.c1)?;
    let d1 = conv2d_forward(&y0, &params.dc1)?;
    let cat01 = concat_channels(&[&y0, &d1])?;
    let d2 = conv2d_forward(&cat01, &params.dc2)?;
    let cat012 = concat_channels(&[&y0, &d1, &d2])?;
    let d3 = conv2d_forward(&cat012, &params.dc3)?;
    let features = FeatureMaps(concat_channels(&[&y0, &d1, &d2, &d3])?);
    let cache = EncoderCache {
        image: image.clone(),
        y0,
        d1,
        d2,
        d3,
        cat01,
        cat012,
    };
    Ok((features, cache))
}

pub fn encode<T: Scalar>(image: &Tensor<T>, params: &EncoderParams<T>) -> Result<FeatureMaps<T>> {
    encode_with_cache(image, params).map(|(f, _)| f)
}

#[derive(Debug, Clone)]
pub struct DecoderCache<T> {
    input: Tensor<T>,
    h2: Tensor<T>,
    h3: Tensor<T>,
    h4: Tensor<T>,
    out: Tensor<T>,
}

/// Unclamped decoder output plus activations for the backward pass.
pub fn decode_with_cache<T: Scalar>(
    features: &Tensor<T>,
    params: &DecoderParams<T>,
) -> Result<(Tensor<T>, DecoderCache<T>)> {
    features.expect_channels(FEATURE_CHANNELS, "decoder")?;
    let h2 = conv2d_forward(features, &params.c2)?;
    let h3 = conv2d_forward(&h2, &params.c3)?;
    let h4 = conv2d_forward(&h3, &params.c4)?;
    let out = conv2d_forward(&h4, &params.c5)?;
    let cache = DecoderCache {
        input: features.clone(),
        h2,
        h3,
        h4,
        out: out.clone(),
    };
    Ok((out, cache))
}

/// Decoder output without the `[0, 1]` clamp, as used by the training loss.
pub fn decode_unclamped<T: Scalar>(features: &Tensor<T>, params: &DecoderParams<T>) -> Result<Tensor<T>> {
    decode_with_cache(features, params).map(|(o, _)| o)
}

/// Decodes feature maps into an image clamped to `[0, 1]`.
pub fn decode<T: Scalar>(features: &FeatureMaps<T>, params: &DecoderParams<T>) -> Result<Tensor<T>> {
    Ok(decode_unclamped(features.tensor(), params)?.clamp01())
}

/// Inference reconstruction, clamped to `[0, 1]`.
pub fn reconstruct<T: Scalar>(image: &Tensor<T>, enc: &EncoderParams<T>, dec: &DecoderParams<T>) -> Result<Tensor<T>> {
    decode(&encode(image, enc)?, dec)
}

/// Training-mode reconstruction: identical to [`reconstruct`] minus the clamp.
pub fn reconstruct_unclamped<T: Scalar>(
    image: &Tensor<T>,
    enc: &EncoderParams<T>,
    dec: &DecoderParams<T>,
) -> Result<Tensor<T>> {
    decode_unclamped(encode(image, enc)?.tensor(), dec)
}

/// Parameter gradients for the whole autoencoder, in [`LAYER_TABLE`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads<T = f32> {
    pub layers: [ConvGrads<T>; 8],
}

impl<T: Scalar> NetworkGrads<T> {
    pub fn zeros(enc: &EncoderParams<T>, dec: &DecoderParams<T>) -> Self {
        let [a, b, c, d] = enc.layers();
        let [e, f, g, h] = dec.layers();
        NetworkGrads {
            layers: [a, b, c, d, e, f, g, h].map(ConvGrads::zeros_like),
        }
    }
}

/// Backpropagates `grad_out` (gradient w.r.t. the unclamped decoder output)
/// through decoder then encoder. Returns the gradient w.r.t. the input image.
pub fn backward<T: Scalar>(
    enc: &EncoderParams<T>,
    dec: &DecoderParams<T>,
    enc_cache: &EncoderCache<T>,
    dec_cache: &DecoderCache<T>,
    grad_out: &Tensor<T>,
    grads: &mut NetworkGrads<T>,
) -> Result<Tensor<T>> {
    let dc = dec_cache;
    let b5 = conv2d_backward_with_output(&dc.h4, &dec.c5, &dc.out, grad_out)?;
    let b4 = conv2d_backward_with_output(&dc.h3, &dec.c4, &dc.h4, &b5.grad_input)?;
    let b3 = conv2d_backward_with_output(&dc.h2, &dec.c3, &dc.h3, &b4.grad_input)?;
    let b2 = conv2d_backward_with_output(&dc.input, &dec.c2, &dc.h2, &b3.grad_input)?;
    grads.layers[7].accumulate(&b5.grads);
    grads.layers[6].accumulate(&b4.grads);
    grads.layers[5].accumulate(&b3.grads);
    grads.layers[4].accumulate(&b2.grads);

    let ec = enc_cache;
    let mut parts = split_channels(&b2.grad_input, &[GROWTH; 4])?.into_iter();
    let (mut g_y0, mut g_d1, mut g_d2, g_d3) = (
        parts.next().unwrap(),
        parts.next().unwrap(),
        parts.next().unwrap(),
        parts.next().unwrap(),
    );

    let b_dc3 = conv2d_backward_with_output(&ec.cat012, &enc.dc3, &ec.d3, &g_d3)?;
    grads.layers[3].accumulate(&b_dc3.grads);
    let routed = split_channels(&b_dc3.grad_input, &[GROWTH; 3])?;
    g_y0.add_assign(&routed[0])?;
    g_d1.add_assign(&routed[1])?;
    g_d2.add_assign(&routed[2])?;

    let b_dc2 = conv2d_backward_with_output(&ec.cat01, &enc.dc2, &ec.d2, &g_d2)?;
    grads.layers[2].accumulate(&b_dc2.grads);
    let routed = split_channels(&b_dc2.grad_input, &[GROWTH; 2])?;
    g_y0.add_assign(&routed[0])?;
    g_d1.add_assign(&routed[1])?;

    let b_dc1 = conv2d_backward_with_output(&ec.y0, &enc.dc1, &ec.d1, &g_d1)?;
    grads.layers[1].accumulate(&b_dc1.grads);
    g_y0.add_assign(&b_dc1.grad_input)?;

    let b_c1 = conv2d_backward_with_output(&ec.image, &enc.c1, &ec.y0, &g_y0)?;
    grads.layers[0].accumulate(&b_c1.grads);
    Ok(b_c1.grad_input)
}

fn init_layer(index: usize, rng: &mut ChaCha8Rng) -> ConvLayer<f32> {
    let (_, c_in, c_out, relu) = LAYER_TABLE[index];
    let gain = if relu { 2.0 } else { 1.0 };
    let std = (gain / (9.0 * c_in as f64)).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let weights = (0..c_out * c_in * 9).map(|_| normal.sample(rng) as f32).collect();
    ConvLayer::new(c_in, c_out, weights, vec![0.0; c_out], relu).expect("table shapes are consistent")
}

/// Seeded initialization: zero-mean normal weights with std `sqrt(2 / (9·c_in))`
/// for ReLU layers and `sqrt(1 / (9·c_in))` for C5; zero biases.
pub fn init_params(seed: u64) -> (EncoderParams, DecoderParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = (0..LAYER_TABLE.len()).map(|i| init_layer(i, &mut rng));
    let mut next = || layers.next().unwrap();
    let enc = EncoderParams {
        c1: next(),
        dc1: next(),
        dc2: next(),
        dc3: next(),
    };
    let dec = DecoderParams {
        c2: next(),
        c3: next(),
        c4: next(),
        c5: next(),
    };
    (enc, dec)
}
