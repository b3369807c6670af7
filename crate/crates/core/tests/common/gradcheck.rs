//! Analytic gradients against central finite differences, in f64.

use super::*;
use densefuse::conv::{conv2d_backward, conv2d_forward, ConvLayer};
use densefuse::loss::{
    pixel_loss, pixel_loss_grad, ssim_grad_with, ssim_with, total_loss_and_grad_with, total_loss_backward,
    total_loss_with, SsimConfig,
};
use densefuse::network::{
    backward, decode_with_cache, encode_with_cache, init_params, DecoderParams, EncoderParams, NetworkGrads,
};
use densefuse::tensor::concat_channels;
use densefuse::{Shape, Tensor};
use rand::Rng;

fn weighted_sum(t: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    t.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn assert_close(analytic: f64, numeric: f64, what: &str) {
    let e = rel_error(analytic, numeric);
    assert!(
        e < FD_TOL,
        "{what}: analytic {analytic:e} numeric {numeric:e} rel {e:e}"
    );
}

pub fn check_conv(seed: u64, relu: bool) {
    let input = random_tensor(Shape::new(1, 2, 5, 5), -1.0, 1.0, seed);
    let layer = random_layer(2, 3, relu, seed + 100);
    let r = random_tensor(Shape::new(1, 3, 5, 5), -1.0, 1.0, seed + 200);
    let back = conv2d_backward(&input, &layer, &r).unwrap();

    let loss_of_input = |x: &[f64]| {
        let t = Tensor::new(input.shape(), x.to_vec()).unwrap();
        weighted_sum(&conv2d_forward(&t, &layer).unwrap(), &r)
    };
    let mut x = input.data().to_vec();
    for i in 0..x.len() {
        let num = central_diff(&mut x, i, loss_of_input);
        assert_close(back.grad_input.data()[i], num, &format!("d input[{i}]"));
    }

    let mut w = layer.weights().to_vec();
    for i in 0..w.len() {
        let num = central_diff(&mut w, i, |w| {
            let l = ConvLayer::new(2, 3, w.to_vec(), layer.bias().to_vec(), relu).unwrap();
            weighted_sum(&conv2d_forward(&input, &l).unwrap(), &r)
        });
        assert_close(back.grads.weights[i], num, &format!("d weight[{i}]"));
    }

    let mut b = layer.bias().to_vec();
    for i in 0..b.len() {
        let num = central_diff(&mut b, i, |b| {
            let l = ConvLayer::new(2, 3, layer.weights().to_vec(), b.to_vec(), relu).unwrap();
            weighted_sum(&conv2d_forward(&input, &l).unwrap(), &r)
        });
        assert_close(back.grads.bias[i], num, &format!("d bias[{i}]"));
    }
}

pub fn check_pixel(seed: u64) {
    let o = random_tensor(Shape::new(1, 1, 6, 6), 0.0, 1.0, seed);
    let i = random_tensor(Shape::new(1, 1, 6, 6), 0.0, 1.0, seed + 50);
    let g = pixel_loss_grad(&o, &i).unwrap();
    let mut x = o.data().to_vec();
    for k in 0..x.len() {
        let num = central_diff(&mut x, k, |x| {
            pixel_loss(&Tensor::new(o.shape(), x.to_vec()).unwrap(), &i).unwrap()
        });
        assert_close(g.data()[k], num, "pixel");
    }
}

fn check_ssim_on(o: &Tensor<f64>, i: &Tensor<f64>, cfg: &SsimConfig) {
    let g = ssim_grad_with(o, i, cfg).unwrap();
    let mut x = o.data().to_vec();
    for k in 0..x.len() {
        let num = central_diff(&mut x, k, |x| {
            ssim_with(&Tensor::new(o.shape(), x.to_vec()).unwrap(), i, cfg).unwrap()
        });
        assert_close(g.data()[k], num, "ssim");
    }
}

pub fn check_ssim(seed: u64) {
    let o = random_tensor(Shape::new(1, 1, 12, 12), 0.0, 1.0, seed);
    let i = random_tensor(Shape::new(1, 1, 12, 12), 0.0, 1.0, seed + 50);
    check_ssim_on(&o, &i, &SsimConfig::default());
}

pub fn check_ssim_batched() {
    let o = random_tensor(Shape::new(2, 1, 7, 9), 0.0, 1.0, 13);
    let i = random_tensor(Shape::new(2, 1, 7, 9), 0.0, 1.0, 14);
    check_ssim_on(&o, &i, &SsimConfig { window: 5, sigma: 1.0 });
}

pub fn check_total(seed: u64, lambda: f64) {
    let cfg = SsimConfig::default();
    let o = random_tensor(Shape::new(1, 1, 12, 12), 0.0, 1.0, seed);
    let i = random_tensor(Shape::new(1, 1, 12, 12), 0.0, 1.0, seed + 50);
    let g = total_loss_backward(&o, &i, lambda).unwrap();
    let mut x = o.data().to_vec();
    for k in 0..x.len() {
        let num = central_diff(&mut x, k, |x| {
            total_loss_with(&Tensor::new(o.shape(), x.to_vec()).unwrap(), &i, lambda, &cfg)
                .unwrap()
                .total
        });
        assert_close(g.data()[k], num, &format!("total λ={lambda}"));
    }
}

pub fn check_lambda_affine() {
    let o = random_tensor(Shape::new(1, 1, 12, 12), 0.0, 1.0, 18);
    let i = random_tensor(Shape::new(1, 1, 12, 12), 0.0, 1.0, 19);
    let g1 = total_loss_backward(&o, &i, 1.0).unwrap();
    let g2 = total_loss_backward(&o, &i, 1000.0).unwrap();
    let gs = ssim_grad_with(&o, &i, &SsimConfig::default()).unwrap();
    for k in 0..g1.len() {
        // d(1 − ssim) = −d ssim
        let expected = 999.0 * -gs.data()[k];
        assert!((g2.data()[k] - g1.data()[k] - expected).abs() < 1e-9 * (1.0 + expected.abs()));
    }
    let same = total_loss_and_grad_with(&o, &o, 10.0, &SsimConfig::default())
        .unwrap()
        .0;
    assert!(same.total.abs() < 1e-12);
}

/// Loss of the full pipeline plus the on/off pattern of every ReLU unit,
/// composed from the public layer primitives.
fn pipeline_eval(
    image: &Tensor<f64>,
    enc: &EncoderParams<f64>,
    dec: &DecoderParams<f64>,
    lambda: f64,
    cfg: &SsimConfig,
) -> (f64, Vec<bool>) {
    let mut mask = Vec::new();
    let mut record = |t: &Tensor<f64>| mask.extend(t.data().iter().map(|&v| v > 0.0));
    let y0 = conv2d_forward(image, &enc.c1).unwrap();
    let d1 = conv2d_forward(&y0, &enc.dc1).unwrap();
    let d2 = conv2d_forward(&concat_channels(&[&y0, &d1]).unwrap(), &enc.dc2).unwrap();
    let d3 = conv2d_forward(&concat_channels(&[&y0, &d1, &d2]).unwrap(), &enc.dc3).unwrap();
    let f = concat_channels(&[&y0, &d1, &d2, &d3]).unwrap();
    record(&f);
    let h2 = conv2d_forward(&f, &dec.c2).unwrap();
    let h3 = conv2d_forward(&h2, &dec.c3).unwrap();
    let h4 = conv2d_forward(&h3, &dec.c4).unwrap();
    record(&h2);
    record(&h3);
    record(&h4);
    let out = conv2d_forward(&h4, &dec.c5).unwrap();
    (total_loss_with(&out, image, lambda, cfg).unwrap().total, mask)
}

#[derive(Default)]
pub struct Tally {
    pub checked: usize,
    pub skipped: usize,
}

impl Tally {
    /// Central difference of one scalar parameter; `None` when either probe
    /// flips a ReLU unit, since the loss is not differentiable across that kink.
    fn probe(&mut self, base_mask: &[bool], mut eval: impl FnMut(f64) -> (f64, Vec<bool>)) -> Option<f64> {
        let (plus, m_plus) = eval(FD_EPS);
        let (minus, m_minus) = eval(-FD_EPS);
        if m_plus != base_mask || m_minus != base_mask {
            self.skipped += 1;
            return None;
        }
        self.checked += 1;
        Some((plus - minus) / (2.0 * FD_EPS))
    }
}

fn layer_of<'a>(e: &'a mut EncoderParams<f64>, d: &'a mut DecoderParams<f64>, idx: usize) -> &'a mut ConvLayer<f64> {
    if idx < 4 {
        e.layers_mut().into_iter().nth(idx).unwrap()
    } else {
        d.layers_mut().into_iter().nth(idx - 4).unwrap()
    }
}

pub fn check_end_to_end(size: usize, cfg: SsimConfig, seed: u64, lambda: f64) -> Tally {
    let (enc32, dec32) = init_params(seed);
    let mut enc: EncoderParams<f64> = enc32.cast();
    let mut dec: DecoderParams<f64> = dec32.cast();
    // Nonzero biases so bias gradients are exercised away from init.
    for (k, layer) in enc.layers_mut().into_iter().chain(dec.layers_mut()).enumerate() {
        for (j, b) in layer.bias_mut().iter_mut().enumerate() {
            *b = 0.01 * (((k * 7 + j) % 5) as f64 - 1.0);
        }
    }
    let image = random_tensor(Shape::new(1, 1, size, size), 0.0, 1.0, seed + 1000);

    let (features, ec) = encode_with_cache(&image, &enc).unwrap();
    let (out, dc) = decode_with_cache(features.tensor(), &dec).unwrap();
    let (_, g_out) = total_loss_and_grad_with(&out, &image, lambda, &cfg).unwrap();
    let mut grads = NetworkGrads::zeros(&enc, &dec);
    let g_image = backward(&enc, &dec, &ec, &dc, &g_out, &mut grads).unwrap();
    let (_, base_mask) = pipeline_eval(&image, &enc, &dec, lambda, &cfg);

    let mut tally = Tally::default();
    let mut r = rng(seed + 77);
    for layer_idx in 0..8 {
        let n_w = grads.layers[layer_idx].weights.len();
        let n_b = grads.layers[layer_idx].bias.len();
        let mut picks: Vec<(bool, usize)> = (0..6).map(|_| (false, r.random_range(0..n_w))).collect();
        picks.extend((0..2).map(|_| (true, r.random_range(0..n_b))));
        for (is_bias, j) in picks {
            let numeric = tally.probe(&base_mask, |delta| {
                let (mut e, mut d) = (enc.clone(), dec.clone());
                let layer = layer_of(&mut e, &mut d, layer_idx);
                if is_bias {
                    layer.bias_mut()[j] += delta;
                } else {
                    layer.weights_mut()[j] += delta;
                }
                pipeline_eval(&image, &e, &d, lambda, &cfg)
            });
            if let Some(num) = numeric {
                let g = &grads.layers[layer_idx];
                let analytic = if is_bias { g.bias[j] } else { g.weights[j] };
                assert_close(
                    analytic,
                    num,
                    &format!("layer {layer_idx} {} {j}", if is_bias { "bias" } else { "weight" }),
                );
            }
        }
    }

    // Input gradient: the image is both the network input and the loss target.
    let (_, g_target) = total_loss_and_grad_with(&image, &out, lambda, &cfg).unwrap();
    for k in (0..image.len()).step_by(3) {
        let numeric = tally.probe(&base_mask, |delta| {
            let mut x = image.data().to_vec();
            x[k] += delta;
            pipeline_eval(&Tensor::new(image.shape(), x).unwrap(), &enc, &dec, lambda, &cfg)
        });
        if let Some(num) = numeric {
            assert_close(g_image.data()[k] + g_target.data()[k], num, &format!("input {k}"));
        }
    }
    let total = tally.checked + tally.skipped;
    assert!(
        tally.checked * 2 >= total && tally.checked >= 20,
        "only {}/{total} probes avoided ReLU kinks",
        tally.checked
    );
    tally
}
