//! Reconstruction training of the autoencoder with Adam.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, shape_err, Result};
use crate::loss::{total_loss_and_grad_with, LossBreakdown, SsimConfig};
use crate::network::{
    backward, decode_with_cache, encode_with_cache, init_params, DecoderParams, EncoderParams, NetworkGrads,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    lr: T,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return shape_err(format!(
            "Adam group sizes disagree: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::lit(cfg.beta1);
    let b2 = T::lit(cfg.beta2);
    let c1 = T::lit(1.0 - cfg.beta1.powi(t));
    let c2 = T::lit(1.0 - cfg.beta2.powi(t));
    let eps = T::lit(cfg.epsilon);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda: f32,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub patch_size: usize,
    pub adam: AdamConfig,
    pub ssim: SsimConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1.0,
            learning_rate: 1e-4,
            batch_size: 2,
            epochs: 4,
            seed: 0,
            patch_size: 64,
            adam: AdamConfig::default(),
            ssim: SsimConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 || !self.lambda.is_finite() {
            return arg_err(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return arg_err(format!("learning rate must be nonnegative, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.patch_size == 0 {
            return arg_err("batch size, epochs and patch size must be positive");
        }
        Ok(())
    }

    /// Optimizer steps for a dataset of `n` patches.
    pub fn steps_for(&self, n: usize) -> usize {
        self.epochs * n.div_ceil(self.batch_size)
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub history: Vec<LossBreakdown>,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
    pub wall_seconds: f64,
}

/// Optimizer state for every parameter group of the autoencoder.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: AdamConfig,
    lr: f32,
    // weights and bias per layer, in layer-table order
    groups: Vec<(AdamState, AdamState)>,
}

impl Optimizer {
    pub fn new(enc: &EncoderParams, dec: &DecoderParams, lr: f32, cfg: AdamConfig) -> Self {
        let groups = enc
            .layers()
            .into_iter()
            .chain(dec.layers())
            .map(|l| (AdamState::new(l.weights().len()), AdamState::new(l.bias().len())))
            .collect();
        Optimizer { cfg, lr, groups }
    }

    pub fn step(&mut self, enc: &mut EncoderParams, dec: &mut DecoderParams, grads: &NetworkGrads) -> Result<()> {
        let [a, b, c, d] = enc.layers_mut();
        let [e, f, g, h] = dec.layers_mut();
        for ((layer, lg), (ws, bs)) in [a, b, c, d, e, f, g, h]
            .into_iter()
            .zip(&grads.layers)
            .zip(&mut self.groups)
        {
            adam_step(layer.weights_mut(), &lg.weights, ws, self.lr, &self.cfg)?;
            adam_step(layer.bias_mut(), &lg.bias, bs, self.lr, &self.cfg)?;
        }
        Ok(())
    }
}

/// Loss and parameter gradients for one batch (mean over the batch).
pub fn batch_gradients(
    enc: &EncoderParams,
    dec: &DecoderParams,
    batch: &Tensor,
    lambda: f32,
    ssim: &SsimConfig,
) -> Result<(LossBreakdown, NetworkGrads)> {
    let (features, enc_cache) = encode_with_cache(batch, enc)?;
    let (output, dec_cache) = decode_with_cache(features.tensor(), dec)?;
    let (loss, grad_out) = total_loss_and_grad_with(&output, batch, lambda, ssim)?;
    let mut grads = NetworkGrads::zeros(enc, dec);
    backward(enc, dec, &enc_cache, &dec_cache, &grad_out, &mut grads)?;
    Ok((loss, grads))
}

fn check_patches(patches: &[Tensor]) -> Result<()> {
    let Some(first) = patches.first() else {
        return arg_err("training needs at least one patch");
    };
    let base = first.shape();
    for p in patches {
        let s = p.shape();
        if s.n != 1 || s.c != 1 || (s.h, s.w) != (base.h, base.w) {
            return shape_err(format!("patches must be equal-sized 1x1xHxW, got {s} and {base}"));
        }
        if p.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return arg_err("patch pixels must lie in [0, 1]");
        }
    }
    Ok(())
}

pub fn train(config: &TrainConfig, patches: &[Tensor]) -> Result<TrainReport> {
    train_with_progress(config, patches, |_, _| {})
}

/// Trains from a seeded initialization; `progress` sees every step's loss.
///
/// Each epoch shuffles the patch order with the seeded generator and takes
/// consecutive slices of `batch_size` (the last one may be short).
pub fn train_with_progress(
    config: &TrainConfig,
    patches: &[Tensor],
    mut progress: impl FnMut(usize, &LossBreakdown),
) -> Result<TrainReport> {
    config.validate()?;
    check_patches(patches)?;
    let start = Instant::now();
    let (mut enc, mut dec) = init_params(config.seed);
    let mut opt = Optimizer::new(&enc, &dec, config.learning_rate, config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005e_ed0f_ba7c);
    let mut order: Vec<usize> = (0..patches.len()).collect();
    let mut history = Vec::with_capacity(config.steps_for(patches.len()));

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let parts: Vec<&Tensor> = chunk.iter().map(|&i| &patches[i]).collect();
            let batch = Tensor::stack(&parts)?;
            let (loss, grads) = batch_gradients(&enc, &dec, &batch, config.lambda, &config.ssim)?;
            if !loss.total.is_finite() {
                return Err(crate::Error::Numeric(format!(
                    "loss diverged at step {}",
                    history.len() + 1
                )));
            }
            opt.step(&mut enc, &mut dec, &grads)?;
            progress(history.len(), &loss);
            history.push(loss);
        }
    }

    Ok(TrainReport {
        history,
        encoder: enc,
        decoder: dec,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Loss history as CSV: `step,pixel,ssim,total` with 1-based steps.
pub fn write_loss_csv(w: &mut impl Write, history: &[LossBreakdown]) -> Result<()> {
    writeln!(w, "step,pixel,ssim,total")?;
    for (i, l) in history.iter().enumerate() {
        writeln!(w, "{},{},{},{}", i + 1, l.pixel, l.ssim, l.total)?;
    }
    Ok(())
}
