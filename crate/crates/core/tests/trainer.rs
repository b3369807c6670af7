use densefuse::network::init_params;
use densefuse::synthetic::smooth_patch;
use densefuse::trainer::{adam_step, batch_gradients, train, AdamConfig, AdamState, Optimizer, TrainConfig};
use densefuse::Tensor;

/// Textbook Adam on scalars, one parameter at a time.
fn adam_oracle(p: f64, grads: &[f64], lr: f64) -> f64 {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut m, mut v, mut p) = (0.0, 0.0, p);
    for (t, &g) in grads.iter().enumerate() {
        let t = (t + 1) as i32;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powi(t));
        let vh = v / (1.0 - b2.powi(t));
        p -= lr * mh / (vh.sqrt() + eps);
    }
    p
}

#[test]
fn adam_matches_scalar_oracle() {
    let start = [0.5f64, -1.0, 2.0];
    let seq = [[0.3, -0.2, 0.0], [0.1, 0.4, -1.5], [-0.7, 0.05, 2.0]];
    let mut p = start.to_vec();
    let mut st = AdamState::new(3);
    for g in &seq {
        adam_step(&mut p, g, &mut st, 0.01, &AdamConfig::default()).unwrap();
    }
    for i in 0..3 {
        let gs: Vec<f64> = seq.iter().map(|g| g[i]).collect();
        assert!((p[i] - adam_oracle(start[i], &gs, 0.01)).abs() < 1e-12);
    }
    assert_eq!(st.step, 3);
}

#[test]
fn first_adam_step_moves_by_lr_against_gradient_sign() {
    let mut p = vec![0.0f64; 3];
    let mut st = AdamState::new(3);
    adam_step(&mut p, &[2.0, -0.5, 1e-3], &mut st, 0.1, &AdamConfig::default()).unwrap();
    for (v, s) in p.iter().zip([-1.0, 1.0, -1.0]) {
        assert!((v - s * 0.1).abs() < 1e-5, "{v}");
    }
}

#[test]
fn adam_groups_are_independent() {
    let cfg = AdamConfig::default();
    let mut a = vec![1.0f64, 2.0];
    let mut b = vec![3.0f64];
    let (mut sa, mut sb) = (AdamState::new(2), AdamState::new(1));
    adam_step(&mut a, &[0.5, -0.5], &mut sa, 0.01, &cfg).unwrap();
    adam_step(&mut b, &[9.0], &mut sb, 0.01, &cfg).unwrap();
    let mut a_alone = vec![1.0f64, 2.0];
    let mut sa_alone = AdamState::new(2);
    adam_step(&mut a_alone, &[0.5, -0.5], &mut sa_alone, 0.01, &cfg).unwrap();
    assert_eq!(a, a_alone);
    assert_eq!(sa, sa_alone);
}

fn patches(n: u64) -> Vec<Tensor> {
    (0..n).map(|s| smooth_patch(16, 100 + s)).collect()
}

#[test]
fn training_is_bit_deterministic() {
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 2,
        patch_size: 16,
        seed: 9,
        ..TrainConfig::default()
    };
    let data = patches(3);
    let a = train(&cfg, &data).unwrap();
    let b = train(&cfg, &data).unwrap();
    assert_eq!(a.encoder, b.encoder);
    assert_eq!(a.decoder, b.decoder);
    assert_eq!(a.history, b.history);
    assert_eq!(a.history.len(), cfg.steps_for(3));
    let other = train(&TrainConfig { seed: 10, ..cfg }, &data).unwrap();
    assert_ne!(other.encoder, a.encoder);
}

#[test]
fn every_layer_moves_after_one_step() {
    let (enc0, dec0) = init_params(3);
    let (mut enc, mut dec) = (enc0.clone(), dec0.clone());
    let batch = smooth_patch(16, 4);
    let (loss, grads) = batch_gradients(&enc, &dec, &batch, 1.0, &Default::default()).unwrap();
    assert!(loss.total > 0.0);
    let mut opt = Optimizer::new(&enc, &dec, 1e-4, AdamConfig::default());
    opt.step(&mut enc, &mut dec, &grads).unwrap();
    let before = enc0.layers().into_iter().chain(dec0.layers());
    let after = enc.layers().into_iter().chain(dec.layers());
    for (b, a) in before.zip(after) {
        assert_ne!(b.weights(), a.weights());
    }
}

#[test]
fn windowed_minimum_loss_never_increases() {
    let cfg = TrainConfig {
        learning_rate: 1e-4,
        batch_size: 1,
        epochs: 300,
        seed: 2,
        patch_size: 16,
        ..TrainConfig::default()
    };
    let report = train(&cfg, &[smooth_patch(16, 11)]).unwrap();
    let mins: Vec<f32> = report
        .history
        .chunks(100)
        .map(|w| w.iter().map(|l| l.total).fold(f32::INFINITY, f32::min))
        .collect();
    assert!(mins.windows(2).all(|p| p[1] <= p[0]), "{mins:?}");
}

#[test]
fn bad_patches_rejected() {
    let cfg = TrainConfig {
        patch_size: 16,
        ..TrainConfig::default()
    };
    let mixed = vec![smooth_patch(16, 1), smooth_patch(12, 2)];
    assert!(train(&cfg, &mixed).is_err());
}
