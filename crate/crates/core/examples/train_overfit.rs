//! Overfits the autoencoder to a single 16×16 patch and prints the loss curve.
//!
//! cargo run --release --example train_overfit -- [steps] [lambda] [seed]
//!
//! Some initialization seeds (1, 3, 6 among the first sixteen) settle on a
//! near-constant output at this learning rate instead of converging.

use densefuse::loss::ssim;
use densefuse::network::reconstruct;
use densefuse::synthetic::smooth_patch;
use densefuse::trainer::{train_with_progress, TrainConfig};

fn main() -> densefuse::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map_or(500, |s| s.parse().expect("steps"));
    let lambda: f32 = args.next().map_or(1.0, |s| s.parse().expect("lambda"));
    let seed: u64 = args.next().map_or(2, |s| s.parse().expect("seed"));

    let patch = smooth_patch(16, 11);
    let config = TrainConfig {
        lambda,
        learning_rate: 1e-4,
        batch_size: 1,
        epochs: steps,
        seed,
        patch_size: 16,
        ..TrainConfig::default()
    };
    let report = train_with_progress(&config, std::slice::from_ref(&patch), |step, loss| {
        if step % 50 == 0 {
            println!(
                "step {step:4}  total {:.5}  pixel {:.5}  1-ssim {:.5}",
                loss.total, loss.pixel, loss.ssim
            );
        }
    })?;
    let first = report.history.first().unwrap().total;
    let last = report.history.last().unwrap().total;
    let out = reconstruct(&patch, &report.encoder, &report.decoder)?;
    println!(
        "loss {first:.5} -> {last:.5} ({:.1}% reduction), reconstruction SSIM {:.4}, {:.1}s",
        100.0 * (1.0 - last / first),
        ssim(&out, &patch)?,
        report.wall_seconds
    );
    Ok(())
}
