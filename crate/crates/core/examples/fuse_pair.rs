//! Trains a small model on synthetic scenes, then fuses an infrared/visible
//! pair with both strategies and writes the results as PGM.
//!
//! cargo run --release --example fuse_pair -- [out_dir]

use std::path::PathBuf;

use densefuse::fusion::Strategy;
use densefuse::image_io::{make_patch_set, save_pgm, ImageRecord};
use densefuse::metrics::{entropy, scd, ssim_a};
use densefuse::pipeline::fuse_images;
use densefuse::synthetic::{infrared_scene, visible_scene};
use densefuse::trainer::{train, TrainConfig};

fn main() -> densefuse::Result<()> {
    let out_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fuse_pair_out".into()));
    std::fs::create_dir_all(&out_dir)?;

    let corpus: Vec<ImageRecord> = (0..4)
        .map(|k| {
            let img = if k % 2 == 0 {
                infrared_scene(48, 48, k)
            } else {
                visible_scene(48, 48, k)
            };
            ImageRecord::new(format!("scene{k}"), img)
        })
        .collect::<densefuse::Result<_>>()?;
    let patches = make_patch_set(&corpus, 16, 32, 0)?;
    let config = TrainConfig {
        patch_size: 16,
        epochs: 8,
        batch_size: 4,
        seed: 2,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let report = train(&config, &patches)?;
    println!(
        "trained {} steps, final loss {:.5}",
        report.history.len(),
        report.history.last().unwrap().total
    );

    let ir = infrared_scene(96, 128, 42);
    let vis = visible_scene(96, 128, 42);
    save_pgm(&ir, out_dir.join("ir.pgm"))?;
    save_pgm(&vis, out_dir.join("vis.pgm"))?;
    for strategy in [Strategy::Addition, Strategy::L1Norm] {
        let fused = fuse_images(&ir, &vis, &report.encoder, &report.decoder, strategy)?;
        let path = out_dir.join(format!("fused_{strategy}.pgm"));
        save_pgm(&fused, &path)?;
        println!(
            "{strategy:>8}: En {:.4}  SSIM_a {:.4}  SCD {:.4}  -> {}",
            entropy(&fused)?,
            ssim_a(&fused, &ir, &vis)?,
            scd(&fused, &ir, &vis)?,
            path.display()
        );
    }
    Ok(())
}
