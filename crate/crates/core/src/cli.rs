//! `densefuse train | fuse | eval`.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::{OsStr, OsString};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fusion::Strategy;
use crate::image_io::{load_image, make_patch_set, save_pgm, ImageRecord};
use crate::metrics::{write_report, MetricRow};
use crate::model_file::{load_model, save_model};
use crate::pipeline::fuse_images;
use crate::trainer::{train_with_progress, write_loss_csv, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "densefuse",
    version,
    about = "Infrared/visible image fusion with a dense-block autoencoder"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the autoencoder to reconstruct patches from a directory of images.
    Train(TrainArgs),
    /// Fuse an infrared and a visible image with a trained model.
    Fuse(FuseArgs),
    /// Compute En, SSIM_a and SCD for fused images against their sources.
    Eval(EvalArgs),
}

fn positive_f32(s: &str) -> std::result::Result<f32, String> {
    match s.parse::<f32>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn nonnegative_f32(s: &str) -> std::result::Result<f32, String> {
    match s.parse::<f32>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be nonnegative, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_usize(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Directory of PGM/PNG training images.
    #[arg(long)]
    data: PathBuf,
    /// Model file to write; the loss history goes to `<out>.loss.csv`.
    #[arg(long)]
    out: PathBuf,
    /// SSIM loss weight.
    #[arg(long, default_value = "1", value_parser = positive_f32)]
    lambda: f32,
    #[arg(long, default_value = "1e-4", value_parser = nonnegative_f32)]
    lr: f32,
    #[arg(long, default_value = "2", value_parser = positive_usize)]
    batch: usize,
    #[arg(long, default_value = "4", value_parser = positive_usize)]
    epochs: usize,
    #[arg(long, default_value = "0")]
    seed: u64,
    #[arg(long, default_value = "64", value_parser = positive_usize)]
    patch_size: usize,
    #[arg(long, default_value = "64", value_parser = positive_usize)]
    patch_count: usize,
}

#[derive(Debug, Args)]
struct FuseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    ir: PathBuf,
    #[arg(long)]
    vis: PathBuf,
    /// `addition` or `l1`.
    #[arg(long, value_parser = parse_strategy)]
    strategy: Strategy,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    fused: PathBuf,
    #[arg(long)]
    ir: PathBuf,
    #[arg(long)]
    vis: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Value for the report's strategy column.
    #[arg(long, default_value = "")]
    strategy: String,
    /// Value for the report's lambda column.
    #[arg(long, default_value = "")]
    tag: String,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Fuse(a) => cmd_fuse(&a),
        Command::Eval(a) => cmd_eval(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn is_image_ext(path: &Path) -> Option<&'static str> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "pgm" => Some("pgm"),
        "png" => Some("png"),
        _ => None,
    }
}

/// Image files in `dir` keyed by file stem; a PGM wins over a PNG with the same stem.
fn images_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut map: BTreeMap<String, (PathBuf, &'static str)> = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let (Some(ext), Some(stem)) = (is_image_ext(&path), path.file_stem()) else {
            continue;
        };
        let stem = stem.to_string_lossy().into_owned();
        match map.get(&stem) {
            Some((_, "pgm")) => {}
            _ => {
                map.insert(stem, (path, ext));
            }
        }
    }
    Ok(map.into_iter().map(|(k, (p, _))| (k, p)).collect())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(OsStr::new(suffix));
    PathBuf::from(s)
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let files = images_by_stem(&args.data)?;
    if files.is_empty() {
        return Err(Error::Argument(format!(
            "no PGM or PNG images in {}",
            args.data.display()
        )));
    }
    let records: Vec<ImageRecord> = files.values().map(load_image).collect::<Result<_>>()?;
    let patches = make_patch_set(&records, args.patch_size, args.patch_count, args.seed)?;
    let config = TrainConfig {
        lambda: args.lambda,
        learning_rate: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        seed: args.seed,
        patch_size: args.patch_size,
        ..TrainConfig::default()
    };
    let total = config.steps_for(patches.len());
    let report_every = (total / 10).max(1);
    let report = train_with_progress(&config, &patches, |step, loss| {
        if (step + 1) % report_every == 0 || step + 1 == total {
            eprintln!(
                "step {}/{total}: total {:.6} pixel {:.6} ssim {:.6}",
                step + 1,
                loss.total,
                loss.pixel,
                loss.ssim
            );
        }
    })?;

    save_model(&report.encoder, &report.decoder, &args.out)?;
    let loss_path = with_suffix(&args.out, ".loss.csv");
    let mut w = BufWriter::new(fs::File::create(&loss_path)?);
    write_loss_csv(&mut w, &report.history)?;
    w.flush()?;
    println!(
        "trained {} steps on {} patches in {:.1}s; model {}, loss history {}",
        report.history.len(),
        patches.len(),
        report.wall_seconds,
        args.out.display(),
        loss_path.display()
    );
    Ok(())
}

fn cmd_fuse(args: &FuseArgs) -> Result<()> {
    let (enc, dec) = load_model(&args.model)?;
    let ir = load_image(&args.ir)?;
    let vis = load_image(&args.vis)?;
    if (ir.height(), ir.width()) != (vis.height(), vis.width()) {
        return Err(Error::Shape(format!(
            "infrared image is {}x{} but visible image is {}x{}",
            ir.height(),
            ir.width(),
            vis.height(),
            vis.width()
        )));
    }
    let fused = fuse_images(&ir.pixels, &vis.pixels, &enc, &dec, args.strategy)?;
    // Write beside the target and rename so a failure never leaves a partial file.
    let partial = with_suffix(&args.out, ".partial");
    if let Err(e) = save_pgm(&fused, &partial).and_then(|_| Ok(fs::rename(&partial, &args.out)?)) {
        let _ = fs::remove_file(&partial);
        return Err(e);
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let fused = images_by_stem(&args.fused)?;
    let ir = images_by_stem(&args.ir)?;
    let vis = images_by_stem(&args.vis)?;
    let mut rows = Vec::new();
    for (stem, fused_path) in &fused {
        let (Some(ir_path), Some(vis_path)) = (ir.get(stem), vis.get(stem)) else {
            eprintln!("warning: skipping {stem}: no matching infrared and visible source");
            continue;
        };
        let f = load_image(fused_path)?;
        let a = load_image(ir_path)?;
        let b = load_image(vis_path)?;
        rows.push(MetricRow::compute(
            stem.clone(),
            args.strategy.clone(),
            args.tag.clone(),
            &f.pixels,
            &a.pixels,
            &b.pixels,
        )?);
    }
    for stem in ir.keys().chain(vis.keys()) {
        if !fused.contains_key(stem) {
            eprintln!("warning: source {stem} has no fused image");
        }
    }
    if rows.is_empty() {
        return Err(Error::Argument("no fused image matched both source directories".into()));
    }
    let mut w = BufWriter::new(fs::File::create(&args.out)?);
    write_report(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}
