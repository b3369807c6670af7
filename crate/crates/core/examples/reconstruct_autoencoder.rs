//! Encodes an image, inspects the dense-block feature maps, and decodes it again.
//!
//! cargo run --example reconstruct_autoencoder -- [model.dfus] [image]

use densefuse::image_io::load_image;
use densefuse::loss::ssim;
use densefuse::model_file::load_model;
use densefuse::network::{decode, encode_with_cache, init_params};
use densefuse::synthetic::visible_scene;

fn main() -> densefuse::Result<()> {
    let mut args = std::env::args().skip(1);
    let (enc, dec) = match args.next() {
        Some(path) => load_model(path)?,
        None => init_params(0),
    };
    let image = match args.next() {
        Some(path) => load_image(path)?.pixels,
        None => visible_scene(64, 64, 1),
    };

    let (features, cache) = encode_with_cache(&image, &enc)?;
    println!("dense block inputs: {:?} channels", cache.dense_input_channels());
    let f = features.tensor();
    for (name, range) in [("c1", 0..16), ("dc1", 16..32), ("dc2", 32..48), ("dc3", 48..64)] {
        let active = range
            .clone()
            .flat_map(|c| f.plane(0, c).iter())
            .filter(|&&v| v > 0.0)
            .count();
        let total = range.len() * f.shape().plane();
        println!(
            "{name:>3} channels {range:?}: {:.1}% active",
            100.0 * active as f64 / total as f64
        );
    }
    let out = decode(&features, &dec)?;
    println!("reconstruction {} SSIM {:.4}", out.shape(), ssim(&out, &image)?);
    Ok(())
}
