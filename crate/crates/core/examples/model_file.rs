//! Writes a freshly initialized model, reads it back and lists its layers.
//!
//! cargo run --example model_file -- [path] [seed]

use densefuse::model_file::{load_model, save_model};
use densefuse::network::init_params;

fn main() -> densefuse::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "init.dfus".into());
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let (enc, dec) = init_params(seed);
    save_model(&enc, &dec, &path)?;
    let (enc2, dec2) = load_model(&path)?;
    assert!(enc == enc2 && dec == dec2);
    let bytes = std::fs::metadata(&path)?.len();
    println!("{path}: {bytes} bytes, roundtrip exact");
    for layer in enc2.layers().into_iter().chain(dec2.layers()) {
        let rms = (layer.weights().iter().map(|w| w * w).sum::<f32>() / layer.weights().len() as f32).sqrt();
        println!(
            "{:>3} -> {:>2}  relu {:5}  weight rms {rms:.4}",
            layer.c_in(),
            layer.c_out(),
            layer.apply_relu()
        );
    }
    Ok(())
}
