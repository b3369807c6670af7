//! Converts a PGM or PNG image to PGM, optionally resizing it, and prints
//! a few seeded training patch positions.
//!
//! cargo run --example image_io -- input.png output.pgm [height width]

use densefuse::image_io::{load_image, resize_bilinear, sample_patch_origins, save_image};

fn main() -> densefuse::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() != 2 && args.len() != 4 {
        eprintln!("usage: image_io <input> <output.pgm> [height width]");
        std::process::exit(2);
    }
    let mut record = load_image(&args[0])?;
    println!("{}: {}x{}", record.id, record.height(), record.width());
    if let [_, _, h, w] = args.as_slice() {
        let (h, w) = (h.parse().expect("height"), w.parse().expect("width"));
        record = resize_bilinear(&record, h, w)?;
        println!("resized to {h}x{w}");
    }
    save_image(&record, &args[1])?;
    let patch = 16.min(record.height()).min(record.width());
    for o in sample_patch_origins(std::slice::from_ref(&record), patch, 4, 0)? {
        println!("patch {patch}x{patch} at y={} x={}", o.y, o.x);
    }
    Ok(())
}
