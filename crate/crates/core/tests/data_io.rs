mod common;

use common::*;
use densefuse::image_io::{
    crop, decode_image, decode_pgm, encode_pgm, load_image, make_patch_set, resize_bilinear, sample_patch_origins,
    save_image, save_pgm, ImageRecord,
};
use densefuse::{Error, Shape, Tensor};
use proptest::prelude::*;

fn record(id: &str, h: usize, w: usize, seed: u64) -> ImageRecord {
    ImageRecord::new(id, random_tensor_f32(Shape::new(1, 1, h, w), 0.0, 1.0, seed)).unwrap()
}

#[test]
fn hand_written_pgm_decodes() {
    let mut bytes = b"P5 3 2 255\n".to_vec();
    bytes.extend([0u8, 51, 102, 153, 204, 255]);
    let t = decode_pgm(&bytes).unwrap();
    assert_eq!(t.shape(), Shape::new(1, 1, 2, 3));
    assert_eq!(t.data(), &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
    assert_eq!(decode_image(&bytes).unwrap(), t);
}

#[test]
fn pgm_errors() {
    assert!(matches!(decode_pgm(b"P2 1 1 255\n0"), Err(Error::Format(_))));
    assert!(matches!(decode_pgm(b"P5 1 1 65535\n\0\0"), Err(Error::Format(_))));
    assert!(matches!(decode_pgm(b"P5 2 2 255\n\0\0"), Err(Error::Io(_))));
    assert!(decode_image(b"GIF89a").is_err());
}

#[test]
fn save_load_roundtrip_within_half_level() {
    let dir = tempfile::tempdir().unwrap();
    let rec = record("scene", 13, 9, 1);
    let path = dir.path().join("scene.pgm");
    save_image(&rec, &path).unwrap();
    let back = load_image(&path).unwrap();
    assert_eq!(back.id, "scene");
    assert!(back.pixels.max_abs_diff(&rec.pixels).unwrap() <= 1.0 / 510.0 + 1e-7);
    let again = dir.path().join("again.pgm");
    save_image(&back, &again).unwrap();
    assert_eq!(load_image(&again).unwrap().pixels, back.pixels);
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn png_grayscale_and_rgb_decode() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.png");
    {
        let file = std::fs::File::create(&path).unwrap();
        let mut enc = png::Encoder::new(std::io::BufWriter::new(file), 2, 1);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header().unwrap().write_image_data(&[0, 255]).unwrap();
    }
    let rec = load_image(&path).unwrap();
    assert_eq!(rec.pixels.data(), &[0.0, 1.0]);
    let rgb = dir.path().join("c.png");
    {
        let file = std::fs::File::create(&rgb).unwrap();
        let mut enc = png::Encoder::new(std::io::BufWriter::new(file), 1, 1);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header().unwrap().write_image_data(&[255, 255, 255]).unwrap();
    }
    assert!((load_image(&rgb).unwrap().pixels.data()[0] - 1.0).abs() < 1e-6);
}

#[test]
fn bilinear_checkerboard_2x2_to_3x3() {
    let rec = ImageRecord::new("c", Tensor::image(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
    let out = resize_bilinear(&rec, 3, 3).unwrap();
    assert_eq!(out.pixels.data(), &[0.0, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.0]);
}

#[test]
fn resize_same_size_is_identity() {
    let rec = record("r", 5, 6, 2);
    assert_eq!(resize_bilinear(&rec, 5, 6).unwrap(), rec);
    assert!(resize_bilinear(&rec, 0, 6).is_err());
}

#[test]
fn patches_are_verbatim_sub_windows() {
    let records = vec![record("a", 20, 17, 3), record("b", 9, 30, 4)];
    let origins = sample_patch_origins(&records, 8, 25, 7).unwrap();
    let patches = make_patch_set(&records, 8, 25, 7).unwrap();
    assert_eq!(patches.len(), 25);
    for (o, p) in origins.iter().zip(&patches) {
        let src = &records[o.record].pixels;
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(p.get(0, 0, y, x), src.get(0, 0, o.y + y, o.x + x));
            }
        }
    }
    assert_eq!(make_patch_set(&records, 8, 25, 7).unwrap(), patches);
    assert_ne!(make_patch_set(&records, 8, 25, 8).unwrap(), patches);
    assert!(make_patch_set(&records, 8, 0, 7).unwrap().is_empty());
    assert!(matches!(make_patch_set(&records, 10, 3, 7), Err(Error::Argument(_))));
}

#[test]
fn crop_of_whole_image_is_identity() {
    let rec = record("w", 4, 5, 5);
    assert_eq!(crop(&rec.pixels, 0, 0, 4, 5), rec.pixels);
}

#[test]
fn out_of_range_pixels_rejected() {
    let bad = Tensor::image(1, 2, vec![0.5, 1.5]).unwrap();
    assert!(ImageRecord::new("x", bad.clone()).is_err());
    let dir = tempfile::tempdir().unwrap();
    assert!(save_pgm(&bad, dir.path().join("x.pgm")).is_err() || encode_pgm(&bad).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pgm_encode_decode_is_idempotent(seed in any::<u64>(), h in 1usize..12, w in 1usize..12) {
        let t = random_tensor_f32(Shape::new(1, 1, h, w), 0.0, 1.0, seed);
        let once = decode_pgm(&encode_pgm(&t).unwrap()).unwrap();
        prop_assert!(once.max_abs_diff(&t).unwrap() <= 1.0 / 510.0 + 1e-7);
        let twice = decode_pgm(&encode_pgm(&once).unwrap()).unwrap();
        prop_assert_eq!(twice, once);
    }
}
