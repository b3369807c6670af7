//! Grayscale image loading and saving, resizing, and training-patch sampling.
//!
//! Binary PGM (P5, maxval 255) is read and written; 8-bit PNG is read only.
//! Color PNGs are converted with luma weights 0.299 / 0.587 / 0.114.

use std::fs;
use std::io::{self, Cursor, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, Error, Result};
use crate::metrics::quantize;
use crate::tensor::{Shape, Tensor};

const PNG_SIGNATURE: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

/// A named single-channel image with pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub pixels: Tensor,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, pixels: Tensor) -> Result<Self> {
        let s = pixels.shape();
        if s.n != 1 || s.c != 1 || s.h == 0 || s.w == 0 {
            return Err(Error::Shape(format!("image record must be 1x1xHxW, got {s}")));
        }
        if pixels.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return arg_err("image pixels must lie in [0, 1]");
        }
        Ok(ImageRecord { id: id.into(), pixels })
    }

    pub fn height(&self) -> usize {
        self.pixels.shape().h
    }

    pub fn width(&self) -> usize {
        self.pixels.shape().w
    }
}

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

fn truncated<T>(what: &str) -> Result<T> {
    Err(Error::Io(io::Error::new(
        io::ErrorKind::UnexpectedEof,
        format!("truncated {what}"),
    )))
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            if self.pos >= self.bytes.len() {
                return truncated("PGM header");
            }
            return format_err("expected a decimal number in PGM header");
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("PGM header number out of range".into()))
    }
}

/// Decodes a binary PGM into `[0, 1]` pixels.
pub fn decode_pgm(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 2 {
        return truncated("PGM header");
    }
    if &bytes[..2] != b"P5" {
        return format_err("not a binary PGM (P5)");
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = cur.number()?;
    if maxval != 255 {
        return format_err(format!("unsupported PGM maxval {maxval} (only 255)"));
    }
    if width == 0 || height == 0 {
        return format_err("PGM has zero width or height");
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => return format_err("missing whitespace after PGM maxval"),
        None => return truncated("PGM header"),
    }
    let count = width * height;
    let raster = &bytes[cur.pos..];
    if raster.len() < count {
        return truncated("PGM raster");
    }
    let pixels = raster[..count].iter().map(|&b| b as f32 / 255.0).collect();
    Tensor::image(height, width, pixels)
}

/// Encodes `[0, 1]` pixels as a binary PGM, `byte = floor(x·255 + 0.5)`.
pub fn encode_pgm(image: &Tensor) -> Result<Vec<u8>> {
    let s = image.shape();
    if s.n != 1 || s.c != 1 {
        return Err(Error::Shape(format!("PGM holds one gray plane, got {s}")));
    }
    let mut out = format!("P5\n{} {}\n255\n", s.w, s.h).into_bytes();
    out.extend(image.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

fn decode_png(bytes: &[u8]) -> Result<Tensor> {
    let png_err = |e: png::DecodingError| match e {
        png::DecodingError::IoError(io) => Error::Io(io),
        other => Error::Format(format!("PNG: {other}")),
    };
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("PNG too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    if frame.bit_depth != png::BitDepth::Eight {
        return format_err(format!("unsupported PNG bit depth {:?}", frame.bit_depth));
    }
    let channels = match frame.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return format_err(format!("unsupported PNG color type {other:?}")),
    };
    let (w, h) = (frame.width as usize, frame.height as usize);
    let mut pixels = Vec::with_capacity(w * h);
    for row in buf.chunks(frame.line_size).take(h) {
        for px in row[..w * channels].chunks_exact(channels) {
            let v = if channels >= 3 {
                (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64) / 255.0
            } else {
                px[0] as f64 / 255.0
            };
            pixels.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    Tensor::image(h, w, pixels)
}

/// Decodes PGM or PNG bytes, recognized by their signature.
pub fn decode_image(bytes: &[u8]) -> Result<Tensor> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.len() < 2 {
        truncated("image header")
    } else {
        format_err("unrecognized image format (expected binary PGM or PNG)")
    }
}

/// Loads a PGM or PNG file; the record id is the file stem.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRecord> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ImageRecord::new(id, decode_image(&bytes)?)
}

pub fn save_image(record: &ImageRecord, path: impl AsRef<Path>) -> Result<()> {
    save_pgm(&record.pixels, path)
}

pub fn save_pgm(image: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_pgm(image)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Bilinear resize with corner-aligned sampling.
pub fn resize_bilinear(record: &ImageRecord, new_h: usize, new_w: usize) -> Result<ImageRecord> {
    if new_h == 0 || new_w == 0 {
        return arg_err("resize target must be at least 1x1");
    }
    let (h, w) = (record.height(), record.width());
    if (h, w) == (new_h, new_w) {
        return Ok(record.clone());
    }
    let src = record.pixels.data();
    let scale = |from: usize, to: usize| {
        if to > 1 {
            (from - 1) as f64 / (to - 1) as f64
        } else {
            0.0
        }
    };
    let (sy, sx) = (scale(h, new_h), scale(w, new_w));
    let mut out = Vec::with_capacity(new_h * new_w);
    for y in 0..new_h {
        let fy = y as f64 * sy;
        let y0 = (fy.floor() as usize).min(h - 1);
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f64;
        for x in 0..new_w {
            let fx = x as f64 * sx;
            let x0 = (fx.floor() as usize).min(w - 1);
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f64;
            let p = |yy: usize, xx: usize| src[yy * w + xx] as f64;
            let top = p(y0, x0) * (1.0 - tx) + p(y0, x1) * tx;
            let bottom = p(y1, x0) * (1.0 - tx) + p(y1, x1) * tx;
            out.push((top * (1.0 - ty) + bottom * ty).clamp(0.0, 1.0) as f32);
        }
    }
    ImageRecord::new(record.id.clone(), Tensor::image(new_h, new_w, out)?)
}

/// Where a training patch was cropped from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchOrigin {
    pub record: usize,
    pub y: usize,
    pub x: usize,
}

/// Seeded crop positions: a uniformly chosen record, then a uniform offset inside it.
pub fn sample_patch_origins(
    records: &[ImageRecord],
    patch: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<PatchOrigin>> {
    if patch == 0 {
        return arg_err("patch size must be positive");
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if records.is_empty() {
        return arg_err("no images to sample patches from");
    }
    if let Some(r) = records.iter().find(|r| r.height() < patch || r.width() < patch) {
        return arg_err(format!(
            "patch size {patch} exceeds image {} ({}x{})",
            r.id,
            r.height(),
            r.width()
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let record = rng.random_range(0..records.len());
            let r = &records[record];
            let y = rng.random_range(0..=r.height() - patch);
            let x = rng.random_range(0..=r.width() - patch);
            PatchOrigin { record, y, x }
        })
        .collect())
}

pub fn crop(image: &Tensor, y: usize, x: usize, h: usize, w: usize) -> Tensor {
    Tensor::from_fn(Shape::new(1, 1, h, w), |_, _, yy, xx| image.get(0, 0, y + yy, x + xx))
}

/// `count` square patches cropped at seeded random positions.
pub fn make_patch_set(records: &[ImageRecord], patch: usize, count: usize, seed: u64) -> Result<Vec<Tensor>> {
    Ok(sample_patch_origins(records, patch, count, seed)?
        .into_iter()
        .map(|o| crop(&records[o.record].pixels, o.y, o.x, patch, patch))
        .collect())
}
