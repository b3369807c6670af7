//! Binary model file, little-endian.
//!
//! ```text
//! "DFUS"  u32 version=1  u32 layer_count=8
//! per layer (c1, dc1, dc2, dc3, c2, c3, c4, c5):
//!   u32 name_len, name (UTF-8), u32 c_out, u32 c_in, u32 kh=3, u32 kw=3,
//!   u8 apply_relu, f32 weights[c_out·c_in·9], f32 bias[c_out]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::conv::{ConvLayer, KERNEL};
use crate::error::{Error, Result};
use crate::network::{DecoderParams, EncoderParams, LAYER_TABLE};

pub const MAGIC: &[u8; 4] = b"DFUS";
pub const VERSION: u32 = 1;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read, count: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn write_model(w: &mut impl Write, enc: &EncoderParams, dec: &DecoderParams) -> Result<()> {
    w.write_all(MAGIC)?;
    write_u32(w, VERSION)?;
    write_u32(w, LAYER_TABLE.len() as u32)?;
    let layers = enc.layers().into_iter().chain(dec.layers());
    for ((name, ..), layer) in LAYER_TABLE.iter().zip(layers) {
        write_u32(w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        write_u32(w, layer.c_out() as u32)?;
        write_u32(w, layer.c_in() as u32)?;
        write_u32(w, KERNEL as u32)?;
        write_u32(w, KERNEL as u32)?;
        w.write_all(&[u8::from(layer.apply_relu())])?;
        for v in layer.weights().iter().chain(layer.bias()) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_layer(r: &mut impl Read, index: usize) -> Result<ConvLayer> {
    let (name, c_in, c_out, relu) = LAYER_TABLE[index];
    let name_len = read_u32(r)? as usize;
    if name_len > 64 {
        return format_err(format!("layer {index}: implausible name length {name_len}"));
    }
    let mut name_bytes = vec![0u8; name_len];
    r.read_exact(&mut name_bytes)?;
    if name_bytes != name.as_bytes() {
        return format_err(format!(
            "layer {index}: expected name {name:?}, found {:?}",
            String::from_utf8_lossy(&name_bytes)
        ));
    }
    let got_out = read_u32(r)? as usize;
    let got_in = read_u32(r)? as usize;
    let kh = read_u32(r)? as usize;
    let kw = read_u32(r)? as usize;
    if (got_out, got_in) != (c_out, c_in) {
        return format_err(format!(
            "layer {name}: declared {got_in}->{got_out} channels, architecture requires {c_in}->{c_out}"
        ));
    }
    if (kh, kw) != (KERNEL, KERNEL) {
        return format_err(format!("layer {name}: kernel {kh}x{kw}, expected 3x3"));
    }
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let apply_relu = match flag[0] {
        0 => false,
        1 => true,
        other => return format_err(format!("layer {name}: invalid activation flag {other}")),
    };
    if apply_relu != relu {
        return format_err(format!("layer {name}: activation flag {apply_relu}, expected {relu}"));
    }
    let weights = read_f32s(r, c_out * c_in * KERNEL * KERNEL)?;
    let bias = read_f32s(r, c_out)?;
    ConvLayer::new(c_in, c_out, weights, bias, apply_relu)
}

pub fn read_model(r: &mut impl Read) -> Result<(EncoderParams, DecoderParams)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return format_err(format!("bad magic {magic:?}"));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return format_err(format!("unsupported version {version}"));
    }
    let count = read_u32(r)? as usize;
    if count != LAYER_TABLE.len() {
        return format_err(format!("expected {} layers, found {count}", LAYER_TABLE.len()));
    }
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        layers.push(read_layer(r, i)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return format_err("trailing bytes after last layer");
    }
    let mut it = layers.into_iter();
    let mut next = || it.next().unwrap();
    let enc = EncoderParams::new(next(), next(), next(), next())?;
    let dec = DecoderParams::new(next(), next(), next(), next())?;
    Ok((enc, dec))
}

pub fn save_model(enc: &EncoderParams, dec: &DecoderParams, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, enc, dec)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(EncoderParams, DecoderParams)> {
    read_model(&mut BufReader::new(File::open(path)?))
}
