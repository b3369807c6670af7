//! Test-time fusion: tied-weight encoding, fusion, decoding.

use crate::error::{shape_err, Result};
use crate::fusion::{fuse, Strategy};
use crate::network::{decode, encode, DecoderParams, EncoderParams};
use crate::tensor::Tensor;

/// Fuses two registered single-channel images of equal size.
///
/// Both images are encoded with the same `enc`; the output is clamped to `[0, 1]`.
pub fn fuse_images(
    ir: &Tensor,
    vis: &Tensor,
    enc: &EncoderParams,
    dec: &DecoderParams,
    strategy: Strategy,
) -> Result<Tensor> {
    if ir.shape() != vis.shape() {
        return shape_err(format!(
            "source images differ in size: {} vs {}",
            ir.shape(),
            vis.shape()
        ));
    }
    let phi1 = encode(ir, enc)?;
    let phi2 = encode(vis, enc)?;
    decode(&fuse(strategy, &phi1, &phi2)?, dec)
}
