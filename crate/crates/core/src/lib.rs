//! Dense-block convolutional autoencoder for infrared/visible image fusion.
//!
//! The encoder is a 3×3 convolution followed by a three-layer dense block whose
//! outputs are concatenated into 64 feature maps. At test time both source
//! images go through the same encoder, their feature maps are merged by one of
//! two [`fusion`] strategies, and the decoder turns the result into the fused
//! image. Training reconstructs single images under `λ·(1 − SSIM) + MSE`, with
//! gradients derived by hand for every layer.
//!
//! ```no_run
//! use densefuse::{fusion::Strategy, image_io, model_file, pipeline};
//!
//! let (enc, dec) = model_file::load_model("model.dfus")?;
//! let ir = image_io::load_image("ir.pgm")?;
//! let vis = image_io::load_image("vis.pgm")?;
//! let fused = pipeline::fuse_images(&ir.pixels, &vis.pixels, &enc, &dec, Strategy::L1Norm)?;
//! image_io::save_pgm(&fused, "fused.pgm")?;
//! # Ok::<(), densefuse::Error>(())
//! ```

pub mod cli;
pub mod conv;
mod error;
pub mod fusion;
pub mod image_io;
pub mod loss;
pub mod metrics;
pub mod model_file;
pub mod network;
pub mod pipeline;
mod scalar;
pub mod synthetic;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Shape, Tensor};
