//! Fractal image coding with recurrent iterated function systems whose
//! vertical contraction varies over each region.
//!
//! The pipeline is [`encoder::encode`] → [`bitstream::serialize`] →
//! [`bitstream::deserialize`] → [`decoder::decode`].

pub mod bitstream;
pub mod cli;
pub mod code;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod field;
pub mod grid;
pub mod image;
pub mod metrics;
pub mod pgm;
pub mod rifs;

pub use code::{CodecParams, CompressedImage, RegionCode};
pub use decoder::{decode, Decoded, Initial};
pub use encoder::{encode, EncoderConfig};
pub use error::{Error, Result};
pub use image::Image;
