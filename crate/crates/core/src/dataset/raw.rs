//! Raw little-endian `f32` raster dumps.
//!
//! Layout: 4-byte magic `RSF4`, then height, width, and channels as
//! little-endian `u32`, then `h·w·c` little-endian `f32` values in row-major
//! interleaved order.

use std::path::Path;

use crate::imgcore::ImageTensor;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"RSF4";
pub const HEADER_LEN: usize = 16;

pub fn encode(img: &ImageTensor) -> Vec<u8> {
    let (h, w, c) = img.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * h * w * c);
    out.extend_from_slice(&MAGIC);
    for d in [h, w, c] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in img.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<ImageTensor> {
    let corrupt = |message: &str| Error::Corrupt { path: path.to_owned(), message: message.to_owned() };
    if bytes.len() < HEADER_LEN || bytes[..4] != MAGIC {
        return Err(corrupt("missing raw float header"));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * h * w * c {
        return Err(corrupt("payload length does not match header"));
    }
    let data = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64).collect();
    ImageTensor::new(h, w, c, data).map_err(|e| corrupt(&e.to_string()))
}

pub fn read(path: &Path) -> Result<ImageTensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
