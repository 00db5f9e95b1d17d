//! 8-bit PNG encoding and decoding of [`ImageTensor`]s.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use super::ImageTensor;
use crate::{Error, Result};

/// Quantizes a value in `[0, 1]` to 8 bits (values outside are clamped).
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Decodes any supported image file as 8-bit RGB scaled to `[0, 1]`.
pub fn load_rgb(path: &Path) -> Result<ImageTensor> {
    let img = image::open(path).map_err(|source| Error::Image { path: path.to_owned(), source })?;
    Ok(from_dynamic_rgb(&img))
}

/// Decodes an image file keeping one channel for grayscale inputs and three
/// otherwise.
pub fn load(path: &Path) -> Result<ImageTensor> {
    let img = image::open(path).map_err(|source| Error::Image { path: path.to_owned(), source })?;
    if img.color().has_color() {
        Ok(from_dynamic_rgb(&img))
    } else {
        let g = img.to_luma8();
        let (w, h) = g.dimensions();
        let data = g.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
        ImageTensor::new(h as usize, w as usize, 1, data)
    }
}

fn from_dynamic_rgb(img: &DynamicImage) -> ImageTensor {
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
    ImageTensor::from_parts(h as usize, w as usize, 3, data)
}

/// Converts to an 8-bit image: one channel becomes gray, three become RGB.
pub fn to_dynamic(img: &ImageTensor) -> Result<DynamicImage> {
    let (h, w, c) = img.dims();
    let bytes: Vec<u8> = img.as_slice().iter().map(|&v| quantize(v)).collect();
    match c {
        1 => Ok(DynamicImage::ImageLuma8(GrayImage::from_raw(w as u32, h as u32, bytes).expect("buffer size matches"))),
        3 => Ok(DynamicImage::ImageRgb8(RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer size matches"))),
        _ => Err(Error::invalid(format!("cannot encode {c}-channel image as PNG"))),
    }
}

/// Encodes as an 8-bit PNG in memory.
pub fn encode_png(img: &ImageTensor) -> Result<Vec<u8>> {
    encode_dynamic_png(&to_dynamic(img)?)
}

pub(crate) fn encode_dynamic_png(img: &DynamicImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).map_err(|source| Error::Image { path: "<memory>".into(), source })?;
    Ok(buf.into_inner())
}

pub fn save_png(img: &ImageTensor, path: &Path) -> Result<()> {
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
