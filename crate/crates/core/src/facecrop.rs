//! Facial-component patches and face parsing maps.

use std::path::Path;

use image::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::imgcore::ImageTensor;
use crate::{Error, Result};

/// Axis-aligned rectangle in normalized image coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl NormRect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let r = Self { x0, y0, x1, y1 };
        r.validate()?;
        Ok(r)
    }

    pub const FULL: NormRect = NormRect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if [self.x0, self.y0, self.x1, self.y1].iter().all(|&v| unit(v)) && self.x0 < self.x1 && self.y0 < self.y1 {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid normalized rectangle {self:?}")))
        }
    }

    /// Half-open pixel box `(x0, y0, x1, y1)` with every coordinate floored.
    pub fn pixel_box(&self, height: usize, width: usize) -> Result<(usize, usize, usize, usize)> {
        self.validate()?;
        let fx = |v: f64| ((v * width as f64).floor() as usize).min(width);
        let fy = |v: f64| ((v * height as f64).floor() as usize).min(height);
        let b = (fx(self.x0), fy(self.y0), fx(self.x1), fy(self.y1));
        if b.0 >= b.2 || b.1 >= b.3 {
            return Err(Error::invalid(format!("{self:?} maps to an empty box on {height}x{width}")));
        }
        Ok(b)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Crop regions of the three local discriminators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropBoxes {
    pub eye: NormRect,
    pub nose: NormRect,
    pub lip: NormRect,
}

impl Default for CropBoxes {
    fn default() -> Self {
        default_boxes()
    }
}

impl CropBoxes {
    pub fn validate(&self) -> Result<()> {
        self.eye.validate()?;
        self.nose.validate()?;
        self.lip.validate()
    }
}

/// Average component boxes for aligned 128×128 faces.
pub fn default_boxes() -> CropBoxes {
    CropBoxes {
        eye: NormRect { x0: 0.15, y0: 0.30, x1: 0.85, y1: 0.50 },
        nose: NormRect { x0: 0.35, y0: 0.45, x1: 0.65, y1: 0.70 },
        lip: NormRect { x0: 0.30, y0: 0.68, x1: 0.70, y1: 0.85 },
    }
}

/// Sub-image covering `r` mapped onto the image grid.
pub fn crop_region(img: &ImageTensor, r: &NormRect) -> Result<ImageTensor> {
    let (h, w, c) = img.dims();
    let (x0, y0, x1, y1) = r.pixel_box(h, w)?;
    ImageTensor::from_fn(y1 - y0, x1 - x0, c, |y, x, ch| img.get(y0 + y, x0 + x, ch))
}

/// Face parsing classes. The discriminant is the value stored in parsing PNGs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum FaceClass {
    Background = 0,
    Skin = 1,
    Eye = 2,
    Nose = 3,
    Lip = 4,
    Hair = 5,
}

impl FaceClass {
    pub const ALL: [FaceClass; 6] =
        [FaceClass::Background, FaceClass::Skin, FaceClass::Eye, FaceClass::Nose, FaceClass::Lip, FaceClass::Hair];

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }
}

/// Per-pixel face parsing labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedMap {
    height: usize,
    width: usize,
    labels: Vec<FaceClass>,
}

impl ParsedMap {
    pub fn new(height: usize, width: usize, labels: Vec<FaceClass>) -> Result<Self> {
        if height == 0 || width == 0 || labels.len() != height * width {
            return Err(Error::invalid(format!("{} labels cannot form a {height}x{width} map", labels.len())));
        }
        Ok(Self { height, width, labels })
    }

    pub fn filled(height: usize, width: usize, class: FaceClass) -> Result<Self> {
        Self::new(height, width, vec![class; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[FaceClass] {
        &self.labels
    }

    pub fn get(&self, y: usize, x: usize) -> FaceClass {
        self.labels[y * self.width + x]
    }

    /// Pixel count per class, indexed by class value.
    pub fn histogram(&self) -> [usize; 6] {
        let mut h = [0; 6];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    /// Label map as a 6-channel one-hot tensor.
    pub fn one_hot(&self) -> ImageTensor {
        ImageTensor::from_fn(self.height, self.width, 6, |y, x, c| if self.get(y, x) as usize == c { 1.0 } else { 0.0 })
            .expect("non-empty map")
    }

    /// 8-bit gray image holding the class values.
    pub fn to_gray(&self) -> GrayImage {
        let raw = self.labels.iter().map(|&l| l as u8).collect();
        GrayImage::from_raw(self.width as u32, self.height as u32, raw).expect("buffer size matches")
    }

    pub fn from_gray(img: &GrayImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        let labels = img
            .as_raw()
            .iter()
            .map(|&v| FaceClass::from_u8(v).ok_or_else(|| Error::invalid(format!("unknown parsing label {v}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(h as usize, w as usize, labels)
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image { path: path.to_owned(), source })?;
        Self::from_gray(&img.to_luma8())
    }
}

/// Nearest-neighbour label subsampling by an integer factor.
///
/// Output pixel `(y, x)` takes the label at `(y·s + s/2, x·s + s/2)`.
pub fn downsample_parsing(map: &ParsedMap, s: usize) -> Result<ParsedMap> {
    if s == 0 {
        return Err(Error::invalid("scale must be at least 1"));
    }
    if !map.height.is_multiple_of(s) || !map.width.is_multiple_of(s) {
        return Err(Error::invalid(format!("{}x{} is not divisible by {s}", map.height, map.width)));
    }
    let (oh, ow) = (map.height / s, map.width / s);
    let labels = (0..oh)
        .flat_map(|y| (0..ow).map(move |x| (y, x)))
        .map(|(y, x)| map.get(y * s + s / 2, x * s + s / 2))
        .collect();
    ParsedMap::new(oh, ow, labels)
}

/// Default positional jitter of [`synth_face_mask`], as a fraction of the
/// image size.
pub const FACE_MASK_JITTER: f64 = 0.02;

/// Geometric stand-in for a parsed face: hair, a skin ellipse, two eye
/// ellipses, a nose triangle, and a lip ellipse, each shifted by a seeded
/// offset of at most [`FACE_MASK_JITTER`].
pub fn synth_face_mask(h: usize, w: usize, seed: u64) -> Result<ParsedMap> {
    synth_face_mask_with_jitter(h, w, seed, FACE_MASK_JITTER)
}

/// [`synth_face_mask`] with an explicit jitter amplitude (0 disables it).
pub fn synth_face_mask_with_jitter(h: usize, w: usize, seed: u64, jitter: f64) -> Result<ParsedMap> {
    if h < 16 || w < 16 {
        return Err(Error::invalid(format!("face masks need at least 16x16, got {h}x{w}")));
    }
    if !(0.0..=0.05).contains(&jitter) {
        return Err(Error::invalid(format!("jitter {jitter} outside [0, 0.05]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offset = || -> (f64, f64) {
        if jitter == 0.0 {
            (0.0, 0.0)
        } else {
            (rng.random_range(-jitter..=jitter), rng.random_range(-jitter..=jitter))
        }
    };
    let face = offset();
    let left_eye = offset();
    let right_eye = offset();
    let nose = offset();
    let lip = offset();

    let ellipse = |px: f64, py: f64, cx: f64, cy: f64, rx: f64, ry: f64| {
        let (dx, dy) = ((px - cx) / rx, (py - cy) / ry);
        dx * dx + dy * dy <= 1.0
    };
    // Nose: apex at the top, base at the bottom.
    let triangle = |px: f64, py: f64, (ox, oy): (f64, f64)| {
        let (top, bottom, half) = (0.48 + oy, 0.64 + oy, 0.07);
        if py < top || py > bottom {
            return false;
        }
        let frac = (py - top) / (bottom - top);
        (px - (0.5 + ox)).abs() <= half * frac
    };

    let mut labels = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let px = (x as f64 + 0.5) / w as f64;
            let py = (y as f64 + 0.5) / h as f64;
            let (fx, fy) = face;
            let mut class = FaceClass::Background;
            if py < 0.5 + fy && ellipse(px, py, 0.5 + fx, 0.45 + fy, 0.44, 0.42) {
                class = FaceClass::Hair;
            }
            if ellipse(px, py, 0.5 + fx, 0.56 + fy, 0.34, 0.40) {
                class = FaceClass::Skin;
            }
            if ellipse(px, py, 0.35 + left_eye.0, 0.40 + left_eye.1, 0.08, 0.035)
                || ellipse(px, py, 0.65 + right_eye.0, 0.40 + right_eye.1, 0.08, 0.035)
            {
                class = FaceClass::Eye;
            }
            if triangle(px, py, nose) {
                class = FaceClass::Nose;
            }
            if ellipse(px, py, 0.5 + lip.0, 0.765 + lip.1, 0.12, 0.035) {
                class = FaceClass::Lip;
            }
            labels.push(class);
        }
    }
    ParsedMap::new(h, w, labels)
}
