use super::ImageTensor;
use crate::{par, Error, Result};

/// Square, odd-sized filter kernel stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2D {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel2D {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::invalid(format!("kernel size must be odd and positive, got {size}")));
        }
        if weights.len() != size * size {
            return Err(Error::invalid(format!(
                "kernel of size {size} needs {} weights, got {}",
                size * size,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("kernel weights must be finite"));
        }
        Ok(Self { size, weights })
    }

    /// The 1×1 identity kernel.
    pub fn identity() -> Self {
        Self { size: 1, weights: vec![1.0] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.size + col]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let n = self.size;
        let weights = (0..n * n).map(|i| self.at(i % n, i / n)).collect();
        Self { size: n, weights }
    }

    /// Divides every weight by the total mass. The total is accumulated in
    /// ascending order of value so that it does not depend on layout.
    pub(crate) fn normalized(mut self) -> Self {
        let mut sorted = self.weights.clone();
        sorted.sort_by(f64::total_cmp);
        let total: f64 = sorted.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
        self
    }
}

/// Normalized `(2·radius+1)²` Gaussian kernel.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Result<Kernel2D> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("gaussian sigma must be finite and positive, got {sigma}")));
    }
    if radius == 0 {
        return Err(Error::invalid("gaussian radius must be at least 1"));
    }
    let size = 2 * radius + 1;
    let r = radius as isize;
    let denom = 2.0 * sigma * sigma;
    let mut weights = Vec::with_capacity(size * size);
    for dy in -r..=r {
        for dx in -r..=r {
            weights.push((-((dx * dx + dy * dy) as f64) / denom).exp());
        }
    }
    Ok(Kernel2D { size, weights }.normalized())
}

/// 2-D convolution with replicate borders, applied to each channel
/// independently. Output has the input's dimensions.
pub fn convolve2d(img: &ImageTensor, kernel: &Kernel2D) -> ImageTensor {
    let (h, w, c) = img.dims();
    let n = kernel.size();
    let r = kernel.radius() as isize;
    let mut out = vec![0.0; h * w * c];
    par::for_each_row(&mut out, w * c, |y, row| {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for ky in 0..n {
                    let sy = y as isize + r - ky as isize;
                    for kx in 0..n {
                        let wgt = kernel.at(ky, kx);
                        if wgt != 0.0 {
                            let sx = x as isize + r - kx as isize;
                            acc += wgt * img.get_clamped(sy, sx, ch);
                        }
                    }
                }
                row[x * c + ch] = acc;
            }
        }
    });
    ImageTensor::from_parts(h, w, c, out)
}

/// Clamps every element into `[0, 1]`.
pub fn clamp01(img: &ImageTensor) -> ImageTensor {
    let (h, w, c) = img.dims();
    ImageTensor::from_parts(h, w, c, img.as_slice().iter().map(|v| v.clamp(0.0, 1.0)).collect())
}
