//! Full-reference quality scores: PSNR and SSIM.

use serde::{Deserialize, Serialize};

use crate::imgcore::ImageTensor;
use crate::{losses, par, Error, Result};

/// Peak signal-to-noise ratio in dB, `10·log₁₀(peak² / MSE)`.
///
/// Identical images score `f64::INFINITY`.
pub fn psnr(a: &ImageTensor, b: &ImageTensor, peak: f64) -> Result<f64> {
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::invalid(format!("peak must be positive, got {peak}")));
    }
    let mse = losses::mse(a, b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// SSIM configuration. Defaults are the reference choice: 11×11 Gaussian
/// window with σ = 1.5, `K1 = 0.01`, `K2 = 0.03`, dynamic range 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03, dynamic_range: 1.0 }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::invalid(format!("SSIM window must be odd, got {}", self.window)));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.sigma) && positive(self.k1) && positive(self.k2) && positive(self.dynamic_range)) {
            return Err(Error::invalid(format!("SSIM parameters must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn window_1d(&self) -> Vec<f64> {
        let r = (self.window / 2) as isize;
        let raw: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * self.sigma * self.sigma)).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }
}

/// Separable "valid" filtering of one channel: only windows fully inside
/// the image contribute.
fn filter_valid(src: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut horiz = vec![0.0; h * ow];
    par::for_each_row(&mut horiz, ow, |y, row| {
        let line = &src[y * w..(y + 1) * w];
        for (x, v) in row.iter_mut().enumerate() {
            *v = taps.iter().zip(&line[x..x + n]).map(|(t, p)| t * p).sum();
        }
    });
    let mut out = vec![0.0; oh * ow];
    par::for_each_row(&mut out, ow, |y, row| {
        for (x, v) in row.iter_mut().enumerate() {
            *v = taps.iter().enumerate().map(|(k, t)| t * horiz[(y + k) * ow + x]).sum();
        }
    });
    out
}

fn ssim_channel(a: &[f64], b: &[f64], h: usize, w: usize, p: &SsimParams) -> f64 {
    let taps = p.window_1d();
    let (c1, c2) = (p.c1(), p.c2());
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(u, v)| u * v).collect() };
    let mu_a = filter_valid(a, h, w, &taps);
    let mu_b = filter_valid(b, h, w, &taps);
    let aa = filter_valid(&prod(a, a), h, w, &taps);
    let bb = filter_valid(&prod(b, b), h, w, &taps);
    let ab = filter_valid(&prod(a, b), h, w, &taps);
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    total / n as f64
}

/// Mean structural similarity.
///
/// Local statistics use a Gaussian window over every position where the
/// window fits entirely inside the image; multi-channel images are scored
/// per channel and averaged.
pub fn ssim(a: &ImageTensor, b: &ImageTensor, p: &SsimParams) -> Result<f64> {
    p.validate()?;
    a.ensure_same_dims(b)?;
    let (h, w, c) = a.dims();
    if h < p.window || w < p.window {
        return Err(Error::invalid(format!("image {h}x{w} is smaller than the {0}x{0} SSIM window", p.window)));
    }
    let mut sum = 0.0;
    for ch in 0..c {
        let (ca, cb) = (a.channel(ch)?, b.channel(ch)?);
        sum += ssim_channel(ca.as_slice(), cb.as_slice(), h, w, p);
    }
    Ok(sum / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_cases() {
        let zero = ImageTensor::zeros(8, 8, 3).unwrap();
        let tenth = ImageTensor::filled(8, 8, 3, 0.1).unwrap();
        assert_eq!(psnr(&zero, &zero, 1.0).unwrap(), f64::INFINITY);
        assert!((psnr(&zero, &tenth, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&zero, &tenth, 1.0).unwrap(), psnr(&tenth, &zero, 1.0).unwrap());
        assert!(psnr(&zero, &tenth, 0.0).is_err());
    }

    #[test]
    fn ssim_identity_and_constants() {
        let p = SsimParams::default();
        let x = ImageTensor::from_fn(16, 16, 3, |y, x, c| ((y * 5 + x * 3 + c) % 13) as f64 / 12.0).unwrap();
        assert!((ssim(&x, &x, &p).unwrap() - 1.0).abs() <= 1e-12);
        let zero = ImageTensor::zeros(12, 12, 1).unwrap();
        let one = ImageTensor::filled(12, 12, 1, 1.0).unwrap();
        let c1 = p.c1();
        assert!((ssim(&zero, &one, &p).unwrap() - c1 / (1.0 + c1)).abs() < 1e-9);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let x = ImageTensor::zeros(10, 16, 1).unwrap();
        assert!(ssim(&x, &x, &SsimParams::default()).is_err());
    }

    #[test]
    fn window_is_normalized() {
        let w = SsimParams::default().window_1d();
        assert_eq!(w.len(), 11);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(SsimParams { window: 10, ..Default::default() }.validate().is_err());
    }
}
