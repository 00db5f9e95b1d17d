//! Reconstruction, perceptual, and adversarial objectives as pure functions.
//!
//! Adversarial terms take discriminator outputs as plain scores; the networks
//! that produce them live outside this crate.

use serde::{Deserialize, Serialize};

use crate::imgcore::{convolve2d, gaussian_kernel, ImageTensor, Kernel2D};
use crate::{Error, Result};

/// Weights of the combined objectives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    /// Perceptual weight in the heavy-rain removal objective.
    pub omega1: f64,
    /// Perceptual weight in the generator objective.
    pub gamma_p: f64,
    /// Global discriminator weight.
    pub gamma1: f64,
    /// Eye discriminator weight.
    pub gamma2: f64,
    /// Nose discriminator weight.
    pub gamma3: f64,
    /// Lip discriminator weight.
    pub gamma4: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { omega1: 0.1, gamma_p: 1e-3, gamma1: 1e-3, gamma2: 1e-4, gamma3: 1e-4, gamma4: 1e-4 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.omega1, self.gamma_p, self.gamma1, self.gamma2, self.gamma3, self.gamma4];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::invalid(format!("loss weights must be finite and non-negative: {self:?}")))
        }
    }
}

/// Outputs of the global and the three facial-component discriminators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorScores {
    pub d_global: f64,
    pub d_eye: f64,
    pub d_nose: f64,
    pub d_lip: f64,
}

impl DiscriminatorScores {
    pub fn new(d_global: f64, d_eye: f64, d_nose: f64, d_lip: f64) -> Result<Self> {
        let s = Self { d_global, d_eye, d_nose, d_lip };
        s.validate()?;
        Ok(s)
    }

    /// Same score for all four discriminators.
    pub fn uniform(v: f64) -> Result<Self> {
        Self::new(v, v, v, v)
    }

    /// Scores outside `[0, 1]` are rejected rather than clamped.
    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().all(|v| (0.0..=1.0).contains(v)) {
            Ok(())
        } else {
            Err(Error::invalid(format!("discriminator scores must lie in [0, 1]: {self:?}")))
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.d_global, self.d_eye, self.d_nose, self.d_lip]
    }
}

/// Maps an image to a fixed number of feature rasters.
pub trait FeatureExtractor {
    fn layer_count(&self) -> usize;

    /// Feature rasters, one per layer. Must be deterministic.
    fn extract(&self, img: &ImageTensor) -> Result<Vec<ImageTensor>>;
}

/// Three-level Gaussian pyramid of gradient magnitudes.
///
/// Level `l` holds `|∇P_l|` (central differences, replicate borders) of the
/// pyramid image `P_l`, where `P_0` is the input and `P_{l+1}` is `P_l`
/// blurred with a σ=1 Gaussian and decimated by two. Each level is computed
/// per channel.
#[derive(Clone, Debug)]
pub struct PyramidExtractor {
    blur: Kernel2D,
}

impl PyramidExtractor {
    pub const LEVELS: usize = 3;
    pub const MIN_SIZE: usize = 8;

    pub fn new() -> Self {
        Self { blur: gaussian_kernel(1.0, 2).expect("static kernel parameters") }
    }
}

impl Default for PyramidExtractor {
    fn default() -> Self {
        Self::new()
    }
}

fn gradient_magnitude(img: &ImageTensor) -> ImageTensor {
    let (h, w, c) = img.dims();
    let mut data = Vec::with_capacity(h * w * c);
    for y in 0..h as isize {
        for x in 0..w as isize {
            for ch in 0..c {
                let gx = 0.5 * (img.get_clamped(y, x + 1, ch) - img.get_clamped(y, x - 1, ch));
                let gy = 0.5 * (img.get_clamped(y + 1, x, ch) - img.get_clamped(y - 1, x, ch));
                data.push((gx * gx + gy * gy).sqrt());
            }
        }
    }
    ImageTensor::from_parts(h, w, c, data)
}

fn decimate(img: &ImageTensor) -> ImageTensor {
    let (h, w, c) = img.dims();
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let mut data = Vec::with_capacity(oh * ow * c);
    for y in 0..oh {
        for x in 0..ow {
            for ch in 0..c {
                data.push(img.get(2 * y, 2 * x, ch));
            }
        }
    }
    ImageTensor::from_parts(oh, ow, c, data)
}

impl FeatureExtractor for PyramidExtractor {
    fn layer_count(&self) -> usize {
        Self::LEVELS
    }

    fn extract(&self, img: &ImageTensor) -> Result<Vec<ImageTensor>> {
        if img.height() < Self::MIN_SIZE || img.width() < Self::MIN_SIZE {
            return Err(Error::invalid(format!(
                "feature extractor needs at least {0}x{0}, got {1}x{2}",
                Self::MIN_SIZE,
                img.height(),
                img.width()
            )));
        }
        let mut level = img.clone();
        let mut out = Vec::with_capacity(Self::LEVELS);
        for l in 0..Self::LEVELS {
            out.push(gradient_magnitude(&level));
            if l + 1 < Self::LEVELS {
                level = decimate(&convolve2d(&level, &self.blur));
            }
        }
        Ok(out)
    }
}

fn sum_sq_diff(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.ensure_same_dims(b)?;
    Ok(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Mean squared element-wise difference.
pub fn mse(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    Ok(sum_sq_diff(a, b)? / a.as_slice().len() as f64)
}

/// `mse(Ĵ, J) + mse(Î, I)`.
pub fn loss_recon(j_hat: &ImageTensor, j: &ImageTensor, i_hat: &ImageTensor, i: &ImageTensor) -> Result<f64> {
    Ok(mse(j_hat, j)? + mse(i_hat, i)?)
}

/// `Σₗ ‖gₗ(a) − gₗ(b)‖²` over the extractor's layers.
pub fn perceptual(a: &ImageTensor, b: &ImageTensor, extractor: &dyn FeatureExtractor) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let fa = extractor.extract(a)?;
    let fb = extractor.extract(b)?;
    if fa.len() != fb.len() {
        return Err(Error::invalid("extractor returned different layer counts"));
    }
    fa.iter().zip(&fb).map(|(x, y)| sum_sq_diff(x, y)).sum()
}

/// Heavy-rain removal objective: `L_R + ω₁ (vgg(Ĵ, J) + vgg(Î, I))`.
pub fn loss_rt(
    j_hat: &ImageTensor,
    j: &ImageTensor,
    i_hat: &ImageTensor,
    i: &ImageTensor,
    w: &LossWeights,
    extractor: &dyn FeatureExtractor,
) -> Result<f64> {
    w.validate()?;
    let recon = loss_recon(j_hat, j, i_hat, i)?;
    if w.omega1 == 0.0 {
        return Ok(recon);
    }
    Ok(recon + w.omega1 * (perceptual(j_hat, j, extractor)? + perceptual(i_hat, i, extractor)?))
}

/// Adversarial part of the generator objective:
/// `γ₁(1 − d_global) + γ₂(1 − d_eye) + γ₃(1 − d_nose) + γ₄(1 − d_lip)`.
pub fn loss_adversarial(scores: &DiscriminatorScores, w: &LossWeights) -> Result<f64> {
    scores.validate()?;
    w.validate()?;
    Ok(w.gamma1 * (1.0 - scores.d_global)
        + w.gamma2 * (1.0 - scores.d_eye)
        + w.gamma3 * (1.0 - scores.d_nose)
        + w.gamma4 * (1.0 - scores.d_lip))
}

/// Generator objective `L_S + γ_p L_P + L_G` with `L_S = mse(H, Ĥ)` and
/// `L_P = perceptual(H, Ĥ)`.
pub fn loss_generator(
    h: &ImageTensor,
    h_hat: &ImageTensor,
    scores: &DiscriminatorScores,
    w: &LossWeights,
    extractor: &dyn FeatureExtractor,
) -> Result<f64> {
    let adversarial = loss_adversarial(scores, w)?;
    let fidelity = mse(h, h_hat)?;
    let percept = if w.gamma_p == 0.0 { 0.0 } else { w.gamma_p * perceptual(h, h_hat, extractor)? };
    Ok(fidelity + percept + adversarial)
}

/// Losses of the four discriminators, in the order global, eye, nose, lip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorLosses {
    pub global: f64,
    pub eye: f64,
    pub nose: f64,
    pub lip: f64,
}

impl DiscriminatorLosses {
    pub fn as_array(&self) -> [f64; 4] {
        [self.global, self.eye, self.nose, self.lip]
    }
}

/// `1 − D(real) + D(fake)` for each discriminator.
pub fn loss_discriminators(real: &DiscriminatorScores, fake: &DiscriminatorScores) -> Result<DiscriminatorLosses> {
    real.validate()?;
    fake.validate()?;
    let l = |r: f64, f: f64| 1.0 - r + f;
    Ok(DiscriminatorLosses {
        global: l(real.d_global, fake.d_global),
        eye: l(real.d_eye, fake.d_eye),
        nose: l(real.d_nose, fake.d_nose),
        lip: l(real.d_lip, fake.d_lip),
    })
}
