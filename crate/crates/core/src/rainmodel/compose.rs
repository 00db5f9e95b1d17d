use super::{sample_params, synth_rain_layers, DegradationConfig, RainParams};
use crate::imgcore::{clamp01, convolve2d, gaussian_kernel, resize_bicubic, ImageTensor};
use crate::{Error, Result};

/// Default lower bound on transmission accepted by [`invert_heavyrain`].
pub const DEFAULT_INVERT_EPS: f64 = 1e-6;

/// Rain layers `S`, transmission `T`, and atmospheric light `A` at
/// low-resolution size.
///
/// Rain layers and transmission are single-channel and broadcast over the
/// image's channels; the atmospheric map carries the image's channel count.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalParams {
    pub rain_layers: Vec<ImageTensor>,
    pub transmission: ImageTensor,
    pub atmospheric: ImageTensor,
}

impl PhysicalParams {
    /// `Σ Sᵢ` as a single raster.
    pub fn rain_sum(&self) -> Result<ImageTensor> {
        ImageTensor::sum_of(&self.rain_layers)
    }

    /// The single value the atmospheric map is filled with.
    pub fn atmo_value(&self) -> f64 {
        self.atmospheric.as_slice()[0]
    }
}

/// Output of [`compose_heavyrain`].
#[derive(Clone, Debug, PartialEq)]
pub struct Composite {
    /// The observed image, clamped to `[0, 1]`.
    pub clamped: ImageTensor,
    /// Raw compositor output before clamping.
    pub preclamp: ImageTensor,
}

/// Everything produced for one synthetic sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Degraded {
    pub lrhr: ImageTensor,
    pub lrhr_preclamp: ImageTensor,
    pub lr: ImageTensor,
    pub phys: PhysicalParams,
    pub params: RainParams,
}

/// Constant single-channel transmission map.
pub fn make_transmission(h: usize, w: usize, t: f64) -> Result<ImageTensor> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid(format!("transmission {t} outside (0, 1]")));
    }
    ImageTensor::filled(h, w, 1, t)
}

/// Constant atmospheric-light map with `channels` channels.
pub fn make_atmospheric(h: usize, w: usize, channels: usize, a: f64) -> Result<ImageTensor> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::invalid(format!("atmospheric light {a} outside (0, 1]")));
    }
    ImageTensor::filled(h, w, channels, a)
}

/// `J = (H ⊗ K)↓s`: optional Gaussian prefilter followed by bicubic
/// downsampling by `config.scale_s`.
pub fn degrade_lr(hr: &ImageTensor, config: &DegradationConfig) -> Result<ImageTensor> {
    let s = config.scale_s as usize;
    if s == 0 {
        return Err(Error::invalid("scale_s must be at least 1"));
    }
    let (h, w, _) = hr.dims();
    if h % s != 0 || w % s != 0 {
        return Err(Error::invalid(format!("{h}x{w} is not divisible by scale {s}")));
    }
    let blurred;
    let src = if config.use_prefilter {
        let radius = ((3.0 * config.prefilter_sigma).ceil() as usize).max(1);
        blurred = convolve2d(hr, &gaussian_kernel(config.prefilter_sigma, radius)?);
        &blurred
    } else {
        hr
    };
    resize_bicubic(src, h / s, w / s)
}

fn check_model_dims(j: &ImageTensor, rain: &[ImageTensor], t: &ImageTensor, a: &ImageTensor) -> Result<()> {
    for s in rain {
        j.ensure_broadcastable(s)?;
    }
    j.ensure_broadcastable(t)?;
    j.ensure_broadcastable(a)
}

/// `Î = T̂ ⊙ (J + Σ Ŝᵢ) + (1 − T̂) ⊙ Â`, unclamped.
///
/// This is the exact arithmetic [`compose_heavyrain`] uses.
pub fn recompose(
    j: &ImageTensor,
    rain: &[ImageTensor],
    transmission: &ImageTensor,
    atmospheric: &ImageTensor,
) -> Result<ImageTensor> {
    check_model_dims(j, rain, transmission, atmospheric)?;
    let (h, w, c) = j.dims();
    let data = j
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &jv)| {
            let t = transmission.broadcast_at(i, c);
            let a = atmospheric.broadcast_at(i, c);
            let mut acc = jv;
            for s in rain {
                acc += s.broadcast_at(i, c);
            }
            t * acc + (1.0 - t) * a
        })
        .collect();
    ImageTensor::new(h, w, c, data)
}

/// Forward compositor. Returns both the clamped observation and the raw
/// pre-clamp raster.
pub fn compose_heavyrain(j: &ImageTensor, phys: &PhysicalParams) -> Result<Composite> {
    let preclamp = recompose(j, &phys.rain_layers, &phys.transmission, &phys.atmospheric)?;
    Ok(Composite { clamped: clamp01(&preclamp), preclamp })
}

/// `Ĵ = (I − (1 − T) ⊙ A) ⊘ T − Σ Sᵢ`.
///
/// Exact inverse of the unclamped compositor. Fails if any transmission value
/// is below `eps`.
pub fn invert_heavyrain(preclamp: &ImageTensor, phys: &PhysicalParams, eps: f64) -> Result<ImageTensor> {
    check_model_dims(preclamp, &phys.rain_layers, &phys.transmission, &phys.atmospheric)?;
    if let Some((index, &value)) = phys.transmission.as_slice().iter().enumerate().find(|(_, &t)| t < eps) {
        return Err(Error::IllConditioned { index, value, eps });
    }
    let (h, w, c) = preclamp.dims();
    let data = preclamp
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &iv)| {
            let t = phys.transmission.broadcast_at(i, c);
            let a = phys.atmospheric.broadcast_at(i, c);
            let mut acc = (iv - (1.0 - t) * a) / t;
            for s in &phys.rain_layers {
                acc -= s.broadcast_at(i, c);
            }
            acc
        })
        .collect();
    ImageTensor::new(h, w, c, data)
}

/// Rebuilds the physical maps of a sample from its realized parameters.
pub fn physical_params(
    h: usize,
    w: usize,
    channels: usize,
    params: &RainParams,
    config: &DegradationConfig,
) -> Result<PhysicalParams> {
    Ok(PhysicalParams {
        rain_layers: synth_rain_layers(h, w, params, config.num_streak_layers_m)?,
        transmission: make_transmission(h, w, params.transmission_value)?,
        atmospheric: make_atmospheric(h, w, channels, params.atmo_value)?,
    })
}

/// Full pipeline for sample `index`: draw parameters, reduce `hr` to `J`,
/// build the physical maps at low resolution, and composite.
pub fn degrade_full(hr: &ImageTensor, config: &DegradationConfig, index: u64) -> Result<Degraded> {
    config.validate()?;
    let params = sample_params(config, index);
    let lr = degrade_lr(hr, config)?;
    let (h, w, c) = lr.dims();
    let phys = physical_params(h, w, c, &params, config)?;
    let Composite { clamped, preclamp } = compose_heavyrain(&lr, &phys)?;
    Ok(Degraded { lrhr: clamped, lrhr_preclamp: preclamp, lr, phys, params })
}
