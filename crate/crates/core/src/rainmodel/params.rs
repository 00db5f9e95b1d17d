use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lowest admissible transmission; keeps the analytic inverse well conditioned.
pub const MIN_TRANSMISSION: f64 = 0.05;

/// Sampling ranges and fixed settings for the degradation pipeline.
///
/// Every `[lo, hi]` range is sampled uniformly per sample. Lengths are in
/// low-resolution pixels and angles in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradationConfig {
    pub scale_s: u32,
    pub num_streak_layers_m: u32,
    pub noise_sigma_range: [f64; 2],
    pub motion_angle_range: [f64; 2],
    pub motion_length_range: [u32; 2],
    pub atmo_range: [f64; 2],
    pub transmission_range: [f64; 2],
    pub use_prefilter: bool,
    pub prefilter_sigma: f64,
    pub master_seed: u64,
}

impl Default for DegradationConfig {
    fn default() -> Self {
        Self {
            scale_s: 4,
            num_streak_layers_m: 1,
            noise_sigma_range: [0.1, 0.3],
            motion_angle_range: [60.0, 120.0],
            motion_length_range: [3, 9],
            atmo_range: [0.7, 1.0],
            transmission_range: [0.4, 0.9],
            use_prefilter: false,
            prefilter_sigma: 1.0,
            master_seed: 0,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], lo_ok: impl Fn(f64) -> bool, hi_ok: impl Fn(f64) -> bool) -> Result<()> {
    let [lo, hi] = r;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi || !lo_ok(lo) || !hi_ok(hi) {
        return Err(Error::invalid(format!("{name} [{lo}, {hi}] is empty or outside its domain")));
    }
    Ok(())
}

impl DegradationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scale_s == 0 {
            return Err(Error::invalid("scale_s must be at least 1"));
        }
        if self.num_streak_layers_m == 0 {
            return Err(Error::invalid("num_streak_layers_m must be at least 1"));
        }
        check_range("noise_sigma_range", self.noise_sigma_range, |v| v > 0.0, |v| v <= 1.0)?;
        check_range("motion_angle_range", self.motion_angle_range, |v| v >= 0.0, |v| v < 180.0)?;
        let [llo, lhi] = self.motion_length_range;
        if llo == 0 || llo > lhi {
            return Err(Error::invalid(format!("motion_length_range [{llo}, {lhi}] is invalid")));
        }
        check_range("atmo_range", self.atmo_range, |v| v > 0.0, |v| v <= 1.0)?;
        check_range("transmission_range", self.transmission_range, |v| v >= MIN_TRANSMISSION, |v| v <= 1.0)?;
        if self.use_prefilter && !(self.prefilter_sigma.is_finite() && self.prefilter_sigma > 0.0) {
            return Err(Error::invalid("prefilter_sigma must be positive"));
        }
        Ok(())
    }
}

/// Physical parameters realized for one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RainParams {
    pub noise_sigma: f64,
    pub motion_angle: f64,
    pub motion_length: u32,
    pub atmo_value: f64,
    pub transmission_value: f64,
    pub sample_seed: u64,
}

impl RainParams {
    /// Checks that every field lies inside the ranges of `config`.
    pub fn within(&self, config: &DegradationConfig) -> bool {
        let inside = |v: f64, [lo, hi]: [f64; 2]| v >= lo && v <= hi;
        inside(self.noise_sigma, config.noise_sigma_range)
            && inside(self.motion_angle, config.motion_angle_range)
            && (config.motion_length_range[0]..=config.motion_length_range[1]).contains(&self.motion_length)
            && inside(self.atmo_value, config.atmo_range)
            && inside(self.transmission_value, config.transmission_range)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-sample seed: a hash of `(master_seed, index)` that does not depend on
/// the order in which samples are produced.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    let u: f64 = rng.random();
    if lo == hi {
        lo
    } else {
        (lo + (hi - lo) * u).min(hi)
    }
}

/// Draws the physical parameters of sample `index`.
///
/// Deterministic in `(config.master_seed, index)`. The draw order is fixed:
/// noise level, angle, length, atmospheric light, transmission.
pub fn sample_params(config: &DegradationConfig, index: u64) -> RainParams {
    let sample_seed = derive_seed(config.master_seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let noise_sigma = uniform(&mut rng, config.noise_sigma_range);
    let motion_angle = uniform(&mut rng, config.motion_angle_range);
    let [llo, lhi] = config.motion_length_range;
    let motion_length = rng.random_range(llo..=lhi.max(llo));
    let atmo_value = uniform(&mut rng, config.atmo_range);
    let transmission_value = uniform(&mut rng, config.transmission_range);
    RainParams { noise_sigma, motion_angle, motion_length, atmo_value, transmission_value, sample_seed }
}
