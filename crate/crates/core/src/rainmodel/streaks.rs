use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::RainParams;
use crate::imgcore::{clamp01, convolve2d, ImageTensor, Kernel2D};
use crate::{Error, Result};

/// Samples per pixel of line length used when rasterizing motion kernels.
const LINE_OVERSAMPLE: usize = 4;

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v
    }
}

/// Linear motion-blur kernel of size `2·⌈length/2⌉ + 1`.
///
/// Mass is spread uniformly along a segment of `length` pixels through the
/// centre, oriented `angle` degrees counter-clockwise from the +x axis, and
/// splatted bilinearly onto the grid. `length == 1` yields a delta.
pub fn motion_kernel(angle: f64, length: u32) -> Result<Kernel2D> {
    if length < 1 {
        return Err(Error::invalid("motion kernel length must be at least 1"));
    }
    if !angle.is_finite() {
        return Err(Error::invalid("motion kernel angle must be finite"));
    }
    let radius = length.div_ceil(2) as isize;
    let size = (2 * radius + 1) as usize;

    let theta = angle.to_radians();
    let (dx, dy) = (snap(theta.cos()), snap(-theta.sin()));
    let half = (length - 1) as f64 / 2.0;
    let n = LINE_OVERSAMPLE * (length as usize - 1) + 1;
    let mass = 1.0 / n as f64;

    // Splat from absolute offsets so that mirrored samples produce identical
    // weights, and sum each cell's contributions in sorted order so that
    // mirrored and transposed kernels are bit-identical.
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); size * size];
    for k in 0..n {
        let p = if n == 1 { 0.0 } else { -half + 2.0 * half * k as f64 / (n - 1) as f64 };
        let (u, v) = (p * dx, p * dy);
        let (sx, sy) = (if u < 0.0 { -1 } else { 1 }, if v < 0.0 { -1 } else { 1 });
        let (au, av) = (u.abs(), v.abs());
        let (u0, v0) = (au.floor(), av.floor());
        let (fu, fv) = (au - u0, av - v0);
        for (oy, wy) in [(0, 1.0 - fv), (1, fv)] {
            for (ox, wx) in [(0, 1.0 - fu), (1, fu)] {
                let w = mass * wy * wx;
                if w != 0.0 {
                    let row = radius + sy * (v0 as isize + oy);
                    let col = radius + sx * (u0 as isize + ox);
                    cells[row as usize * size + col as usize].push(w);
                }
            }
        }
    }
    let weights = cells
        .into_iter()
        .map(|mut c| {
            c.sort_by(f64::total_cmp);
            c.iter().sum()
        })
        .collect();
    Ok(Kernel2D::new(size, weights)?.normalized())
}

/// RNG for the Gaussian field of streak layer `layer` of a sample.
///
/// Stream 0 of the sample seed is reserved for parameter draws; layer `i`
/// uses stream `i + 1`.
pub fn noise_rng(sample_seed: u64, layer: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    rng.set_stream(1 + layer as u64);
    rng
}

fn validate(params: &RainParams) -> Result<()> {
    if !(params.noise_sigma.is_finite() && params.noise_sigma >= 0.0) {
        return Err(Error::invalid(format!("noise sigma {} must be non-negative", params.noise_sigma)));
    }
    Ok(())
}

fn layer(h: usize, w: usize, params: &RainParams, kernel: &Kernel2D, index: u32) -> Result<ImageTensor> {
    let mut rng = noise_rng(params.sample_seed, index);
    let data: Vec<f64> = (0..h * w)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (params.noise_sigma * z).max(0.0)
        })
        .collect();
    let field = ImageTensor::new(h, w, 1, data)?;
    Ok(clamp01(&convolve2d(&field, kernel)))
}

/// Single-channel rain-streak layer.
///
/// Gaussian noise `N(0, σ²)` is half-wave rectified, smeared with
/// [`motion_kernel`], and clamped to `[0, 1]`.
pub fn synth_rain_layer(h: usize, w: usize, params: &RainParams) -> Result<ImageTensor> {
    validate(params)?;
    let kernel = motion_kernel(params.motion_angle, params.motion_length)?;
    layer(h, w, params, &kernel, 0)
}

/// `m` independent streak layers sharing the sample's noise level and
/// motion; layer `i` draws its field from [`noise_rng`]`(seed, i)`.
pub fn synth_rain_layers(h: usize, w: usize, params: &RainParams, m: u32) -> Result<Vec<ImageTensor>> {
    if m == 0 {
        return Err(Error::invalid("at least one streak layer is required"));
    }
    validate(params)?;
    let kernel = motion_kernel(params.motion_angle, params.motion_length)?;
    (0..m).map(|i| layer(h, w, params, &kernel, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(sigma: f64, angle: f64, length: u32) -> RainParams {
        RainParams {
            noise_sigma: sigma,
            motion_angle: angle,
            motion_length: length,
            atmo_value: 0.9,
            transmission_value: 0.7,
            sample_seed: 1234,
        }
    }

    #[test]
    fn length_one_is_delta() {
        for angle in [0.0, 33.0, 90.0, 179.0] {
            let k = motion_kernel(angle, 1).unwrap();
            assert_eq!(k.size(), 3);
            assert_eq!(k.at(1, 1), 1.0);
            assert_eq!(k.sum(), 1.0);
        }
    }

    #[test]
    fn zero_length_rejected() {
        assert!(motion_kernel(0.0, 0).is_err());
    }

    #[test]
    fn horizontal_kernel_is_row_only_and_symmetric() {
        let k = motion_kernel(0.0, 5).unwrap();
        let n = k.size();
        assert_eq!(n, 7);
        let mid = n / 2;
        for r in 0..n {
            for c in 0..n {
                if r != mid {
                    assert_eq!(k.at(r, c), 0.0);
                }
                assert_eq!(k.at(r, c), k.at(r, n - 1 - c));
            }
        }
    }

    #[test]
    fn vertical_is_transpose_of_horizontal() {
        for len in 1..=9 {
            let h = motion_kernel(0.0, len).unwrap();
            let v = motion_kernel(90.0, len).unwrap();
            assert_eq!(v, h.transpose(), "length {len}");
        }
    }

    #[test]
    fn kernels_are_normalized_and_nonnegative() {
        for len in 1..=15 {
            for a in (0..180).step_by(7) {
                let k = motion_kernel(a as f64, len).unwrap();
                assert_eq!(k.size(), 2 * len.div_ceil(2) as usize + 1);
                assert!((k.sum() - 1.0).abs() <= 1e-12);
                assert!(k.weights().iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn vanishing_noise_gives_empty_layer() {
        let s = synth_rain_layer(16, 16, &params(1e-12, 80.0, 5)).unwrap();
        assert!(s.as_slice().iter().all(|&v| v.abs() <= 1e-9));
        // Rectified Gaussian values scale with sigma; 10σ bounds every draw here.
        let s = synth_rain_layer(16, 16, &params(1e-9, 80.0, 5)).unwrap();
        assert!(s.as_slice().iter().all(|&v| v.abs() <= 1e-8));
    }

    #[test]
    fn layers_are_deterministic_and_bounded() {
        let p = params(0.3, 70.0, 7);
        let a = synth_rain_layer(20, 24, &p).unwrap();
        assert_eq!(a, synth_rain_layer(20, 24, &p).unwrap());
        assert!(a.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let many = synth_rain_layers(20, 24, &p, 3).unwrap();
        assert_eq!(many[0], a);
        assert_ne!(many[1], many[0]);
    }
}
