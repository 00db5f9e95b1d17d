use super::ImageTensor;
use crate::{par, Error, Result};

const CATMULL_ROM_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5` (Catmull-Rom).
#[inline]
pub fn cubic_weight(x: f64) -> f64 {
    let a = CATMULL_ROM_A;
    let x = x.abs();
    if x < 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Source taps and normalized weights for each output index along one axis.
#[derive(Debug, Clone)]
pub(crate) struct AxisTaps {
    taps: Vec<Vec<(usize, f64)>>,
}

impl AxisTaps {
    /// Half-pixel-centred mapping `src = (dst + 0.5)·scale − 0.5`. When
    /// shrinking, the kernel is stretched by the scale factor so that it
    /// band-limits the input before decimation.
    pub(crate) fn new(in_len: usize, out_len: usize) -> Self {
        let scale = in_len as f64 / out_len as f64;
        let stretch = scale.max(1.0);
        let support = 2.0 * stretch;
        let taps = (0..out_len)
            .map(|o| {
                let center = (o as f64 + 0.5) * scale - 0.5;
                let first = (center - support).floor() as isize;
                let last = (center + support).ceil() as isize;
                let mut row: Vec<(usize, f64)> = Vec::new();
                let mut total = 0.0;
                for i in first..=last {
                    let wgt = cubic_weight((i as f64 - center) / stretch);
                    if wgt == 0.0 {
                        continue;
                    }
                    let idx = i.clamp(0, in_len as isize - 1) as usize;
                    total += wgt;
                    match row.iter_mut().find(|(j, _)| *j == idx) {
                        Some((_, w)) => *w += wgt,
                        None => row.push((idx, wgt)),
                    }
                }
                row.iter_mut().for_each(|(_, w)| *w /= total);
                row
            })
            .collect();
        Self { taps }
    }

    pub(crate) fn taps(&self, out_index: usize) -> &[(usize, f64)] {
        &self.taps[out_index]
    }
}

/// Bicubic resize to `out_h × out_w`.
///
/// Separable Catmull-Rom filtering with half-pixel centres and replicate
/// borders; the kernel is widened by the scale factor when downsampling.
/// Resizing to the same size is the identity.
pub fn resize_bicubic(img: &ImageTensor, out_h: usize, out_w: usize) -> Result<ImageTensor> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid(format!("output size must be positive, got {out_h}x{out_w}")));
    }
    let (h, w, c) = img.dims();
    if (h, w) == (out_h, out_w) {
        return Ok(img.clone());
    }
    let src = img.as_slice();

    let xt = AxisTaps::new(w, out_w);
    let mut horiz = vec![0.0; h * out_w * c];
    par::for_each_row(&mut horiz, out_w * c, |y, row| {
        let line = &src[y * w * c..(y + 1) * w * c];
        for ox in 0..out_w {
            for ch in 0..c {
                row[ox * c + ch] = xt.taps(ox).iter().map(|&(ix, wgt)| wgt * line[ix * c + ch]).sum();
            }
        }
    });

    let yt = AxisTaps::new(h, out_h);
    let mut out = vec![0.0; out_h * out_w * c];
    par::for_each_row(&mut out, out_w * c, |oy, row| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = yt.taps(oy).iter().map(|&(iy, wgt)| wgt * horiz[iy * out_w * c + i]).sum();
        }
    });
    Ok(ImageTensor::from_parts(out_h, out_w, c, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_kernel_interpolates() {
        assert_eq!(cubic_weight(0.0), 1.0);
        assert_eq!(cubic_weight(1.0), 0.0);
        assert_eq!(cubic_weight(-1.0), 0.0);
        assert_eq!(cubic_weight(2.0), 0.0);
        // Partition of unity for any phase.
        for k in 0..10 {
            let t = k as f64 / 10.0;
            let s: f64 = (-1..=2).map(|i| cubic_weight(t - i as f64)).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn taps_are_normalized() {
        for (n, m) in [(128, 32), (32, 128), (7, 3), (3, 7)] {
            let t = AxisTaps::new(n, m);
            for o in 0..m {
                let s: f64 = t.taps(o).iter().map(|(_, w)| w).sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(t.taps(o).iter().all(|&(i, _)| i < n));
            }
        }
    }

    #[test]
    fn zero_output_rejected() {
        let img = ImageTensor::zeros(4, 4, 1).unwrap();
        assert!(resize_bicubic(&img, 0, 4).is_err());
        assert!(resize_bicubic(&img, 4, 0).is_err());
    }

    #[test]
    fn upsample_then_shape() {
        let img = ImageTensor::from_fn(4, 6, 3, |y, x, c| (y + x + c) as f64 / 12.0).unwrap();
        let up = resize_bicubic(&img, 16, 24).unwrap();
        assert_eq!(up.dims(), (16, 24, 3));
    }
}
