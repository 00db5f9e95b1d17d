use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rainsynth::imgcore::cubic_weight;
use rainsynth::{clamp01, convolve2d, gaussian_kernel, resize_bicubic, ImageTensor, Kernel2D};

fn random_image(h: usize, w: usize, c: usize, seed: u64) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageTensor::from_fn(h, w, c, |_, _, _| rng.random::<f64>()).unwrap()
}

fn max_abs_diff(a: &ImageTensor, b: &ImageTensor) -> f64 {
    assert_eq!(a.dims(), b.dims());
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// Nested-loop convolution with replicate borders.
fn convolve_oracle(img: &ImageTensor, k: &Kernel2D) -> ImageTensor {
    let r = k.radius() as isize;
    let (h, w, c) = img.dims();
    ImageTensor::from_fn(h, w, c, |y, x, ch| {
        let mut acc = 0.0;
        for ky in -r..=r {
            for kx in -r..=r {
                let sy = (y as isize - ky).clamp(0, h as isize - 1) as usize;
                let sx = (x as isize - kx).clamp(0, w as isize - 1) as usize;
                acc += k.at((ky + r) as usize, (kx + r) as usize) * img.get(sy, sx, ch);
            }
        }
        acc
    })
    .unwrap()
}

#[test]
fn gaussian_center_weight_matches_direct_sum() {
    let k = gaussian_kernel(1.0, 2).unwrap();
    let mut total = 0.0;
    for dy in -2i32..=2 {
        for dx in -2i32..=2 {
            total += (-((dx * dx + dy * dy) as f64) / 2.0).exp();
        }
    }
    assert!((k.at(2, 2) - 1.0 / total).abs() < 1e-15);
}

#[test]
fn gaussian_limits() {
    let flat = gaussian_kernel(1e6, 1).unwrap();
    assert!(flat.weights().iter().all(|w| (w - 1.0 / 9.0).abs() < 1e-9));
    let sharp = gaussian_kernel(0.1, 2).unwrap();
    assert!(sharp.at(2, 2) >= 0.999);
    assert!(gaussian_kernel(0.0, 1).is_err());
    assert!(gaussian_kernel(-1.0, 1).is_err());
}

#[test]
fn box_convolution_matches_loop_oracle() {
    let img = random_image(5, 5, 1, 7);
    let k = Kernel2D::new(3, vec![1.0 / 9.0; 9]).unwrap();
    assert!(max_abs_diff(&convolve2d(&img, &k), &convolve_oracle(&img, &k)) <= 1e-12);
}

#[test]
fn asymmetric_kernel_matches_loop_oracle() {
    let img = random_image(6, 9, 3, 8);
    let k = Kernel2D::new(3, vec![0.0, 0.1, 0.0, 0.3, 0.2, 0.0, 0.0, 0.0, 0.4]).unwrap();
    assert!(max_abs_diff(&convolve2d(&img, &k), &convolve_oracle(&img, &k)) <= 1e-12);
}

#[test]
fn identity_kernel_leaves_image_unchanged() {
    let img = random_image(4, 7, 3, 9);
    assert_eq!(convolve2d(&img, &Kernel2D::identity()), img);
}

// Separable Catmull-Rom evaluated per output pixel, with the kernel widened
// by the scale factor when shrinking.
fn bicubic_oracle(img: &ImageTensor, oh: usize, ow: usize) -> ImageTensor {
    fn taps(n_in: usize, n_out: usize, o: usize) -> Vec<(usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        let stretch = scale.max(1.0);
        let center = (o as f64 + 0.5) * scale - 0.5;
        let mut t: Vec<(usize, f64)> = Vec::new();
        let lo = (center - 2.0 * stretch).floor() as isize;
        let hi = (center + 2.0 * stretch).ceil() as isize;
        for i in lo..=hi {
            let w = cubic_weight((i as f64 - center) / stretch);
            if w != 0.0 {
                t.push(((i.clamp(0, n_in as isize - 1)) as usize, w));
            }
        }
        let total: f64 = t.iter().map(|p| p.1).sum();
        t.into_iter().map(|(i, w)| (i, w / total)).collect()
    }
    let (h, w, c) = img.dims();
    ImageTensor::from_fn(oh, ow, c, |y, x, ch| {
        let mut acc = 0.0;
        for (sy, wy) in taps(h, oh, y) {
            for (sx, wx) in taps(w, ow, x) {
                acc += wy * wx * img.get(sy, sx, ch);
            }
        }
        acc
    })
    .unwrap()
}

#[test]
fn cubic_weight_is_catmull_rom() {
    assert_eq!(cubic_weight(0.0), 1.0);
    assert_eq!(cubic_weight(1.0), 0.0);
    assert_eq!(cubic_weight(2.0), 0.0);
    assert!((cubic_weight(0.5) - 0.5625).abs() < 1e-15);
    assert!((cubic_weight(1.5) + 0.0625).abs() < 1e-15);
}

#[test]
fn ramp_downsample_matches_separable_oracle() {
    let ramp = ImageTensor::from_fn(8, 8, 1, |y, x, _| (x + 8 * y) as f64 / 63.0).unwrap();
    let got = resize_bicubic(&ramp, 4, 4).unwrap();
    assert!(max_abs_diff(&got, &bicubic_oracle(&ramp, 4, 4)) <= 1e-12);
}

#[test]
fn upsample_matches_separable_oracle() {
    let img = random_image(5, 7, 3, 10);
    let got = resize_bicubic(&img, 13, 9).unwrap();
    assert!(max_abs_diff(&got, &bicubic_oracle(&img, 13, 9)) <= 1e-12);
}

#[test]
fn lr_shape_128_to_32() {
    let hr = random_image(128, 128, 3, 11);
    assert_eq!(resize_bicubic(&hr, 32, 32).unwrap().dims(), (32, 32, 3));
    assert!(resize_bicubic(&hr, 0, 32).is_err());
}

#[test]
fn clamp_keeps_in_range_values() {
    let img = ImageTensor::new(1, 4, 1, vec![-0.5, 0.25, 0.75, 1.5]).unwrap();
    assert_eq!(clamp01(&img).as_slice(), &[0.0, 0.25, 0.75, 1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constant_is_fixed_point_of_convolution(c in 0.0f64..1.0, sigma in 0.2f64..4.0, r in 1usize..5) {
        let img = ImageTensor::filled(9, 6, 3, c).unwrap();
        let out = convolve2d(&img, &gaussian_kernel(sigma, r).unwrap());
        prop_assert!(max_abs_diff(&out, &img) <= 1e-12);
    }

    #[test]
    fn constant_is_fixed_point_of_resize(c in 0.0f64..1.0, h in 1usize..40, w in 1usize..40, oh in 1usize..40, ow in 1usize..40) {
        let img = ImageTensor::filled(h, w, 1, c).unwrap();
        let out = resize_bicubic(&img, oh, ow).unwrap();
        prop_assert_eq!(out.dims(), (oh, ow, 1));
        prop_assert!(out.as_slice().iter().all(|v| (v - c).abs() <= 1e-12));
    }

    #[test]
    fn gaussian_kernels_are_normalized(sigma in 0.05f64..50.0, r in 1usize..8) {
        let k = gaussian_kernel(sigma, r).unwrap();
        prop_assert!((k.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(k.weights().iter().all(|&w| w >= 0.0));
        prop_assert_eq!(k.clone(), k.transpose());
    }

    #[test]
    fn convolution_is_linear(seed in any::<u64>(), alpha in -2.0f64..2.0) {
        let a = random_image(7, 5, 2, seed);
        let b = random_image(7, 5, 2, seed ^ 1);
        let k = gaussian_kernel(1.3, 2).unwrap();
        let mix = ImageTensor::from_fn(7, 5, 2, |y, x, c| a.get(y, x, c) + alpha * b.get(y, x, c)).unwrap();
        let (ka, kb) = (convolve2d(&a, &k), convolve2d(&b, &k));
        let expected = ImageTensor::from_fn(7, 5, 2, |y, x, c| ka.get(y, x, c) + alpha * kb.get(y, x, c)).unwrap();
        prop_assert!(max_abs_diff(&convolve2d(&mix, &k), &expected) <= 1e-12);
    }

    #[test]
    fn symmetric_blur_commutes_with_flip(seed in any::<u64>()) {
        let img = random_image(8, 11, 3, seed);
        let k = gaussian_kernel(0.9, 3).unwrap();
        let lhs = convolve2d(&img.flip_horizontal(), &k);
        let rhs = convolve2d(&img, &k).flip_horizontal();
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn resize_to_same_size_is_identity(seed in any::<u64>(), h in 1usize..20, w in 1usize..20) {
        let img = random_image(h, w, 3, seed);
        prop_assert_eq!(resize_bicubic(&img, h, w).unwrap(), img);
    }

    #[test]
    fn clamp_is_idempotent_and_bounded(v in prop::collection::vec(-3.0f64..3.0, 12)) {
        let img = ImageTensor::new(3, 4, 1, v).unwrap();
        let once = clamp01(&img);
        prop_assert!(once.as_slice().iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert_eq!(clamp01(&once), once);
    }
}
