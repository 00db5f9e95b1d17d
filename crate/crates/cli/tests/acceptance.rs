//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rainsynth::dataset::{assign_splits, generate_dataset, GenerateOptions, Split, SplitRatios};
use rainsynth::imgcore::io;
use rainsynth::losses::{loss_discriminators, loss_generator, DiscriminatorScores, LossWeights, PyramidExtractor};
use rainsynth::metrics::{psnr, ssim, SsimParams};
use rainsynth::rainmodel::{
    compose_heavyrain, degrade_lr, invert_heavyrain, motion_kernel, DegradationConfig, PhysicalParams,
    DEFAULT_INVERT_EPS,
};
use rainsynth::{convolve2d, gaussian_kernel, resize_bicubic, ImageTensor};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: impl Into<String>) -> Outcome {
    let d = detail.into();
    if cond {
        Ok(d)
    } else {
        Err(d)
    }
}

fn random_image(h: usize, w: usize, c: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> ImageTensor {
    ImageTensor::from_fn(h, w, c, |_, _, _| rng.random_range(lo..=hi)).unwrap()
}

fn max_abs_diff(a: &ImageTensor, b: &ImageTensor) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (h, w) = (rng.random_range(4..40), rng.random_range(4..40));
        let j = random_image(h, w, 3, 0.0, 1.0, &mut rng);
        let phys = PhysicalParams {
            rain_layers: vec![random_image(h, w, 1, 0.0, 1.0, &mut rng)],
            transmission: random_image(h, w, 1, 0.05, 1.0, &mut rng),
            atmospheric: random_image(h, w, 3, 0.0, 1.0, &mut rng),
        };
        let pre = compose_heavyrain(&j, &phys).map_err(|e| e.to_string())?.preclamp;
        let back = invert_heavyrain(&pre, &phys, DEFAULT_INVERT_EPS).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&back, &j));
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-10 && elapsed < Duration::from_secs(5),
        format!("max error {worst:.2e}, {:.3}s", elapsed.as_secs_f64()),
    )
}

fn degenerate_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let j = random_image(9, 7, 3, 0.0, 1.0, &mut rng);
    let a = random_image(9, 7, 3, 0.0, 1.0, &mut rng);
    let clear = PhysicalParams {
        rain_layers: vec![ImageTensor::zeros(9, 7, 1).unwrap()],
        transmission: ImageTensor::filled(9, 7, 1, 1.0).unwrap(),
        atmospheric: a.clone(),
    };
    let opaque = PhysicalParams {
        rain_layers: vec![random_image(9, 7, 1, 0.0, 1.0, &mut rng)],
        transmission: ImageTensor::zeros(9, 7, 1).unwrap(),
        atmospheric: a.clone(),
    };
    let i1 = compose_heavyrain(&j, &clear).unwrap().preclamp;
    let i0 = compose_heavyrain(&j, &opaque).unwrap().preclamp;
    check(i1 == j && i0 == a, format!("T=1,S=0 exact: {}; T=0 exact: {}", i1 == j, i0 == a))
}

fn naive_ssim(a: &ImageTensor, b: &ImageTensor) -> f64 {
    let g: Vec<f64> = (0..121)
        .map(|k| {
            let (dy, dx) = ((k / 11) as f64 - 5.0, (k % 11) as f64 - 5.0);
            (-(dx * dx + dy * dy) / 4.5).exp()
        })
        .collect();
    let total: f64 = g.iter().sum();
    let (c1, c2) = (1e-4, 9e-4);
    let (h, w, _) = a.dims();
    let mut sum = 0.0;
    let mut n = 0.0;
    for y0 in 0..=h - 11 {
        for x0 in 0..=w - 11 {
            let mut m = [0.0; 5];
            for (k, gk) in g.iter().enumerate() {
                let wk = gk / total;
                let (u, v) = (a.get(y0 + k / 11, x0 + k % 11, 0), b.get(y0 + k / 11, x0 + k % 11, 0));
                m[0] += wk * u;
                m[1] += wk * v;
                m[2] += wk * u * u;
                m[3] += wk * v * v;
                m[4] += wk * u * v;
            }
            let (va, vb, cov) = (m[2] - m[0] * m[0], m[3] - m[1] * m[1], m[4] - m[0] * m[1]);
            sum += ((2.0 * m[0] * m[1] + c1) * (2.0 * cov + c2)) / ((m[0] * m[0] + m[1] * m[1] + c1) * (va + vb + c2));
            n += 1.0;
        }
    }
    sum / n
}

fn metric_oracles() -> Outcome {
    let p = SsimParams::default();
    let zero = ImageTensor::zeros(16, 16, 1).unwrap();
    let tenth = ImageTensor::filled(16, 16, 1, 0.1).unwrap();
    let one = ImageTensor::filled(16, 16, 1, 1.0).unwrap();
    let db = psnr(&zero, &tenth, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_image(16, 16, 3, 0.0, 1.0, &mut rng);
    let self_sim = ssim(&x, &x, &p).unwrap();
    let c1 = p.c1();
    let flat = ssim(&zero, &one, &p).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let a = random_image(16, 16, 1, 0.0, 1.0, &mut rng);
        let b = random_image(16, 16, 1, 0.0, 1.0, &mut rng);
        worst = worst.max((ssim(&a, &b, &p).unwrap() - naive_ssim(&a, &b)).abs());
    }
    check(
        (db - 20.0).abs() <= 1e-9
            && (self_sim - 1.0).abs() <= 1e-12
            && (flat - c1 / (1.0 + c1)).abs() <= 1e-9
            && worst <= 1e-9,
        format!("psnr {db:.12}, ssim(x,x) {self_sim:.15}, ssim(0,1) {flat:.3e}, oracle gap {worst:.2e}"),
    )
}

fn kernel_contracts() -> Outcome {
    let mut worst_sum = 0.0f64;
    for r in 1..=6 {
        for sigma in [0.1, 0.5, 1.0, 1.5, 3.0, 10.0] {
            worst_sum = worst_sum.max((gaussian_kernel(sigma, r).unwrap().sum() - 1.0).abs());
        }
    }
    for len in 1..=21 {
        for a in 0..180 {
            worst_sum = worst_sum.max((motion_kernel(a as f64, len).unwrap().sum() - 1.0).abs());
        }
    }
    let delta = (0..180).all(|a| {
        let k = motion_kernel(a as f64, 1).unwrap();
        k.at(k.radius(), k.radius()) == 1.0 && k.weights().iter().filter(|&&w| w != 0.0).count() == 1
    });
    let c = ImageTensor::filled(23, 17, 3, 0.37).unwrap();
    let mut worst_fix = 0.0f64;
    for k in [gaussian_kernel(1.5, 4).unwrap(), motion_kernel(73.0, 9).unwrap()] {
        worst_fix = worst_fix.max(max_abs_diff(&convolve2d(&c, &k), &c));
    }
    for (h, w) in [(5, 5), (46, 34), (11, 40)] {
        let r = resize_bicubic(&c, h, w).unwrap();
        worst_fix = worst_fix.max(r.as_slice().iter().map(|v| (v - 0.37).abs()).fold(0.0, f64::max));
    }
    check(
        worst_sum <= 1e-12 && delta && worst_fix <= 1e-12,
        format!("max |sum-1| {worst_sum:.1e}, delta {delta}, fixed-point error {worst_fix:.1e}"),
    )
}

fn loss_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = random_image(32, 32, 3, 0.0, 1.0, &mut rng);
    let w = LossWeights::default();
    let ext = PyramidExtractor::new();
    let ones = DiscriminatorScores::uniform(1.0).unwrap();
    let zeros = DiscriminatorScores::uniform(0.0).unwrap();
    let fooled = loss_generator(&h, &h, &ones, &w, &ext).unwrap();
    let caught = loss_generator(&h, &h, &zeros, &w, &ext).unwrap();
    let d = loss_discriminators(&ones, &zeros).unwrap().as_array();
    check(
        fooled == 0.0 && d == [0.0; 4] && (caught - 1.3e-3).abs() <= 1e-12,
        format!("L_G(scores=1) {fooled}, L_G(scores=0) {caught:.15}, L_D {d:?}"),
    )
}

fn write_faces(dir: &Path, n: usize, size: usize) {
    std::fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    for i in 0..n {
        let img = random_image(size, size, 3, 0.0, 1.0, &mut rng);
        io::save_png(&img, &dir.join(format!("{i:04}.png"))).unwrap();
    }
}

fn synth(root: &Path, out: &str, threads: &str) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_rainsynth"))
        .arg("synth")
        .args([root.join("config.json"), root.join("hr"), root.join(out)])
        .args(["--seed", "20250101"])
        .env(rainsynth_cli::THREADS_ENV, threads)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&status.stderr).into_owned())
    }
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["hr", "lr", "lrhr", "rain", "preclamp"] {
        let mut entries: Vec<_> = std::fs::read_dir(dir.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            out.push((format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap()));
        }
    }
    out.push(("records.jsonl".into(), std::fs::read(dir.join("records.jsonl")).unwrap()));
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    write_faces(&root.join("hr"), 20, 64);
    std::fs::write(root.join("config.json"), "{}").map_err(|e| e.to_string())?;
    synth(root, "run_a", "1")?;
    synth(root, "run_b", "1")?;
    synth(root, "run_c", "8")?;
    let (a, b, c) = (tree_bytes(&root.join("run_a")), tree_bytes(&root.join("run_b")), tree_bytes(&root.join("run_c")));
    check(
        a.len() == 101 && a == b && a == c,
        format!("{} files compared; rerun identical: {}; 1 vs 8 workers identical: {}", a.len(), a == b, a == c),
    )
}

fn reference_shapes() -> Outcome {
    let hr = ImageTensor::filled(128, 128, 3, 0.5).unwrap();
    let j = degrade_lr(&hr, &DegradationConfig::default()).unwrap();
    let ids: Vec<String> = (0..19_900).map(|i| format!("celeb_{i:05}")).collect();
    let splits = assign_splits(&ids, &SplitRatios([18_000.0, 1_800.0, 100.0]), 0).unwrap();
    let counts = Split::ALL.map(|s| splits.iter().filter(|&&x| x == s).count());
    check(
        j.dims() == (32, 32, 3) && counts == [18_000, 1_800, 100],
        format!("LR dims {:?}, split counts {counts:?}", j.dims()),
    )
}

fn throughput() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let hr = tmp.path().join("hr");
    write_faces(&hr, 1000, 128);
    let start = Instant::now();
    let m = generate_dataset(&hr, &DegradationConfig::default(), &GenerateOptions::default(), &tmp.path().join("out"))
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    check(
        m.records.len() == 1000 && secs <= 60.0,
        format!("{} samples in {secs:.2}s on {workers} worker(s)", m.records.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("round-trip inversion", round_trip),
        ("degenerate compositor identities", degenerate_identities),
        ("metric oracles", metric_oracles),
        ("kernel contracts", kernel_contracts),
        ("loss algebra", loss_algebra),
        ("determinism", determinism),
        ("reference shapes", reference_shapes),
        ("throughput", throughput),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
