//! Command implementations behind the `rainsynth` binary.
//!
//! Every command writes machine-readable JSON lines to `out` and human
//! diagnostics to `err`, and reports failures as [`CliError`]s whose
//! [`exit_code`](CliError::exit_code) is 1 for usage or data problems and 2
//! for I/O problems.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use rainsynth::dataset::{self, generate_dataset, load_sample, GenerateOptions, Manifest};
use rainsynth::facecrop::CropBoxes;
use rainsynth::imgcore::io;
use rainsynth::losses::{
    loss_adversarial, loss_discriminators, loss_generator, loss_recon, loss_rt, mse, perceptual, DiscriminatorScores,
    LossWeights, PyramidExtractor,
};
use rainsynth::metrics::{psnr, ssim, SsimParams};
use rainsynth::rainmodel::{degrade_lr, invert_heavyrain, DegradationConfig, DEFAULT_INVERT_EPS};
use rainsynth::{clamp01, par, resize_bicubic, ImageTensor};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "RAINSYNTH_THREADS";

/// Optional default locations, overridden by command-line arguments.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoPaths {
    pub hr_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// Everything a run needs, stored as one JSON document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub degradation: DegradationConfig,
    pub losses: LossWeights,
    pub ssim: SsimParams,
    pub crops: CropBoxes,
    pub dataset: GenerateOptions,
    pub paths: IoPaths,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: rainsynth::Error| CliError::Usage(format!("config: {e}"));
        self.degradation.validate().map_err(usage)?;
        self.losses.validate().map_err(usage)?;
        self.ssim.validate().map_err(usage)?;
        self.crops.validate().map_err(usage)?;
        self.dataset.split_ratios.validate().map_err(usage)
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration, or data.
    Usage(String),
    /// Unreadable or unwritable files.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<rainsynth::Error> for CliError {
    fn from(e: rainsynth::Error) -> Self {
        use rainsynth::Error as E;
        match e {
            E::Io { .. } | E::Image { .. } | E::Corrupt { .. } | E::Json(_) => CliError::Io(e.to_string()),
            E::InvalidArgument(_) | E::DimensionMismatch { .. } | E::IllConditioned { .. } | E::UnknownId(_) => {
                CliError::Usage(e.to_string())
            }
        }
    }
}

fn write_line(out: &mut dyn Write, v: &Value) -> Result<(), CliError> {
    writeln!(out, "{v}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}

/// Worker cap from [`THREADS_ENV`]; unset or unparsable means no cap.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0)
}

/// JSON value for a PSNR score: a number, or `"inf"` for identical images.
pub fn psnr_json(v: f64) -> Value {
    if v.is_infinite() {
        json!("inf")
    } else {
        json!(v)
    }
}

/// `synth`: build a corpus from `hr_dir` into `out_dir`.
#[allow(clippy::too_many_arguments)]
pub fn cmd_synth(
    config_file: &Path,
    hr_dir: &Path,
    out_dir: &Path,
    count: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config_file)?;
    if let Some(s) = seed {
        cfg.degradation.master_seed = s;
    }
    let mut options = cfg.dataset.clone();
    if count.is_some() {
        options.count = count;
    }
    options.threads = threads;
    if !hr_dir.is_dir() {
        return Err(CliError::Io(format!("{}: input directory not found", hr_dir.display())));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;

    let start = Instant::now();
    let manifest = generate_dataset(hr_dir, &cfg.degradation, &options, out_dir)?;
    let elapsed = start.elapsed().as_secs_f64();
    let [train, val, test] = manifest.split_counts();
    for f in &manifest.failures {
        let _ = writeln!(err, "skipped {}: {}", f.source, f.error);
    }
    let _ = writeln!(
        err,
        "generated {} samples (train {train}, val {val}, test {test}) in {elapsed:.2}s",
        manifest.records.len()
    );
    write_line(
        out,
        &json!({
            "records": manifest.records.len(),
            "train": train,
            "val": val,
            "test": test,
            "failures": manifest.failures.len(),
            "master_seed": manifest.config.master_seed,
            "elapsed_s": elapsed,
        }),
    )
}

/// `invert`: recover `J` from a sample's pre-clamp dump and its recorded
/// parameters, write it to `out_path`, and report PSNR against the exact
/// replayed `J`.
pub fn cmd_invert(manifest_path: &Path, id: &str, out_path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = Manifest::load(manifest_path)?;
    let record = manifest.record(id)?;
    if record.files.preclamp_lrhr.is_none() {
        return Err(CliError::Usage(format!(
            "sample `{id}` has no pre-clamp dump; regenerate with dataset.write_preclamp enabled"
        )));
    }
    let sample = load_sample(&manifest, id)?;
    let preclamp = sample.preclamp.expect("dump presence checked above");
    let recovered = invert_heavyrain(&preclamp, &sample.phys, DEFAULT_INVERT_EPS)?;
    let reference = degrade_lr(&sample.hr, &manifest.config)?;
    let score = psnr(&recovered, &reference, 1.0)?;
    io::save_png(&clamp01(&recovered), out_path)?;
    write_line(out, &json!({ "id": id, "psnr": psnr_json(score), "output": out_path }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Metric {
    Psnr,
    Ssim,
    #[default]
    Both,
}

fn image_names(dir: &Path) -> Result<BTreeSet<String>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut names = BTreeSet::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"));
        if path.is_file() && is_image {
            names.insert(path.file_name().expect("file has a name").to_string_lossy().into_owned());
        }
    }
    Ok(names)
}

/// Per-pair scores; `None` where the metric was not requested.
#[derive(Clone, Debug, PartialEq)]
pub struct PairScore {
    pub file: String,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

/// Scores every identically named image pair of two directories.
pub fn score_dirs(
    ref_dir: &Path,
    test_dir: &Path,
    metric: Metric,
    params: &SsimParams,
) -> Result<Vec<PairScore>, CliError> {
    let refs = image_names(ref_dir)?;
    let tests = image_names(test_dir)?;
    if refs != tests {
        let only_ref: Vec<_> = refs.difference(&tests).cloned().collect();
        let only_test: Vec<_> = tests.difference(&refs).cloned().collect();
        return Err(CliError::Usage(format!(
            "file sets differ; only in reference: {only_ref:?}; only in test: {only_test:?}"
        )));
    }
    if refs.is_empty() {
        return Err(CliError::Usage(format!("no images in {}", ref_dir.display())));
    }
    let names: Vec<String> = refs.into_iter().collect();
    let results = par::map_indexed(names.len(), |i| -> Result<PairScore, CliError> {
        let a = io::load_rgb(&ref_dir.join(&names[i]))?;
        let b = io::load_rgb(&test_dir.join(&names[i]))?;
        let p = matches!(metric, Metric::Psnr | Metric::Both).then(|| psnr(&a, &b, 1.0)).transpose()?;
        let s = matches!(metric, Metric::Ssim | Metric::Both).then(|| ssim(&a, &b, params)).transpose()?;
        Ok(PairScore { file: names[i].clone(), psnr: p, ssim: s })
    });
    results.into_iter().collect()
}

/// `score`: one JSON line per pair followed by one aggregate line.
pub fn cmd_score(ref_dir: &Path, test_dir: &Path, metric: Metric, out: &mut dyn Write) -> Result<(), CliError> {
    let scores = score_dirs(ref_dir, test_dir, metric, &SsimParams::default())?;
    for s in &scores {
        let mut line = json!({ "file": s.file });
        if let Some(p) = s.psnr {
            line["psnr"] = psnr_json(p);
        }
        if let Some(v) = s.ssim {
            line["ssim"] = json!(v);
        }
        write_line(out, &line)?;
    }
    let n = scores.len() as f64;
    let mut agg = json!({ "aggregate": true, "count": scores.len() });
    if matches!(metric, Metric::Psnr | Metric::Both) {
        agg["psnr_mean"] = psnr_json(scores.iter().filter_map(|s| s.psnr).sum::<f64>() / n);
    }
    if matches!(metric, Metric::Ssim | Metric::Both) {
        agg["ssim_mean"] = json!(scores.iter().filter_map(|s| s.ssim).sum::<f64>() / n);
    }
    write_line(out, &agg)
}

/// Panel labels of the inspection montage, left to right.
pub const MONTAGE_PANELS: [&str; 7] =
    ["hr", "lr", "rain_streaked", "lrhr", "rain_layer", "atmospheric", "transmission"];

/// Seven panels at HR size: `H | J | J + ΣS | I | ΣS | A | T`.
pub fn montage_panels(sample: &dataset::LoadedSample) -> Result<Vec<ImageTensor>, CliError> {
    let (h, w, _) = sample.hr.dims();
    let rain = sample.phys.rain_sum()?;
    let streaked = ImageTensor::from_fn(sample.lr.height(), sample.lr.width(), sample.lr.channels(), |y, x, c| {
        sample.lr.get(y, x, c) + rain.get(y, x, 0)
    })?;
    let lr_panels = [&sample.lr, &streaked, &sample.lrhr, &rain, &sample.phys.atmospheric, &sample.phys.transmission];
    let mut panels = vec![sample.hr.clone()];
    for p in lr_panels {
        let up = clamp01(&resize_bicubic(p, h, w)?);
        panels.push(up.broadcast_channels(3)?);
    }
    Ok(panels)
}

fn stitch(panels: &[ImageTensor]) -> Result<ImageTensor, CliError> {
    let (h, w, c) = panels[0].dims();
    Ok(ImageTensor::from_fn(h, w * panels.len(), c, |y, x, ch| panels[x / w].get(y, x % w, ch))?)
}

/// `inspect`: print a sample's parameters, files, and dimensions; optionally
/// write the seven-panel montage.
pub fn cmd_inspect(
    manifest_path: &Path,
    id: &str,
    montage: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let manifest = Manifest::load(manifest_path)?;
    let record = manifest.record(id)?;
    let mut info = json!({
        "id": record.id,
        "split": record.split,
        "index": record.index,
        "source": record.source,
        "hr_dims": record.hr_dims,
        "lr_dims": record.lr_dims,
        "params": record.params,
        "files": record.files,
    });
    if let Some(path) = montage {
        let sample = load_sample(&manifest, id)?;
        let strip = stitch(&montage_panels(&sample)?)?;
        io::save_png(&strip, path)?;
        info["montage"] = json!({ "path": path, "panels": MONTAGE_PANELS });
    }
    write_line(out, &info)
}

/// `verify`: one JSON line per record plus a summary line. Fails with a
/// data error if any record does not reproduce.
pub fn cmd_verify(manifest_path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = Manifest::load(manifest_path)?;
    let report = dataset::verify_manifest(&manifest);
    for e in &report.entries {
        write_line(out, &json!(e))?;
    }
    let failed = report.failed_ids();
    write_line(out, &json!({ "aggregate": true, "count": report.entries.len(), "failed": failed.len() }))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{} of {} records failed verification", failed.len(), report.entries.len())))
    }
}

/// Tensors of a heavy-rain removal step: estimates and targets of `J` and `I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemovalTensors {
    pub j_hat: PathBuf,
    pub j: PathBuf,
    pub i_hat: PathBuf,
    pub i: PathBuf,
}

/// Tensors and discriminator outputs of a generator step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorTensors {
    pub h: PathBuf,
    pub h_hat: PathBuf,
    pub scores: DiscriminatorScores,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorPair {
    pub real: DiscriminatorScores,
    pub fake: DiscriminatorScores,
}

/// Input of the `loss` command. Tensor paths are raw `.f32` dumps or PNGs,
/// relative to the request file; every section is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossRequest {
    pub weights: LossWeights,
    pub removal: Option<RemovalTensors>,
    pub generator: Option<GeneratorTensors>,
    pub discriminators: Option<DiscriminatorPair>,
}

fn load_tensor(base: &Path, rel: &Path) -> Result<ImageTensor, CliError> {
    let path = base.join(rel);
    let is_raw = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("f32"));
    Ok(if is_raw { dataset::raw::read(&path)? } else { io::load(&path)? })
}

/// Evaluates every loss a request has inputs for, using the pyramid
/// extractor for perceptual terms.
pub fn evaluate_losses(req: &LossRequest, base: &Path) -> Result<Value, CliError> {
    let w = &req.weights;
    let ext = PyramidExtractor::new();
    let mut out = json!({});
    if let Some(r) = &req.removal {
        let [jh, j, ih, i] = [&r.j_hat, &r.j, &r.i_hat, &r.i].map(|p| load_tensor(base, p));
        let (jh, j, ih, i) = (jh?, j?, ih?, i?);
        out["removal"] = json!({
            "loss_recon": loss_recon(&jh, &j, &ih, &i)?,
            "perceptual_j": perceptual(&jh, &j, &ext)?,
            "perceptual_i": perceptual(&ih, &i, &ext)?,
            "loss_rt": loss_rt(&jh, &j, &ih, &i, w, &ext)?,
        });
    }
    if let Some(g) = &req.generator {
        let (h, hh) = (load_tensor(base, &g.h)?, load_tensor(base, &g.h_hat)?);
        out["generator"] = json!({
            "loss_fidelity": mse(&h, &hh)?,
            "loss_perceptual": perceptual(&h, &hh, &ext)?,
            "loss_adversarial": loss_adversarial(&g.scores, w)?,
            "loss_generator": loss_generator(&h, &hh, &g.scores, w, &ext)?,
        });
    }
    if let Some(d) = &req.discriminators {
        out["discriminators"] = json!(loss_discriminators(&d.real, &d.fake)?);
    }
    Ok(out)
}

/// `loss`: evaluate the objectives on dumped tensors and print one JSON line.
pub fn cmd_loss(request_path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let text =
        std::fs::read_to_string(request_path).map_err(|e| CliError::Io(format!("{}: {e}", request_path.display())))?;
    let req: LossRequest = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("loss request: {e}")))?;
    req.weights.validate()?;
    let base = request_path.parent().unwrap_or(Path::new("."));
    write_line(out, &evaluate_losses(&req, base)?)
}
