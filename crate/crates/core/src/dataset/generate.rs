use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{
    assign_splits, raw, read_checked, sha256_hex, FailedInput, FileRef, Manifest, SampleFiles, SampleRecord, Split,
    SplitRatios, MANIFEST_FILE, RECORDS_FILE,
};
use crate::facecrop::{synth_face_mask, ParsedMap};
use crate::imgcore::{clamp01, io, ImageTensor};
use crate::rainmodel::{degrade_full, sample_params, DegradationConfig, Degraded};
use crate::{par, Error, Result};

/// Where parsing maps for the `parsed/` directory come from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    #[default]
    None,
    /// Geometric masks from [`synth_face_mask`], seeded per sample.
    Synthetic,
    /// `<dir>/<input stem>.png` label images at HR size.
    Directory(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateOptions {
    pub split_ratios: SplitRatios,
    /// Also write unclamped `f32` dumps of the observation.
    pub write_preclamp: bool,
    pub masks: MaskSource,
    /// Use only the first `count` inputs (in file-name order).
    pub count: Option<usize>,
    /// Worker cap; `None` uses all available parallelism.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            split_ratios: SplitRatios::default(),
            write_preclamp: true,
            masks: MaskSource::None,
            count: None,
            threads: None,
        }
    }
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn list_inputs(hr_dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(hr_dir).map_err(|e| Error::io(hr_dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(hr_dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if path.is_file() && is_image {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Sample ids from file stems; a repeated stem gets its extension appended.
fn make_ids(files: &[PathBuf]) -> Vec<String> {
    let mut seen = HashSet::new();
    files
        .iter()
        .map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let mut id = stem.clone();
            if !seen.insert(id.clone()) {
                let ext = p.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                id = format!("{stem}_{ext}");
                let mut n = 1;
                while !seen.insert(id.clone()) {
                    id = format!("{stem}_{ext}_{n}");
                    n += 1;
                }
            }
            id
        })
        .collect()
}

/// Encoded files of one sample, keyed by their subdirectory.
struct Rendered {
    degraded: Degraded,
    files: Vec<(&'static str, Vec<u8>)>,
}

fn rel_path(kind: &str, id: &str) -> String {
    let ext = if kind == "preclamp" { "f32" } else { "png" };
    format!("{kind}/{id}.{ext}")
}

fn render(
    hr: &ImageTensor,
    config: &DegradationConfig,
    index: u64,
    mask: Option<&ParsedMap>,
    write_preclamp: bool,
) -> Result<Rendered> {
    let degraded = degrade_full(hr, config, index)?;
    let rain = clamp01(&degraded.phys.rain_sum()?);
    let mut files = vec![
        ("hr", io::encode_png(hr)?),
        ("lr", io::encode_png(&degraded.lr)?),
        ("lrhr", io::encode_png(&degraded.lrhr)?),
        ("rain", io::encode_png(&rain)?),
    ];
    if let Some(m) = mask {
        files.push(("parsed", io::encode_dynamic_png(&image::DynamicImage::ImageLuma8(m.to_gray()))?));
    }
    if write_preclamp {
        files.push(("preclamp", raw::encode(&degraded.lrhr_preclamp)));
    }
    Ok(Rendered { degraded, files })
}

fn mask_for(masks: &MaskSource, source: &Path, hr: &ImageTensor, seed: u64) -> Result<Option<ParsedMap>> {
    let map = match masks {
        MaskSource::None => return Ok(None),
        MaskSource::Synthetic => synth_face_mask(hr.height(), hr.width(), seed)?,
        MaskSource::Directory(dir) => {
            let stem = source.file_stem().unwrap_or_default();
            ParsedMap::load_png(&dir.join(stem).with_extension("png"))?
        }
    };
    if (map.height(), map.width()) != (hr.height(), hr.width()) {
        return Err(Error::invalid(format!(
            "parsing map is {}x{}, image is {}x{}",
            map.height(),
            map.width(),
            hr.height(),
            hr.width()
        )));
    }
    Ok(Some(map))
}

fn process(
    source: &Path,
    id: &str,
    index: u64,
    config: &DegradationConfig,
    options: &GenerateOptions,
    out_dir: &Path,
) -> Result<SampleRecord> {
    let hr = io::load_rgb(source)?;
    let seed = sample_params(config, index).sample_seed;
    let mask = mask_for(&options.masks, source, &hr, seed)?;
    let Rendered { degraded, files } = render(&hr, config, index, mask.as_ref(), options.write_preclamp)?;

    let mut refs = Vec::with_capacity(files.len());
    for (kind, bytes) in &files {
        let rel = rel_path(kind, id);
        let path = out_dir.join(&rel);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        refs.push((*kind, FileRef { path: rel, sha256: sha256_hex(bytes) }));
    }
    let take = |k: &str| refs.iter().find(|(kind, _)| *kind == k).map(|(_, f)| f.clone());
    let lr = degraded.lr.dims();
    let params = degraded.params;
    Ok(SampleRecord {
        id: id.to_owned(),
        index,
        source: source.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        split: Split::Train,
        hr_dims: [hr.height(), hr.width(), hr.channels()],
        lr_dims: [lr.0, lr.1, lr.2],
        files: SampleFiles {
            hr: take("hr").expect("always rendered"),
            lr: take("lr").expect("always rendered"),
            lrhr: take("lrhr").expect("always rendered"),
            rain_layer: take("rain").expect("always rendered"),
            parsed_hr: take("parsed"),
            preclamp_lrhr: take("preclamp"),
        },
        atmo_value: params.atmo_value,
        transmission_value: params.transmission_value,
        params,
    })
}

fn write_json_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Builds a corpus from every PNG/JPEG in `hr_dir`.
///
/// Inputs are processed in lexicographic file-name order; sample `i` of that
/// order is degraded with parameters drawn for index `i`. Unreadable or
/// ill-sized inputs are recorded in [`Manifest::failures`] and skipped.
/// Outputs are byte-identical for any worker count.
pub fn generate_dataset(
    hr_dir: &Path,
    config: &DegradationConfig,
    options: &GenerateOptions,
    out_dir: &Path,
) -> Result<Manifest> {
    config.validate()?;
    options.split_ratios.validate()?;
    let mut inputs = list_inputs(hr_dir)?;
    if let Some(n) = options.count {
        inputs.truncate(n);
    }
    if inputs.is_empty() {
        return Err(Error::invalid(format!("no input images in {}", hr_dir.display())));
    }
    let ids = make_ids(&inputs);

    for kind in ["hr", "lr", "lrhr", "rain", "parsed", "preclamp"] {
        let dir = out_dir.join(kind);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let results = par::with_threads(options.threads, || {
        par::map_indexed(inputs.len(), |i| process(&inputs[i], &ids[i], i as u64, config, options, out_dir))
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (path, result) in inputs.iter().zip(results) {
        match result {
            Ok(r) => records.push(r),
            Err(e) => failures.push(FailedInput {
                source: path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                error: e.to_string(),
            }),
        }
    }

    let record_ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let splits = assign_splits(&record_ids, &options.split_ratios, config.master_seed)?;
    for (r, s) in records.iter_mut().zip(splits) {
        r.split = s;
    }

    let manifest = Manifest {
        toolkit_version: crate::VERSION.to_owned(),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        config: config.clone(),
        split_ratios: options.split_ratios,
        masks: options.masks.clone(),
        records,
        failures,
        root: out_dir.to_owned(),
    };

    let mut lines = Vec::new();
    for r in &manifest.records {
        serde_json::to_writer(&mut lines, r)?;
        lines.push(b'\n');
    }
    write_json_atomic(&out_dir.join(RECORDS_FILE), &lines)?;
    let mut doc = serde_json::to_vec_pretty(&manifest)?;
    doc.push(b'\n');
    write_json_atomic(&out_dir.join(MANIFEST_FILE), &doc)?;
    Ok(manifest)
}

/// Regenerates the encoded files of a recorded sample from its stored HR
/// image and the manifest's configuration.
///
/// Parsing maps are only regenerated for synthetic masks; externally
/// supplied maps are returned as stored.
pub fn replay_sample(manifest: &Manifest, record: &SampleRecord) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let hr_bytes = read_checked(manifest, &record.files.hr)?;
    let hr_path = manifest.path_of(&record.files.hr);
    let hr = image::load_from_memory_with_format(&hr_bytes, image::ImageFormat::Png)
        .map_err(|source| Error::Image { path: hr_path.clone(), source })?;
    let rgb = hr.to_rgb8();
    let (w, h) = rgb.dimensions();
    let hr = ImageTensor::new(h as usize, w as usize, 3, rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect())?;

    let seed = sample_params(&manifest.config, record.index).sample_seed;
    let mask = match (&manifest.masks, &record.files.parsed_hr) {
        (MaskSource::Synthetic, _) => Some(synth_face_mask(hr.height(), hr.width(), seed)?),
        (_, Some(f)) => {
            let bytes = read_checked(manifest, f)?;
            let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
                .map_err(|source| Error::Image { path: manifest.path_of(f), source })?;
            Some(ParsedMap::from_gray(&img.to_luma8())?)
        }
        (_, None) => None,
    };
    let write_preclamp = record.files.preclamp_lrhr.is_some();
    Ok(render(&hr, &manifest.config, record.index, mask.as_ref(), write_preclamp)?.files)
}

/// Verification outcome for one record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyEntry {
    pub id: String,
    pub passed: bool,
    pub problems: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub entries: Vec<VerifyEntry>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failed_ids(&self) -> Vec<&str> {
        self.entries.iter().filter(|e| !e.passed).map(|e| e.id.as_str()).collect()
    }
}

fn verify_record(manifest: &Manifest, record: &SampleRecord) -> VerifyEntry {
    let mut problems = Vec::new();
    let expected = sample_params(&manifest.config, record.index);
    if expected != record.params {
        problems.push("recorded parameters differ from the configured sampler".to_owned());
    }
    if !record.params.within(&manifest.config) {
        problems.push("recorded parameters fall outside the configured ranges".to_owned());
    }
    for (kind, f) in record.files.iter() {
        if let Err(e) = read_checked(manifest, f) {
            problems.push(format!("{kind}: {e}"));
        }
    }
    match replay_sample(manifest, record) {
        Ok(files) => {
            for (kind, bytes) in files {
                let recorded = record.files.iter().find(|(k, _)| *k == kind).map(|(_, f)| f);
                match recorded {
                    Some(f) if f.sha256 == sha256_hex(&bytes) => {}
                    Some(_) => problems.push(format!("{kind}: replay does not reproduce the stored file")),
                    None => problems.push(format!("{kind}: missing from record")),
                }
            }
        }
        Err(e) => problems.push(format!("replay failed: {e}")),
    }
    VerifyEntry { id: record.id.clone(), passed: problems.is_empty(), problems }
}

/// Re-derives every sample from its seed and compares against the stored
/// files. Failures are reported per record, never returned as errors.
pub fn verify_manifest(manifest: &Manifest) -> VerifyReport {
    let entries = par::map_indexed(manifest.records.len(), |i| verify_record(manifest, &manifest.records[i]));
    VerifyReport { entries }
}
