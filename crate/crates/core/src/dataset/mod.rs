//! Reproducible synthetic corpora on disk.
//!
//! Layout under the output directory:
//!
//! ```text
//! hr/<id>.png        clean high-resolution input, re-encoded as 8-bit RGB
//! lr/<id>.png        J
//! lrhr/<id>.png      I (clamped)
//! rain/<id>.png      Σ S, gray
//! parsed/<id>.png    parsing labels at HR size (optional)
//! preclamp/<id>.f32  unclamped I as raw f32 (optional, see [`raw`])
//! manifest.json      whole-corpus manifest
//! records.jsonl      one SampleRecord per line
//! ```
//!
//! Images are quantized to 8 bits; the exact physical parameters live in the
//! manifest so that every sample can be replayed bit-exactly.

mod generate;
pub mod raw;
mod split;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::facecrop::ParsedMap;
use crate::imgcore::ImageTensor;
use crate::rainmodel::{physical_params, DegradationConfig, PhysicalParams, RainParams};
use crate::{Error, Result};

pub use generate::{
    generate_dataset, replay_sample, verify_manifest, GenerateOptions, MaskSource, VerifyEntry, VerifyReport,
};
pub use split::{assign_splits, Split, SplitRatios};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";

/// A file written for a sample, relative to the corpus root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFiles {
    pub hr: FileRef,
    pub lr: FileRef,
    pub lrhr: FileRef,
    pub rain_layer: FileRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed_hr: Option<FileRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preclamp_lrhr: Option<FileRef>,
}

impl SampleFiles {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &FileRef)> {
        [
            ("hr", Some(&self.hr)),
            ("lr", Some(&self.lr)),
            ("lrhr", Some(&self.lrhr)),
            ("rain", Some(&self.rain_layer)),
            ("parsed", self.parsed_hr.as_ref()),
            ("preclamp", self.preclamp_lrhr.as_ref()),
        ]
        .into_iter()
        .filter_map(|(k, f)| f.map(|f| (k, f)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    /// Ordinal passed to the parameter sampler.
    pub index: u64,
    /// File name of the high-resolution input.
    pub source: String,
    pub split: Split,
    pub hr_dims: [usize; 3],
    pub lr_dims: [usize; 3],
    pub files: SampleFiles,
    pub params: RainParams,
    pub atmo_value: f64,
    pub transmission_value: f64,
}

/// Input that could not be turned into a sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedInput {
    pub source: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    /// Creation time; not covered by the determinism contract.
    pub created_unix: u64,
    pub config: DegradationConfig,
    pub split_ratios: SplitRatios,
    pub masks: MaskSource,
    pub records: Vec<SampleRecord>,
    #[serde(default)]
    pub failures: Vec<FailedInput>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl Manifest {
    /// Reads `manifest.json` from a corpus directory or a direct file path.
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_owned() };
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let mut m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Corrupt { path: file.clone(), message: e.to_string() })?;
        m.root = file.parent().map(Path::to_owned).unwrap_or_default();
        Ok(m)
    }

    pub fn record(&self, id: &str) -> Result<&SampleRecord> {
        self.records.iter().find(|r| r.id == id).ok_or_else(|| Error::UnknownId(id.to_owned()))
    }

    pub fn path_of(&self, file: &FileRef) -> PathBuf {
        self.root.join(&file.path)
    }

    pub fn split_counts(&self) -> [usize; 3] {
        Split::ALL.map(|s| self.records.iter().filter(|r| r.split == s).count())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads a sample file and checks it against its recorded checksum.
pub(crate) fn read_checked(manifest: &Manifest, file: &FileRef) -> Result<Vec<u8>> {
    let path = manifest.path_of(file);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let digest = sha256_hex(&bytes);
    if digest != file.sha256 {
        return Err(Error::Corrupt { path, message: format!("checksum {digest} != recorded {}", file.sha256) });
    }
    Ok(bytes)
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<ImageTensor> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|source| Error::Image { path: path.to_owned(), source })?;
    let (channels, raw) =
        if img.color().has_color() { (3, img.to_rgb8().into_raw()) } else { (1, img.to_luma8().into_raw()) };
    let (w, h) = (img.width() as usize, img.height() as usize);
    ImageTensor::new(h, w, channels, raw.iter().map(|&v| v as f64 / 255.0).collect())
}

/// A sample decoded from disk.
#[derive(Clone, Debug)]
pub struct LoadedSample {
    pub record: SampleRecord,
    /// Observed low-resolution heavy-rain image (8-bit).
    pub lrhr: ImageTensor,
    /// Clean low-resolution image (8-bit).
    pub lr: ImageTensor,
    pub hr: ImageTensor,
    /// Rebuilt from the recorded parameters, not from the quantized PNGs.
    pub phys: PhysicalParams,
    pub parsed: Option<ParsedMap>,
    /// Unclamped compositor output, when the corpus carries dumps.
    pub preclamp: Option<ImageTensor>,
}

/// Decodes sample `id`, verifying every file against its checksum.
pub fn load_sample(manifest: &Manifest, id: &str) -> Result<LoadedSample> {
    let record = manifest.record(id)?.clone();
    let files = &record.files;
    let png = |f: &FileRef| -> Result<ImageTensor> {
        let bytes = read_checked(manifest, f)?;
        decode_png(&bytes, &manifest.path_of(f))
    };
    let hr = png(&files.hr)?;
    let lr = png(&files.lr)?;
    let lrhr = png(&files.lrhr)?;
    for (t, dims, name) in [(&hr, record.hr_dims, "hr"), (&lr, record.lr_dims, "lr"), (&lrhr, record.lr_dims, "lrhr")] {
        let got = t.dims();
        if [got.0, got.1, got.2] != dims {
            return Err(Error::Corrupt {
                path: manifest.root.join(&record.id),
                message: format!("{name} decodes to {got:?}, manifest says {dims:?}"),
            });
        }
    }
    let parsed = match &files.parsed_hr {
        Some(f) => {
            let bytes = read_checked(manifest, f)?;
            let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
                .map_err(|source| Error::Image { path: manifest.path_of(f), source })?;
            Some(ParsedMap::from_gray(&img.to_luma8())?)
        }
        None => None,
    };
    let preclamp = match &files.preclamp_lrhr {
        Some(f) => Some(raw::decode(&read_checked(manifest, f)?, &manifest.path_of(f))?),
        None => None,
    };
    let [h, w, c] = record.lr_dims;
    let phys = physical_params(h, w, c, &record.params, &manifest.config)?;
    Ok(LoadedSample { record, lrhr, lr, hr, phys, parsed, preclamp })
}
