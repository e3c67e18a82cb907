//! Training-set generation: corrupt each clean image at each noise level,
//! sweep the threshold multiplier, and record the optimal label together
//! with the full MSE curve in a JSON Lines manifest.

use std::fs;
use std::io::Write as _;
use std::path::{Component, Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bm3d::{Bm3dError, Bm3dProfile};
use crate::image::{add_awgn, load_image, save_image, ImageError, NoiseSpec};
use crate::sweep::{sweep_lambdas, LambdaGrid, SweepResult};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const PROFILE_FILE: &str = "profile.txt";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no .pgm images found in {0}")]
    Empty(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Invalid { path: PathBuf, line: usize, msg: String },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Bm3d(#[from] Bm3dError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_owned(), source }
}

/// One manifest line. Field order is the on-disk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub clean_path: String,
    pub noisy_path: String,
    pub sigma: f64,
    pub seed: u64,
    pub lambda_star: f64,
    pub mse_star: f64,
    pub mses: Vec<f64>,
    pub grid: LambdaGrid,
}

impl ManifestRecord {
    pub fn sweep(&self) -> SweepResult {
        SweepResult { grid: self.grid, mses: self.mses.clone(), lambda_star: self.lambda_star, mse_star: self.mse_star }
    }

    /// File stem of the clean image, used to name per-record outputs.
    pub fn image_id(&self) -> String {
        Path::new(&self.clean_path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.clean_path.clone())
    }
}

/// A noisy image with its label, paths resolved against the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub noisy_path: PathBuf,
    pub clean_path: PathBuf,
    pub sigma: f64,
    pub seed: u64,
    pub lambda_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    /// Directory the record paths are relative to.
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord = serde_json::from_str(line).map_err(|source| DatasetError::Parse {
                path: path.to_owned(),
                line: i + 1,
                source,
            })?;
            if rec.mses.len() != rec.grid.count {
                return Err(DatasetError::Invalid {
                    path: path.to_owned(),
                    line: i + 1,
                    msg: format!("{} MSE values for a {}-point grid", rec.mses.len(), rec.grid.count),
                });
            }
            records.push(rec);
        }
        let root = path.parent().map(Path::to_owned).unwrap_or_default();
        Ok(Self { root, records })
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn example(&self, rec: &ManifestRecord) -> TrainingExample {
        TrainingExample {
            noisy_path: self.resolve(&rec.noisy_path),
            clean_path: self.resolve(&rec.clean_path),
            sigma: rec.sigma,
            seed: rec.seed,
            lambda_star: rec.lambda_star,
        }
    }

    /// Records whose noise level equals `sigma` (within 1e-9).
    pub fn at_sigma(&self, sigma: f64) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| (r.sigma - sigma).abs() < 1e-9)
    }
}

/// Seed for one (image, sigma) corruption: the first eight bytes, little
/// endian, of `SHA-256(base_seed as u64 LE || name UTF-8 || 0x00 || sigma as f64 bits LE)`.
pub fn record_seed(base_seed: u64, name: &str, sigma: f64) -> u64 {
    let mut h = Sha256::new();
    h.update(base_seed.to_le_bytes());
    h.update(name.as_bytes());
    h.update([0u8]);
    h.update(sigma.to_bits().to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// `.pgm` files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(DatasetError::Empty(dir.to_owned()));
    }
    Ok(files)
}

/// `path` expressed relative to directory `base`, both made absolute first.
pub fn relative_path(path: &Path, base: &Path) -> PathBuf {
    let abs = |p: &Path| p.canonicalize().unwrap_or_else(|_| p.to_owned());
    let (path, base) = (abs(path), abs(base));
    let pc: Vec<Component> = path.components().collect();
    let bc: Vec<Component> = base.components().collect();
    let common = pc.iter().zip(&bc).take_while(|(a, b)| a == b).count();
    let mut out = PathBuf::new();
    for _ in common..bc.len() {
        out.push("..");
    }
    for c in &pc[common..] {
        out.push(c.as_os_str());
    }
    out
}

fn sigma_tag(sigma: f64) -> String {
    format!("{sigma}")
}

#[derive(Debug)]
pub struct DatasetOutcome {
    pub manifest: DatasetManifest,
    /// `(clean image, sigma, error)` for every record that was skipped.
    pub failures: Vec<(PathBuf, f64, String)>,
}

/// Builds one record per (clean image, sigma) pair and writes the noisy
/// images, `manifest.jsonl` and `profile.txt` into `out_dir`.
pub fn generate_dataset(
    clean_dir: &Path,
    sigmas: &[f64],
    grid: &LambdaGrid,
    base_seed: u64,
    out_dir: &Path,
    profile: &Bm3dProfile,
) -> Result<DatasetOutcome, DatasetError> {
    profile.validate()?;
    let images = list_images(clean_dir)?;
    let noisy_dir = out_dir.join("noisy");
    fs::create_dir_all(&noisy_dir).map_err(io_err(&noisy_dir))?;

    let jobs: Vec<(&PathBuf, f64)> = images.iter().flat_map(|p| sigmas.iter().map(move |&s| (p, s))).collect();
    let results: Vec<Result<ManifestRecord, DatasetError>> = jobs
        .par_iter()
        .map(|&(clean_path, sigma)| {
            let name = clean_path.file_stem().unwrap().to_string_lossy().into_owned();
            let clean = load_image(clean_path)?;
            let seed = record_seed(base_seed, &name, sigma);
            // Labels are computed on exactly the 8-bit image the trainer will read.
            let noisy = add_awgn(&clean, NoiseSpec::new(sigma, seed)).quantized();
            let noisy_path = noisy_dir.join(format!("{name}_s{}.pgm", sigma_tag(sigma)));
            save_image(&noisy, &noisy_path)?;
            let sweep = sweep_lambdas(&clean, &noisy, sigma, grid, profile)?;
            Ok(ManifestRecord {
                clean_path: relative_path(clean_path, out_dir).to_string_lossy().into_owned(),
                noisy_path: relative_path(&noisy_path, out_dir).to_string_lossy().into_owned(),
                sigma,
                seed,
                lambda_star: sweep.lambda_star,
                mse_star: sweep.mse_star,
                mses: sweep.mses,
                grid: *grid,
            })
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for ((path, sigma), res) in jobs.iter().zip(results) {
        match res {
            Ok(r) => records.push(r),
            Err(e) => failures.push(((*path).clone(), *sigma, e.to_string())),
        }
    }
    let manifest = DatasetManifest { root: out_dir.to_owned(), records };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let mut f = fs::File::create(&manifest_path).map_err(io_err(&manifest_path))?;
    f.write_all(manifest.to_jsonl().as_bytes()).map_err(io_err(&manifest_path))?;
    let profile_path = out_dir.join(PROFILE_FILE);
    fs::write(&profile_path, profile.to_string()).map_err(io_err(&profile_path))?;
    Ok(DatasetOutcome { manifest, failures })
}
