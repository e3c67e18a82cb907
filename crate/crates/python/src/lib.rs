//! Python bindings: images, noise, BM3D, metrics, sweeps, datasets and the
//! threshold-predicting CNN.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lambda3d_core::bm3d::{self, Bm3dProfile, DEFAULT_LAMBDA_3D};
use lambda3d_core::cnn::{self, CnnModel, TrainConfig};
use lambda3d_core::dataset::{self, DatasetManifest};
use lambda3d_core::harness::{self, LambdaSource};
use lambda3d_core::image::{self, NoiseSpec};
use lambda3d_core::sweep::{self as sweep_mod, LambdaGrid};

/// Maps library errors onto Python exceptions: anything with an I/O cause
/// becomes `OSError`, everything else `ValueError`.
fn to_py<E: std::error::Error + 'static>(err: E) -> PyErr {
    let mut cur: Option<&(dyn std::error::Error + 'static)> = Some(&err);
    while let Some(e) = cur {
        if e.is::<std::io::Error>() {
            return PyIOError::new_err(err.to_string());
        }
        cur = e.source();
    }
    PyValueError::new_err(err.to_string())
}

/// Grayscale image with intensities nominally in [0, 255], row-major.
#[pyclass(name = "Image", module = "lambda3d", frozen)]
struct PyImage {
    inner: image::Image,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: image::Image::new(width, height, data).map_err(to_py)? })
    }

    /// Reads a binary (P5) PGM file with maxval 255.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: image::load_image(path).map_err(to_py)? })
    }

    /// Writes an 8-bit binary PGM, clamping and rounding each pixel.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        image::save_image(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    /// Pixels as a flat row-major list.
    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn get(&self, row: usize, col: usize) -> PyResult<f64> {
        if row >= self.inner.height() || col >= self.inner.width() {
            return Err(PyValueError::new_err(format!("pixel ({row}, {col}) out of bounds")));
        }
        Ok(self.inner.get(row, col))
    }

    /// Clamped to [0, 255] and rounded, as it would be saved.
    fn quantized(&self) -> Self {
        Self { inner: self.inner.quantized() }
    }

    fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> PyResult<Self> {
        Ok(Self { inner: self.inner.crop(row, col, width, height).map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.width(), self.inner.height())
    }
}

/// BM3D parameters. `Profile()` gives the defaults; keyword arguments
/// override individual fields.
#[pyclass(name = "Profile", module = "lambda3d", frozen)]
struct PyProfile {
    inner: Bm3dProfile,
}

#[pymethods]
impl PyProfile {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut inner = Bm3dProfile::default();
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                let value = v.str()?.to_string();
                let value = if value == "True" || value == "False" { value.to_lowercase() } else { value };
                inner.set(&key, &value).map_err(to_py)?;
            }
        }
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Parses `key=value` lines (with `#` comments) over the defaults.
    #[staticmethod]
    fn from_overrides(text: &str) -> PyResult<Self> {
        Ok(Self { inner: Bm3dProfile::parse_overrides(text).map_err(to_py)? })
    }

    #[getter]
    fn lambda_3d(&self) -> f64 {
        self.inner.lambda_3d
    }

    #[getter]
    fn block_size(&self) -> usize {
        self.inner.block_size
    }

    #[getter]
    fn enable_stage2(&self) -> bool {
        self.inner.enable_stage2
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

fn profile_or_default(profile: Option<&PyProfile>) -> Bm3dProfile {
    profile.map(|p| p.inner.clone()).unwrap_or_default()
}

/// Regression CNN predicting the threshold multiplier for one noise level.
#[pyclass(name = "Model", module = "lambda3d", frozen)]
struct PyModel {
    inner: CnnModel,
}

#[pymethods]
impl PyModel {
    /// Freshly initialized (untrained) model.
    #[staticmethod]
    #[pyo3(signature = (sigma, seed = 0))]
    fn xavier(sigma: f64, seed: u64) -> Self {
        Self { inner: CnnModel::xavier_init(sigma, seed) }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: cnn::load_model(path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        cnn::save_model(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.parameter_count()
    }

    /// Raw (unclamped) predicted multiplier for a noisy image.
    fn predict(&self, noisy: &PyImage) -> PyResult<f64> {
        self.inner.predict(&noisy.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Model(sigma={}, parameters={})", self.inner.sigma, self.inner.parameter_count())
    }
}

#[pyfunction]
fn add_awgn(clean: &PyImage, sigma: f64, seed: u64) -> PyResult<PyImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(PyValueError::new_err("sigma must be finite and non-negative"));
    }
    Ok(PyImage { inner: image::add_awgn(&clean.inner, NoiseSpec::new(sigma, seed)) })
}

#[pyfunction]
#[pyo3(signature = (noisy, sigma, lambda_3d = DEFAULT_LAMBDA_3D, profile = None))]
fn denoise(
    py: Python<'_>,
    noisy: &PyImage,
    sigma: f64,
    lambda_3d: f64,
    profile: Option<&PyProfile>,
) -> PyResult<PyImage> {
    let profile = profile_or_default(profile);
    let img = noisy.inner.clone();
    let out = py.detach(|| bm3d::denoise(&img, sigma, lambda_3d, &profile)).map_err(to_py)?;
    Ok(PyImage { inner: out })
}

#[pyfunction]
fn mse(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    image::mse(&a.inner, &b.inner).map_err(to_py)
}

#[pyfunction]
fn psnr(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    image::psnr(&a.inner, &b.inner).map_err(to_py)
}

#[pyfunction]
fn ssim(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    image::ssim(&a.inner, &b.inner).map_err(to_py)
}

/// Sweeps the 17-point multiplier grid; returns `(lambda_star, mse_star, mses)`.
#[pyfunction]
#[pyo3(signature = (clean, noisy, sigma, profile = None))]
fn sweep(
    py: Python<'_>,
    clean: &PyImage,
    noisy: &PyImage,
    sigma: f64,
    profile: Option<&PyProfile>,
) -> PyResult<(f64, f64, Vec<f64>)> {
    let profile = profile_or_default(profile);
    let (c, n) = (clean.inner.clone(), noisy.inner.clone());
    let r = py.detach(|| sweep_mod::sweep_lambdas(&c, &n, sigma, &LambdaGrid::default(), &profile)).map_err(to_py)?;
    Ok((r.lambda_star, r.mse_star, r.mses))
}

/// Corrupts and labels every PGM in `clean_dir`; returns the record count.
#[pyfunction]
#[pyo3(signature = (clean_dir, out_dir, sigmas, seed = 0, profile = None))]
fn generate_dataset(
    py: Python<'_>,
    clean_dir: PathBuf,
    out_dir: PathBuf,
    sigmas: Vec<f64>,
    seed: u64,
    profile: Option<&PyProfile>,
) -> PyResult<usize> {
    let profile = profile_or_default(profile);
    let o = py
        .detach(|| dataset::generate_dataset(&clean_dir, &sigmas, &LambdaGrid::default(), seed, &out_dir, &profile))
        .map_err(to_py)?;
    Ok(o.manifest.records.len())
}

/// Trains a model on the manifest records at `sigma`; returns
/// `(model, per-epoch mean loss)`.
#[pyfunction]
#[pyo3(signature = (manifest, sigma, epochs = 50, learning_rate = 1e-3, seed = 0))]
fn train(
    py: Python<'_>,
    manifest: PathBuf,
    sigma: f64,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> PyResult<(PyModel, Vec<f64>)> {
    let m = DatasetManifest::load(&manifest).map_err(to_py)?;
    let cfg = TrainConfig { epochs, learning_rate, shuffle_seed: seed, init_seed: seed, ..Default::default() };
    let o = py.detach(|| cnn::train(&m, sigma, &cfg)).map_err(to_py)?;
    Ok((PyModel { inner: o.model }, o.loss_history))
}

/// Evaluates predicted versus default multipliers on the manifest records
/// at `sigma`. With `model=None` the stored sweep labels are used. Returns
/// `(records, summary)` as dictionaries.
#[pyfunction]
#[pyo3(signature = (manifest, sigma, model = None, profile = None))]
fn evaluate<'py>(
    py: Python<'py>,
    manifest: PathBuf,
    sigma: f64,
    model: Option<&PyModel>,
    profile: Option<&PyProfile>,
) -> PyResult<(Vec<Bound<'py, PyDict>>, Bound<'py, PyDict>)> {
    let m = DatasetManifest::load(&manifest).map_err(to_py)?;
    let profile = profile_or_default(profile);
    let model = model.map(|p| p.inner.clone());
    let records = py
        .detach(|| {
            let source = model.as_ref().map_or(LambdaSource::Oracle, LambdaSource::Model);
            harness::evaluate(&m, sigma, source, &profile)
        })
        .map_err(to_py)?;
    let triple = |d: &Bound<'py, PyDict>, suffix: &str, t: &image::MetricTriple| -> PyResult<()> {
        d.set_item(format!("mse_{suffix}"), t.mse)?;
        d.set_item(format!("psnr_{suffix}"), t.psnr)?;
        d.set_item(format!("ssim_{suffix}"), t.ssim)
    };
    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        let d = PyDict::new(py);
        d.set_item("image", &r.image)?;
        d.set_item("sigma", r.sigma)?;
        d.set_item("lambda_pred", r.lambda_pred)?;
        triple(&d, "pred", &r.predicted)?;
        triple(&d, "def", &r.default)?;
        rows.push(d);
    }
    let summary = PyDict::new(py);
    if let Some(s) = harness::summarize(&records) {
        summary.set_item("sigma", s.sigma)?;
        summary.set_item("count", s.count)?;
        summary.set_item("lambda_pred", s.lambda_pred)?;
        triple(&summary, "pred", &s.predicted)?;
        triple(&summary, "def", &s.default)?;
    }
    Ok((rows, summary))
}

#[pymodule]
#[pyo3(name = "lambda3d")]
pub fn lambda3d_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyModel>()?;
    m.add("DEFAULT_LAMBDA_3D", DEFAULT_LAMBDA_3D)?;
    m.add_function(wrap_pyfunction!(add_awgn, m)?)?;
    m.add_function(wrap_pyfunction!(denoise, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
