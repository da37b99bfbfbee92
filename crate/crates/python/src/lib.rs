//! Python bindings: images, masks, k-space, the ADMM solver, metrics and
//! the scalar/matrix shrinkage kernels.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qshs_core as core;
use qshs_core::{Error, Method, ShrinkParams, ShrinkRule};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Format(_) => PyIOError::new_err(e.to_string()),
        Error::Divergence { .. } | Error::NonFiniteObjective { .. } | Error::Numerical(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn square(rows: &[Vec<f64>]) -> PyResult<(usize, Vec<f64>)> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a square list of rows"));
    }
    Ok((n, rows.concat()))
}

fn rows<T: Clone>(data: &[T], n: usize) -> Vec<Vec<T>> {
    data.chunks(n.max(1)).map(|c| c.to_vec()).collect()
}

/// Square real image on the 0-255 scale.
#[pyclass(name = "Image", module = "qshs", skip_from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: core::Image,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let (n, data) = square(&rows)?;
        Ok(Self {
            inner: core::Image::new(n, n, data).map_err(to_py)?,
        })
    }

    /// `shepp-logan`, `smooth` or `shaded-shepp-logan`.
    #[staticmethod]
    fn phantom(name: &str, n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: core::phantom::phantom_by_name(name, n).map_err(to_py)?,
        })
    }

    /// PGM, PNG or IMGF.
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: core::io::read_image(&path).map_err(to_py)?,
        })
    }

    fn write_imgf(&self, path: PathBuf) -> PyResult<()> {
        core::io::write_imgf(&path, &self.inner).map_err(to_py)
    }

    fn write_pgm(&self, path: PathBuf) -> PyResult<()> {
        core::io::write_pgm16(&path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn tolist(&self) -> Vec<Vec<f64>> {
        rows(self.inner.as_slice(), self.inner.size())
    }

    fn __repr__(&self) -> String {
        format!("Image({0}x{0})", self.inner.size())
    }
}

/// Binary k-space sampling pattern.
#[pyclass(name = "Mask", module = "qshs", skip_from_py_object)]
#[derive(Clone)]
struct PyMask {
    inner: core::Mask,
}

#[pymethods]
impl PyMask {
    /// `kind` is `vd`, `radial` or `uniform`.
    #[staticmethod]
    #[pyo3(signature = (n, density, seed = 0, kind = "vd", center_fraction = None))]
    fn generate(
        n: usize,
        density: f64,
        seed: u64,
        kind: &str,
        center_fraction: Option<f64>,
    ) -> PyResult<Self> {
        let spec = core::MaskSpec {
            density,
            kind: kind.parse().map_err(to_py)?,
            center_fraction: center_fraction.unwrap_or(core::MaskSpec::DEFAULT_CENTER_FRACTION),
            seed,
        };
        Ok(Self {
            inner: core::make_mask(n, &spec).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: core::io::read_mask(&path).map_err(to_py)?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        core::io::write_mask(&path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn density(&self) -> f64 {
        self.inner.density()
    }

    fn tolist(&self) -> Vec<Vec<bool>> {
        rows(self.inner.as_slice(), self.inner.size())
    }
}

/// Complex k-space samples in FFT order.
#[pyclass(name = "KSpace", module = "qshs", skip_from_py_object)]
#[derive(Clone)]
struct PyKSpace {
    inner: core::KSpace,
}

#[pymethods]
impl PyKSpace {
    /// Masked unitary DFT of `image` plus complex Gaussian noise on sampled bins.
    #[staticmethod]
    #[pyo3(signature = (image, mask, sigma = 2.5, seed = 0))]
    fn simulate(image: &PyImage, mask: &PyMask, sigma: f64, seed: u64) -> PyResult<Self> {
        let noise = core::NoiseSpec::new(sigma, seed).map_err(to_py)?;
        Ok(Self {
            inner: core::simulate_measurement(&image.inner, &mask.inner, noise).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: core::io::read_kspace(&path).map_err(to_py)?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        core::io::write_kspace(&path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    /// Zero-filled inverse transform (real part).
    fn zero_filled(&self) -> PyImage {
        PyImage {
            inner: core::fft::dft2_inverse_real(&self.inner),
        }
    }

    /// `(re, im)` pairs, row-major.
    fn tolist(&self) -> Vec<Vec<(f64, f64)>> {
        let pairs: Vec<(f64, f64)> = self.inner.as_slice().iter().map(|z| (z.re, z.im)).collect();
        rows(&pairs, self.inner.size())
    }
}

fn parse_rule(rule: &str) -> PyResult<ShrinkRule> {
    rule.parse().map_err(to_py)
}

#[pyclass(name = "SolverConfig", module = "qshs", skip_from_py_object)]
#[derive(Clone)]
struct PySolverConfig {
    inner: core::SolverConfig,
}

#[pymethods]
impl PySolverConfig {
    #[new]
    #[pyo3(signature = (
        method = "qshs", rho = 1.0, q = 0.5, beta = None, max_iters = 1000,
        primal_tol = 1e-4, rule = "decaying", track_objective = true
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        method: &str,
        rho: f64,
        q: f64,
        beta: Option<f64>,
        max_iters: usize,
        primal_tol: f64,
        rule: &str,
        track_objective: bool,
    ) -> PyResult<Self> {
        let inner = core::SolverConfig {
            q,
            beta,
            max_iters,
            primal_tol,
            shrink_rule: parse_rule(rule)?,
            track_objective,
            ..core::SolverConfig::new(method.parse::<Method>().map_err(to_py)?, rho)
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.method.to_string()
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    #[setter]
    fn set_rho(&mut self, rho: f64) {
        self.inner.rho = rho;
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q
    }

    /// Effective `beta` (defaults to `rho`).
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn max_iters(&self) -> usize {
        self.inner.max_iters
    }

    fn __repr__(&self) -> String {
        format!(
            "SolverConfig(method={}, rho={}, q={}, beta={}, max_iters={})",
            self.inner.method,
            self.inner.rho,
            self.inner.q,
            self.inner.beta(),
            self.inner.max_iters
        )
    }
}

#[pyclass(name = "ReconResult", module = "qshs", get_all)]
struct PyReconResult {
    u: Py<PyImage>,
    objective_trace: Vec<f64>,
    primal_residual_u_trace: Vec<f64>,
    primal_residual_h_trace: Vec<f64>,
    u_norm_trace: Vec<f64>,
    iterations_run: usize,
    converged: bool,
    beta_used: f64,
}

/// Runs ADMM from zero initialization.
#[pyfunction]
fn reconstruct(
    py: Python<'_>,
    kspace: &PyKSpace,
    mask: &PyMask,
    config: &PySolverConfig,
) -> PyResult<PyReconResult> {
    let r = py
        .detach(|| core::solve(&kspace.inner, &mask.inner, &config.inner))
        .map_err(to_py)?;
    Ok(PyReconResult {
        u: Py::new(py, PyImage { inner: r.u_final })?,
        objective_trace: r.objective_trace,
        primal_residual_u_trace: r.primal_residual_u_trace,
        primal_residual_h_trace: r.primal_residual_h_trace,
        u_norm_trace: r.u_norm_trace,
        iterations_run: r.iterations_run,
        converged: r.converged,
        beta_used: r.beta_used,
    })
}

/// Golden-section search of `log10(rho)` minimizing MSE (or `-SSIM`) against
/// `truth`. Returns `(best_rho, best_objective, [(log10_rho, objective), ...])`.
#[pyfunction]
#[pyo3(signature = (kspace, mask, truth, config, log10_lo = -3.0, log10_hi = 2.0, tol = 0.05, objective = "mse"))]
#[allow(clippy::too_many_arguments)]
fn tune(
    py: Python<'_>,
    kspace: &PyKSpace,
    mask: &PyMask,
    truth: &PyImage,
    config: &PySolverConfig,
    log10_lo: f64,
    log10_hi: f64,
    tol: f64,
    objective: &str,
) -> PyResult<(f64, f64, Vec<(f64, f64)>)> {
    let spec = core::TuneSpec {
        log10_lo,
        log10_hi,
        tol,
        objective: objective.parse().map_err(to_py)?,
    };
    let base = core::SolverConfig {
        track_objective: false,
        ..config.inner.clone()
    };
    let ssim_params = core::SsimParams::default();
    let r = py
        .detach(|| {
            core::golden_section_tune(
                |x| {
                    let cfg = core::SolverConfig {
                        rho: 10f64.powf(x),
                        ..base.clone()
                    };
                    let u = core::solve(&kspace.inner, &mask.inner, &cfg)?.u_final;
                    match spec.objective {
                        core::TuneObjective::Mse => core::mse(&u, &truth.inner),
                        core::TuneObjective::NegSsim => {
                            Ok(-core::ssim(&u, &truth.inner, &ssim_params)?)
                        }
                    }
                },
                &spec,
            )
        })
        .map_err(to_py)?;
    let probes = r.probes.iter().map(|p| (p.log10_rho, p.objective)).collect();
    Ok((r.best_rho(), r.best_objective, probes))
}

#[pyfunction]
fn mse(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    core::mse(&a.inner, &b.inner).map_err(to_py)
}

/// SSIM with an 11x11 Gaussian window (sigma 1.5) on the 0-255 range.
#[pyfunction]
fn ssim(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    core::ssim(&a.inner, &b.inner, &core::SsimParams::default()).map_err(to_py)
}

fn shrink_params(q: f64, rho: f64, rule: &str) -> PyResult<ShrinkParams> {
    ShrinkParams::with_rule(q, rho, parse_rule(rule)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, q, rho, rule = "decaying"))]
fn scalar_shrink(x: f64, q: f64, rho: f64, rule: &str) -> PyResult<f64> {
    Ok(core::scalar_shrink(x, &shrink_params(q, rho, rule)?))
}

/// The implicit penalty whose prox (with weight `rho`) is `scalar_shrink`.
#[pyfunction]
#[pyo3(signature = (t, q, rho, rule = "decaying"))]
fn gq_value(t: f64, q: f64, rho: f64, rule: &str) -> PyResult<f64> {
    core::gq_value(t, &shrink_params(q, rho, rule)?).map_err(to_py)
}

/// Shrinks the singular values of a 2x2 matrix `[[a, b], [c, d]]`.
#[pyfunction]
#[pyo3(signature = (m, q, rho, rule = "decaying"))]
fn qshs_matrix_prox(m: [[f64; 2]; 2], q: f64, rho: f64, rule: &str) -> PyResult<[[f64; 2]; 2]> {
    let p = shrink_params(q, rho, rule)?;
    let [a, b, c, d] =
        core::qshs_matrix_prox(core::Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]), &p)
            .to_array();
    Ok([[a, b], [c, d]])
}

#[pymodule]
fn qshs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyMask>()?;
    m.add_class::<PyKSpace>()?;
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PyReconResult>()?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(tune, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_shrink, m)?)?;
    m.add_function(wrap_pyfunction!(gq_value, m)?)?;
    m.add_function(wrap_pyfunction!(qshs_matrix_prox, m)?)?;
    Ok(())
}
