//! Python bindings: configuration, synthesis, inversion, bounds and the PSWF basis.
//!
//! Fields cross the boundary as row-major nested lists `values[iy][ix]` with
//! `iy` increasing in `y`.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;

use ::ibs2::analysis::{bound_abc as core_bound_abc, mu0 as core_mu0, rel_l2_error};
use ::ibs2::app::config::RunConfig;
use ::ibs2::app::{bounds_run, build_operators, invert_report, invert_run, synth_from_media};
use ::ibs2::app::media::generate_media;
use ::ibs2::born::ScatterDataset;
use ::ibs2::grids::{PixelGrid, RealField};
use ::ibs2::inverse::{a_dagger as core_a_dagger, a_matrix as core_a_matrix, compositions as core_compositions, ReconResult};
use ::ibs2::pswf::{build_basis, BasisCaps, PswfBasis};
use ::ibs2::Error;

create_exception!(ibs2, NumericalError, PyException, "Numerical breakdown inside the library.");

fn py_err(e: Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else if let Error::Io(io) = e {
        PyOSError::new_err(io.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn to_rows(f: &RealField) -> Vec<Vec<f64>> {
    f.values().chunks(f.grid().n()).map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<RealField> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("field must be a square nested list"));
    }
    let grid = PixelGrid::new(n).map_err(py_err)?;
    RealField::from_values(grid, rows.into_iter().flatten().collect()).map_err(py_err)
}

/// Validated run configuration.
#[pyclass(name = "Config", module = "ibs2", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new(json: &str) -> PyResult<Self> {
        Ok(PyConfig { inner: RunConfig::from_json(json).map_err(py_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.freq.k
    }

    #[getter]
    fn ell(&self) -> f64 {
        self.inner.freq.ell
    }

    #[getter]
    fn n_out(&self) -> usize {
        self.inner.grid.n_out
    }

    /// The media `(gamma, eta)` described by the configuration.
    fn media(&self) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let (g, e) = generate_media(&self.inner.media, self.inner.grid().map_err(py_err)?).map_err(py_err)?;
        Ok((to_rows(&g), to_rows(&e)))
    }
}

/// Two-frequency scattering data over the p-nodes.
#[pyclass(name = "Dataset", module = "ibs2", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: ScatterDataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(json).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyDataset { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.k
    }

    #[getter]
    fn ell(&self) -> f64 {
        self.inner.ell
    }

    #[getter]
    fn nodes(&self) -> Vec<[f64; 2]> {
        self.inner.pnodes().nodes().to_vec()
    }

    #[getter]
    fn low(&self) -> Vec<num_complex::Complex64> {
        self.inner.low.values.clone()
    }

    #[getter]
    fn high(&self) -> Vec<num_complex::Complex64> {
        self.inner.high.values.clone()
    }

    fn all_converged(&self) -> bool {
        self.inner.all_converged()
    }
}

/// Output of the inverse Born series.
#[pyclass(name = "Reconstruction", module = "ibs2")]
struct PyRecon {
    inner: ReconResult,
    report: String,
}

#[pymethods]
impl PyRecon {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn term_norms(&self) -> Vec<f64> {
        self.inner.term_norms.clone()
    }

    #[getter]
    fn term_ratios(&self) -> Vec<f64> {
        self.inner.term_ratios.clone()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// Real parts of the partial sum of the first `j` terms.
    fn partial_sum(&self, j: usize) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let s = j
            .checked_sub(1)
            .and_then(|i| self.inner.partial_sums.get(i))
            .ok_or_else(|| PyValueError::new_err(format!("partial sum index {j} outside 1..={}", self.inner.len())))?;
        Ok((to_rows(&s.gamma.re()), to_rows(&s.eta.re())))
    }

    /// JSON summary (term norms, ratios, errors when a truth was given).
    fn report_json(&self) -> String {
        self.report.clone()
    }
}

/// Disk PSWF basis for bandwidth `c`.
#[pyclass(name = "PswfBasis", module = "ibs2")]
struct PyBasis {
    inner: PswfBasis,
}

#[pymethods]
impl PyBasis {
    #[new]
    #[pyo3(signature = (c, alpha_tilde = 0.9))]
    fn new(py: Python<'_>, c: f64, alpha_tilde: f64) -> PyResult<Self> {
        let inner = py.detach(|| build_basis(c, alpha_tilde, BasisCaps::default_for(c))).map_err(py_err)?;
        Ok(PyBasis { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn alpha00(&self) -> num_complex::Complex64 {
        self.inner.alpha00()
    }

    /// Rows `(m, n, l, chi, |alpha|, residual)` of the retained modes.
    fn table(&self) -> Vec<(usize, usize, usize, f64, f64, f64)> {
        self.inner.entries().iter().map(|e| (e.m, e.n, e.l, e.chi, e.alpha.norm(), e.residual)).collect()
    }
}

/// Generates the configured media and synthesizes noisy data; returns `(dataset, gamma, eta)`.
#[pyfunction]
fn synth(py: Python<'_>, config: &PyConfig) -> PyResult<(PyDataset, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let cfg = config.inner.clone();
    let (data, g, e) = py
        .detach(|| -> ::ibs2::Result<_> {
            let (g, e) = generate_media(&cfg.media, cfg.grid()?)?;
            let data = synth_from_media(&cfg, &g, &e)?;
            Ok((data, g, e))
        })
        .map_err(py_err)?;
    Ok((PyDataset { inner: data }, to_rows(&g), to_rows(&e)))
}

/// Synthesizes noisy data for given media.
#[pyfunction]
fn synth_media(py: Python<'_>, config: &PyConfig, gamma: Vec<Vec<f64>>, eta: Vec<Vec<f64>>) -> PyResult<PyDataset> {
    let (g, e) = (from_rows(gamma)?, from_rows(eta)?);
    let cfg = config.inner.clone();
    let data = py.detach(|| synth_from_media(&cfg, &g, &e)).map_err(py_err)?;
    Ok(PyDataset { inner: data })
}

/// Runs the inverse Born series; errors are reported when the truth is given.
#[pyfunction]
#[pyo3(signature = (config, dataset, truth = None))]
fn invert(py: Python<'_>, config: &PyConfig, dataset: &PyDataset, truth: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>) -> PyResult<PyRecon> {
    let truth = truth.map(|(g, e)| Ok::<_, PyErr>((from_rows(g)?, from_rows(e)?))).transpose()?;
    let cfg = config.inner.clone();
    let data = dataset.inner.clone();
    let (inner, report) = py
        .detach(|| -> ::ibs2::Result<_> {
            let (result, ops) = invert_run(&cfg, &data, None)?;
            let bounds = match &truth {
                Some((g, e)) => Some(bounds_run(&cfg, g, e, &ops[0], Some(&result))?),
                None => None,
            };
            let report = invert_report(&result, &ops[0], truth.as_ref().map(|(g, e)| (g, e)), bounds.as_ref())?;
            Ok((result, report))
        })
        .map_err(py_err)?;
    let report = serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(PyRecon { inner, report })
}

/// Bounds report (JSON) for the configuration and the given media.
#[pyfunction]
fn bounds(py: Python<'_>, config: &PyConfig, gamma: Vec<Vec<f64>>, eta: Vec<Vec<f64>>) -> PyResult<String> {
    let (g, e) = (from_rows(gamma)?, from_rows(eta)?);
    let cfg = config.inner.clone();
    let report = py
        .detach(|| -> ::ibs2::Result<_> {
            let ops = build_operators(&cfg, cfg.grid()?, &cfg.pnode_set()?, cfg.pair()?, None)?;
            bounds_run(&cfg, &g, &e, &ops[0], None)
        })
        .map_err(py_err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Relative L² errors `(gamma, eta, joint)`.
#[pyfunction]
fn relative_errors(truth: (Vec<Vec<f64>>, Vec<Vec<f64>>), estimate: (Vec<Vec<f64>>, Vec<Vec<f64>>)) -> PyResult<(f64, f64, f64)> {
    let (tg, te) = (from_rows(truth.0)?, from_rows(truth.1)?);
    let (eg, ee) = (from_rows(estimate.0)?, from_rows(estimate.1)?);
    let r = rel_l2_error((&tg, &te), (&eg, &ee)).map_err(py_err)?;
    Ok((r.gamma, r.eta, r.joint))
}

/// `(a(k), b(k), c(k))` for `k > 1/2`.
#[pyfunction]
fn bound_abc(k: f64) -> PyResult<(f64, f64, f64)> {
    core_bound_abc(k).map_err(py_err)
}

#[pyfunction]
fn mu0(k: f64) -> PyResult<f64> {
    core_mu0(k).map_err(py_err)
}

/// The 2×2 two-frequency matrix `A(p)`.
#[pyfunction]
fn a_matrix(p: [f64; 2], ell: f64) -> PyResult<[[f64; 2]; 2]> {
    core_a_matrix(p, ell).map_err(py_err)
}

/// The regularized inverse `A†(p)`.
#[pyfunction]
fn a_dagger(p: [f64; 2], ell: f64, epsilon: f64) -> PyResult<[[f64; 2]; 2]> {
    core_a_dagger(p, ell, epsilon).map_err(py_err)
}

/// Ordered compositions of `j` into at least two parts.
#[pyfunction]
fn compositions(j: usize) -> Vec<Vec<usize>> {
    core_compositions(j)
}

#[pymodule]
#[pyo3(name = "ibs2")]
fn ibs2_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyRecon>()?;
    m.add_class::<PyBasis>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(synth_media, m)?)?;
    m.add_function(wrap_pyfunction!(invert, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(relative_errors, m)?)?;
    m.add_function(wrap_pyfunction!(bound_abc, m)?)?;
    m.add_function(wrap_pyfunction!(mu0, m)?)?;
    m.add_function(wrap_pyfunction!(a_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(a_dagger, m)?)?;
    m.add_function(wrap_pyfunction!(compositions, m)?)?;
    Ok(())
}
