//! Python bindings: geometry, photon distributions, the exact oracle, the
//! bound checks and the run pipelines.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyOverflowError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use sbs_core::config::{Command, RunConfig};
use sbs_core::qmath::{CMatrix, DensityMatrix};
use sbs_core::{asymptotics, bounds, oracle, pfcast, runs, scatter};

fn to_py(e: sbs_core::Error) -> PyErr {
    match e {
        sbs_core::Error::Capacity { .. } => PyOverflowError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn py_to_json(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.extract::<String>() {
        return Ok(s);
    }
    py.import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn matrix(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a non-empty square matrix"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn density(rows: Vec<Vec<Complex64>>) -> PyResult<DensityMatrix> {
    DensityMatrix::new(matrix(rows)?).map_err(to_py)
}

/// Sphere, displacement, box and photon flux parameters.
#[pyclass(name = "Geometry", from_py_object)]
#[derive(Clone)]
struct PyGeometry {
    inner: scatter::ScatteringGeometry,
}

#[pymethods]
impl PyGeometry {
    #[new]
    #[pyo3(signature = (radius, permittivity, displacement, box_edge, density = 1.0, light_speed = 1.0))]
    fn new(radius: f64, permittivity: f64, displacement: f64, box_edge: f64, density: f64, light_speed: f64) -> PyResult<Self> {
        let inner = scatter::ScatteringGeometry::new(radius, permittivity, displacement, box_edge, density, light_speed)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    fn photon_count(&self, t: f64) -> f64 {
        self.inner.photon_count(t)
    }

    fn __repr__(&self) -> String {
        let g = &self.inner;
        format!(
            "Geometry(radius={}, permittivity={}, displacement={}, box_edge={}, density={}, light_speed={})",
            g.radius, g.permittivity, g.displacement, g.box_edge, g.density, g.light_speed
        )
    }
}

/// Discretized photon distribution, built from a `{"kind": ...}` mapping.
#[pyclass(name = "PhotonDistribution")]
struct PyDistribution {
    inner: scatter::PhotonDistribution,
    geometry: scatter::ScatteringGeometry,
}

#[pymethods]
impl PyDistribution {
    #[new]
    fn new(py: Python<'_>, kind: &Bound<'_, PyAny>, geometry: &PyGeometry) -> PyResult<Self> {
        let parsed: scatter::DistributionKind =
            serde_json::from_str(&py_to_json(py, kind)?).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let inner = scatter::make_distribution(&parsed, &geometry.inner).map_err(to_py)?;
        Ok(Self { inner, geometry: geometry.inner })
    }

    fn __len__(&self) -> usize {
        self.inner.grid().len()
    }

    fn probabilities(&self) -> Vec<f64> {
        self.inner.probs().to_vec()
    }

    /// `tau_D`, or `inf` when there is no decoherence.
    fn decoherence_time(&self) -> PyResult<f64> {
        Ok(asymptotics::decoherence_time(&self.inner, &self.geometry).map_err(to_py)?.as_f64())
    }

    fn decoherence_factor(&self, f: f64, n_t: f64) -> PyResult<f64> {
        asymptotics::decoherence_factor(&self.inner, &self.geometry, f, n_t).map_err(to_py)
    }

    fn decoherence_factor_thermo(&self, f: f64, t: f64) -> PyResult<f64> {
        asymptotics::decoherence_factor_thermo(&self.inner, &self.geometry, f, t).map_err(to_py)
    }

    /// Overlap report (`eta_bar`, `alpha`, `tau_d`, ...) as a dict.
    #[pyo3(signature = (seed = 0))]
    fn overlap_report<'py>(&self, py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let u = scatter::build_relative_unitary(self.inner.grid(), &self.geometry, seed).map_err(to_py)?;
        let report = asymptotics::eta_bars(&u, &self.inner, &self.geometry).map_err(to_py)?;
        json_to_py(py, &report)
    }
}

/// Exact system/fraction state after `n_t` scatterings.
#[pyclass(name = "OutState")]
struct PyOutState {
    inner: oracle::OutState,
}

#[pymethods]
impl PyOutState {
    #[new]
    #[pyo3(signature = (rho_s, env, s1, s2, n_t, f, m, assembled_cap = 1 << 14, dense_cap = 1 << 10))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        rho_s: Vec<Vec<Complex64>>,
        env: Vec<Vec<Complex64>>,
        s1: Vec<Vec<Complex64>>,
        s2: Vec<Vec<Complex64>>,
        n_t: usize,
        f: f64,
        m: f64,
        assembled_cap: usize,
        dense_cap: usize,
    ) -> PyResult<Self> {
        let caps = oracle::OracleCaps { assembled: assembled_cap, dense: dense_cap };
        let inner = oracle::evolve_out_state(&density(rho_s)?, &density(env)?, &matrix(s1)?, &matrix(s2)?, n_t, f, m, caps)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_t(&self) -> usize {
        self.inner.n_t
    }

    #[getter]
    fn f(&self) -> f64 {
        self.inner.f
    }

    fn with_fraction(&self, f: f64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.with_fraction(f).map_err(to_py)? })
    }

    fn system_entropy(&self) -> f64 {
        oracle::system_entropy(&self.inner)
    }

    fn mutual_information(&self) -> PyResult<f64> {
        oracle::mutual_information(&self.inner).map_err(to_py)
    }

    fn tail_norm(&self) -> f64 {
        oracle::coherent_tail_norm(&self.inner)
    }

    fn micro_overlap(&self) -> PyResult<f64> {
        oracle::micro_overlap(&self.inner).map_err(to_py)
    }

    fn macro_overlap(&self) -> PyResult<f64> {
        oracle::macro_overlap(&self.inner).map_err(to_py)
    }

    fn broadcast_distance(&self) -> PyResult<f64> {
        oracle::broadcast_distance(&self.inner).map_err(to_py)
    }

    /// `I(f)` curve with phases, as a dict.
    #[pyo3(signature = (fs, distance = false))]
    fn plateau<'py>(&self, py: Python<'py>, fs: Vec<f64>, distance: bool) -> PyResult<Bound<'py, PyAny>> {
        let curve = oracle::mutual_info_curve(&self.inner, &fs, &Default::default(), None, distance).map_err(to_py)?;
        json_to_py(py, &curve)
    }
}

#[pyfunction]
fn binary_entropy(p: f64) -> PyResult<f64> {
    bounds::binary_entropy(p).map_err(to_py)
}

#[pyfunction]
fn fannes_audenaert(eps: f64, d: usize) -> PyResult<f64> {
    bounds::fannes_audenaert(eps, d).map_err(to_py)
}

#[pyfunction]
fn alicki_fannes(eps: f64, d: usize) -> PyResult<f64> {
    bounds::alicki_fannes(eps, d).map_err(to_py)
}

#[pyfunction]
fn imax_lower_bound(p1: f64, p2: f64, b: f64, fm: f64) -> f64 {
    bounds::imax_lower_bound(p1, p2, b, fm)
}

/// Composite-bound reports for `trials` seeded instances.
#[pyfunction]
fn verify_bound<'py>(py: Python<'py>, seed: u64, trials: usize) -> PyResult<Bound<'py, PyAny>> {
    let rows = bounds::verify_theorem1(seed, trials, Default::default()).map_err(to_py)?;
    json_to_py(py, &rows)
}

/// `P_ij = |<phi_i|e_j>|^2` for basis vectors given as rows.
#[pyfunction]
fn unistochastic(phi: Vec<Vec<Complex64>>) -> PyResult<Vec<Vec<f64>>> {
    let n = phi.len();
    let basis: Vec<_> = phi.into_iter().map(sbs_core::qmath::CVector::from_vec).collect();
    let p = pfcast::unistochastic_from_bases(&basis, &pfcast::computational_basis(n)).map_err(to_py)?;
    Ok((0..n).map(|i| (0..n).map(|j| p.get(i, j)).collect()).collect())
}

/// Stationary distribution of a column-stochastic matrix (rows of `P`).
#[pyfunction]
fn stationary_distribution(p: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let n = p.len();
    let m = pfcast::StochasticMatrix::new(n, p.into_iter().flatten().collect()).map_err(to_py)?;
    Ok(pfcast::stationary_distribution(&m).lambda)
}

/// Run a pipeline (`decoherence`, `overlap`, `plateau`, `bounds`, `pfcast`,
/// `sweep`) from a config dict or JSON string; returns the files written.
#[pyfunction]
#[pyo3(signature = (command, config, out, workers = 1))]
fn run(py: Python<'_>, command: &str, config: &Bound<'_, PyAny>, out: PathBuf, workers: usize) -> PyResult<Vec<String>> {
    let cmd: Command = serde_json::from_value(serde_json::Value::String(command.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown command `{command}`")))?;
    let cfg = RunConfig::from_json_str(&py_to_json(py, config)?).map_err(to_py)?;
    let files = runs::run(cmd, &cfg, &out, workers).map_err(to_py)?;
    Ok(files.into_iter().map(|f| f.display().to_string()).collect())
}

#[pymodule]
fn sbs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGeometry>()?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyOutState>()?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(fannes_audenaert, m)?)?;
    m.add_function(wrap_pyfunction!(alicki_fannes, m)?)?;
    m.add_function(wrap_pyfunction!(imax_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(verify_bound, m)?)?;
    m.add_function(wrap_pyfunction!(unistochastic, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
