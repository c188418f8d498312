//! Python bindings: the main types (grid, profile, data list) and the main
//! operations (build data, evolve, sweep, kernel bounds, blow-up fit, curve
//! lengths) behind a thin serde-backed surface. Structured results come back
//! as plain dictionaries.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use harmlab::data::{self, Orientation, SingularProfileParams, TimeDerivativeMode};
use harmlab::diagnostics::{
    constraint_monitor, curvature_static, fit_blowup_exponent, gap_length, signature_monitor,
    CurveSample, GapConvention,
};
use harmlab::grid::{self, GridSpec, TimeGrid};
use harmlab::kernel::{verify_uniform_l1, EndpointRule};
use harmlab::picard::{
    harmonic_residual, run_fixed_point, run_fixed_point_auto, viscosity_sweep, Prefactor,
    SchemeConfig,
};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py_dict<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_value(value).map_err(err)?;
    json_to_py(py, &json)
}

/// The discretized periodic box.
#[pyclass(name = "Grid", skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: GridSpec,
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (n, points, half_width = 1.0, offset_origin = true))]
    fn new(n: usize, points: usize, half_width: f64, offset_origin: bool) -> PyResult<Self> {
        Ok(PyGrid {
            inner: grid::make_grid(n, points, half_width, offset_origin).map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn points(&self) -> usize {
        self.inner.points
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.inner.half_width
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(n={}, points={}, half_width={}, offset_origin={})",
            self.inner.n, self.inner.points, self.inner.half_width, self.inner.offset_origin
        )
    }
}

/// Parameters of the singular profile (C + z^3 cos|z|^-alpha) phi(z).
#[pyclass(name = "Profile", skip_from_py_object)]
#[derive(Clone)]
struct PyProfile {
    inner: SingularProfileParams,
}

#[pymethods]
impl PyProfile {
    #[new]
    #[pyo3(signature = (offset = 1.0, alpha = 0.75, plateau_radius = 0.4, support_radius = 0.8))]
    fn new(offset: f64, alpha: f64, plateau_radius: f64, support_radius: f64) -> PyResult<Self> {
        let inner = SingularProfileParams {
            offset,
            alpha,
            plateau_radius,
            support_radius,
        };
        inner.validate().map_err(err)?;
        Ok(PyProfile { inner })
    }

    /// Profile value f(z).
    fn value(&self, z: f64) -> f64 {
        data::singular_profile(z, &self.inner)
    }

    /// Closed-form second derivative on the plateau (undefined at z = 0).
    fn second_derivative(&self, z: f64) -> PyResult<f64> {
        data::singular_profile_d2(z, &self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Profile(offset={}, alpha={}, plateau_radius={}, support_radius={})",
            self.inner.offset, self.inner.alpha, self.inner.plateau_radius,
            self.inner.support_radius
        )
    }
}

/// Cauchy data with its admissibility report.
#[pyclass(name = "DataList")]
struct PyDataList {
    inner: data::DataList,
}

#[pymethods]
impl PyDataList {
    /// The admissibility report as a dictionary.
    fn admissibility<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py_dict(py, &self.inner.admissibility)
    }

    /// One metric component as a flat row-major list.
    fn metric_component(&self, mu: usize, nu: usize) -> Vec<f64> {
        self.inner.slice.g.comp(mu, nu).as_slice().to_vec()
    }

    fn grid(&self) -> PyGrid {
        PyGrid {
            inner: self.inner.grid(),
        }
    }

    /// Scalar curvature of the slice (static) as a flat row-major list.
    fn scalar_curvature(&self) -> PyResult<Vec<f64>> {
        let slice = curvature_static(&self.inner).map_err(err)?;
        Ok(slice.scalar.as_slice().to_vec())
    }
}

fn parse_orientation(s: &str) -> PyResult<Orientation> {
    match s {
        "radial" => Ok(Orientation::Radial),
        "longitudinal" => Ok(Orientation::Longitudinal),
        other => Err(PyValueError::new_err(format!(
            "orientation must be 'radial' or 'longitudinal', got '{other}'"
        ))),
    }
}

/// Flat metric plus the singular profile, with the admissibility gate.
#[pyfunction]
#[pyo3(signature = (grid, profile, amplitude, orientation = "radial", h0_amplitude = None))]
fn build_data(
    grid: &PyGrid,
    profile: &PyProfile,
    amplitude: f64,
    orientation: &str,
    h0_amplitude: Option<f64>,
) -> PyResult<PyDataList> {
    let mode = match h0_amplitude {
        None => TimeDerivativeMode::Zero,
        Some(a) => TimeDerivativeMode::SmoothBump { amplitude: a },
    };
    let inner = data::build_singular_data(
        grid.inner,
        &profile.inner,
        amplitude,
        parse_orientation(orientation)?,
        mode,
    )
    .map_err(err)?;
    Ok(PyDataList { inner })
}

fn scheme(horizon: f64, steps: usize, viscosity: f64, max_iters: usize, tol_fix: f64) -> SchemeConfig {
    SchemeConfig {
        horizon,
        steps,
        nu0: viscosity,
        max_iters,
        tol_fix,
        tol_contract: 0.9,
        prefactor: Prefactor::G00,
        endpoint: EndpointRule::ApproxIdentity,
    }
}

/// Runs the fixed-point iteration; returns the contraction record plus
/// monitor summaries.
#[pyfunction]
#[pyo3(signature = (data, horizon, steps, viscosity, max_iters = 40, tol_fix = 1e-8, auto_horizon = false))]
fn evolve<'py>(
    py: Python<'py>,
    data: &PyDataList,
    horizon: f64,
    steps: usize,
    viscosity: f64,
    max_iters: usize,
    tol_fix: f64,
    auto_horizon: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = scheme(horizon, steps, viscosity, max_iters, tol_fix);
    let (fields, record, effective) = if auto_horizon {
        run_fixed_point_auto(&data.inner, &cfg, 6).map_err(err)?
    } else {
        let (f, r) = run_fixed_point(&data.inner, &cfg).map_err(err)?;
        (f, r, cfg)
    };
    let r_excl = 4.0 * fields.grid.spacing();
    let constraint = constraint_monitor(&fields, r_excl).map_err(err)?;
    let signature = signature_monitor(&fields);
    let residual = harmonic_residual(&fields, Prefactor::G00, r_excl).map_err(err)?;
    let out = serde_json::json!({
        "record": record,
        "horizon": effective.horizon,
        "constraint": constraint,
        "signature": signature,
        "residual": residual,
    });
    json_to_py(py, &out)
}

/// Fixed-point runs over a decreasing viscosity sequence.
#[pyfunction]
#[pyo3(signature = (data, horizon, steps, viscosities, max_iters = 60, tol_fix = 1e-8))]
fn sweep<'py>(
    py: Python<'py>,
    data: &PyDataList,
    horizon: f64,
    steps: usize,
    viscosities: Vec<f64>,
    max_iters: usize,
    tol_fix: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = scheme(horizon, steps, viscosities[0], max_iters, tol_fix);
    let outcome = viscosity_sweep(&data.inner, &cfg, &viscosities).map_err(err)?;
    to_py_dict(py, &outcome.summary)
}

/// Time-integrated kernel L1 norms (raw and scaling-collapsed) over a
/// decreasing viscosity list.
#[pyfunction]
fn kernel_bounds<'py>(py: Python<'py>, viscosities: Vec<f64>, horizon: f64) -> PyResult<Bound<'py, PyAny>> {
    let table = verify_uniform_l1(&viscosities, horizon).map_err(err)?;
    to_py_dict(py, &table)
}

/// Log-log blow-up fit of the data-slice scalar curvature around the origin.
#[pyfunction]
fn blowup_fit<'py>(py: Python<'py>, data: &PyDataList, radii: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let slice = curvature_static(&data.inner).map_err(err)?;
    let center = vec![0.0; data.inner.grid().n];
    let fit = fit_blowup_exponent(&slice.scalar, &center, &radii).map_err(err)?;
    to_py_dict(py, &fit)
}

/// Generalized-affine-parameter length of the straight coordinate-time
/// segment from a generic point into the cell adjacent to the origin,
/// evaluated on a freshly evolved history. Returns both conventions.
#[pyfunction]
#[pyo3(signature = (data, horizon, steps, viscosity, samples = 65))]
fn gap_length_to_origin<'py>(
    py: Python<'py>,
    data: &PyDataList,
    horizon: f64,
    steps: usize,
    viscosity: f64,
    samples: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = scheme(horizon, steps, viscosity, 60, 1e-8);
    let (fields, _) = run_fixed_point(&data.inner, &cfg).map_err(err)?;
    let grid = fields.grid;
    let half_cell = grid.spacing() / 2.0;
    let mut from = vec![0.0];
    from.extend(std::iter::repeat(-grid.half_width / 2.0).take(grid.n));
    let mut to = vec![horizon];
    to.extend(std::iter::repeat(half_cell).take(grid.n));
    let curve = CurveSample::line(&from, &to, samples).map_err(err)?;
    let written = gap_length(&curve, &fields, GapConvention::AsWritten).map_err(err)?;
    let rooted = gap_length(&curve, &fields, GapConvention::RootSquares).map_err(err)?;
    let out = serde_json::json!({
        "as_written": written,
        "root_squares": rooted,
        "finite": written.is_finite() && rooted.is_finite(),
    });
    json_to_py(py, &out)
}

/// Number of unknowns of the first-order system in n spatial dimensions.
#[pyfunction]
fn unknown_count(n: usize) -> usize {
    harmlab::tensor::unknown_count(n)
}

/// The smooth mollifier: 1 on the plateau, 0 outside the support.
#[pyfunction]
fn bump(z: f64, plateau_radius: f64, support_radius: f64) -> f64 {
    data::bump(z, plateau_radius, support_radius)
}

/// Discrete Sobolev norm of the 1-d sampled profile at a given order — the
/// regularity probe behind the admissibility checks.
#[pyfunction]
fn profile_sobolev_norm(profile: &PyProfile, points: usize, order: f64) -> PyResult<f64> {
    let g = grid::make_grid(1, points, 1.0, true).map_err(err)?;
    let f = grid::ScalarGridField::from_fn(g, |x| data::singular_profile(x[0], &profile.inner));
    Ok(grid::sobolev_norm(&f, order))
}

/// Sanity probe: time grid spacing for (horizon, steps).
#[pyfunction]
fn time_step(horizon: f64, steps: usize) -> PyResult<f64> {
    Ok(TimeGrid::new(horizon, steps).map_err(err)?.dt())
}

#[pymodule]
fn harmlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyDataList>()?;
    m.add_function(wrap_pyfunction!(build_data, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(blowup_fit, m)?)?;
    m.add_function(wrap_pyfunction!(gap_length_to_origin, m)?)?;
    m.add_function(wrap_pyfunction!(unknown_count, m)?)?;
    m.add_function(wrap_pyfunction!(bump, m)?)?;
    m.add_function(wrap_pyfunction!(profile_sobolev_norm, m)?)?;
    m.add_function(wrap_pyfunction!(time_step, m)?)?;
    Ok(())
}
