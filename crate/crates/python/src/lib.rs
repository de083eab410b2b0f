//! Python bindings: run presets or configuration files, validate
//! configurations and check the one-dimensional operators.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use elastowave::harness::config::Damping;
use elastowave::harness::experiments::{check_operators as operator_checks, run_simulation, RunOutput};
use elastowave::harness::presets::{preset, PresetOverrides, PRESET_NAMES};
use elastowave::harness::{parse_config, RunConfig, Simulation};
use elastowave::Error;

/// `(degree, quadrature, sbp_residual, derivative_error, weight_sum_error)`.
type OperatorRow = (usize, String, f64, f64, f64);

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::DivergenceDetected { .. } | Error::NonConvergence { .. } | Error::GeometryInsufficient(_) => {
            PyRuntimeError::new_err(err.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn damping(tol: Option<&str>) -> PyResult<Option<Damping>> {
    match tol {
        None => Ok(None),
        Some("auto") => Ok(Some(Damping::Auto)),
        Some(t) => t
            .trim()
            .parse()
            .map(|v| Some(Damping::Tol(v)))
            .map_err(|_| PyValueError::new_err(format!("tol must be 'auto' or a number, got '{t}'"))),
    }
}

fn execute(py: Python<'_>, cfg: RunConfig, output_dir: Option<PathBuf>) -> PyResult<Py<PyDict>> {
    let (out, dt, elements) = py
        .detach(move || -> elastowave::Result<(RunOutput, f64, usize)> {
            let sim = Simulation::new(&cfg)?;
            let out = run_simulation(&sim, output_dir.as_deref())?;
            Ok((out, sim.dt, sim.solver.mesh().num_elements()))
        })
        .map_err(to_py)?;
    let summary = PyDict::new(py);
    summary.set_item("steps", out.steps)?;
    summary.set_item("dt", dt)?;
    summary.set_item("elements", elements)?;
    summary.set_item("energy", out.energy.clone())?;
    summary.set_item("linf", out.linf.clone())?;
    let receivers = PyDict::new(py);
    for r in &out.receivers {
        receivers.set_item(&r.name, (r.times.clone(), r.samples.clone()))?;
    }
    summary.set_item("receivers", receivers)?;
    Ok(summary.unbind())
}

/// Names of the built-in benchmark presets.
#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    PRESET_NAMES.to_vec()
}

/// Resolved configuration text of a preset after the given overrides.
#[pyfunction]
#[pyo3(signature = (name, elements=None, degree=None, theta=None, t_end=None, tol=None))]
fn preset_text(
    name: &str,
    elements: Option<usize>,
    degree: Option<usize>,
    theta: Option<f64>,
    t_end: Option<f64>,
    tol: Option<&str>,
) -> PyResult<String> {
    let overrides = PresetOverrides { elements, degree, theta, t_end, damping: damping(tol)? };
    Ok(preset(name, &overrides).map_err(to_py)?.to_text())
}

/// Parses and validates configuration text; returns its normalized form.
#[pyfunction]
fn parse_config_text(text: &str) -> PyResult<String> {
    Ok(parse_config(text).map_err(to_py)?.to_text())
}

/// Runs a preset. Returns a dict with `steps`, `dt`, `elements`, the
/// `energy` and `linf` series as `(t, value)` lists, and `receivers`
/// mapping each name to `(times, samples)`.
#[pyfunction]
#[pyo3(signature = (name, elements=None, degree=None, theta=None, t_end=None, tol=None, output_dir=None))]
#[allow(clippy::too_many_arguments)]
fn run_preset(
    py: Python<'_>,
    name: &str,
    elements: Option<usize>,
    degree: Option<usize>,
    theta: Option<f64>,
    t_end: Option<f64>,
    tol: Option<&str>,
    output_dir: Option<PathBuf>,
) -> PyResult<Py<PyDict>> {
    let overrides = PresetOverrides { elements, degree, theta, t_end, damping: damping(tol)? };
    let cfg = preset(name, &overrides).map_err(to_py)?;
    execute(py, cfg, output_dir)
}

/// Runs the simulation described by configuration text.
#[pyfunction]
#[pyo3(signature = (text, output_dir=None))]
fn run_config(py: Python<'_>, text: &str, output_dir: Option<PathBuf>) -> PyResult<Py<PyDict>> {
    let cfg = parse_config(text).map_err(to_py)?;
    execute(py, cfg, output_dir)
}

/// Operator residuals for degrees 1..=max_degree as a list of
/// `(degree, quadrature, sbp_residual, derivative_error, weight_sum_error)`.
#[pyfunction]
#[pyo3(signature = (max_degree=12))]
fn check_operators(max_degree: usize) -> PyResult<Vec<OperatorRow>> {
    Ok(operator_checks(max_degree)
        .map_err(to_py)?
        .into_iter()
        .map(|r| (r.degree, r.kind.name().to_string(), r.sbp_residual, r.derivative_error, r.weight_sum_error))
        .collect())
}

/// Reads a configuration file from disk and runs it.
#[pyfunction]
#[pyo3(signature = (path, output_dir=None))]
fn run_file(py: Python<'_>, path: PathBuf, output_dir: Option<PathBuf>) -> PyResult<Py<PyDict>> {
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| to_py(Error::Io(e)))?;
    run_config(py, &text, output_dir)
}

#[pymodule]
fn pyelastowave(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset_text, m)?)?;
    m.add_function(wrap_pyfunction!(parse_config_text, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_file, m)?)?;
    m.add_function(wrap_pyfunction!(check_operators, m)?)?;
    Ok(())
}
