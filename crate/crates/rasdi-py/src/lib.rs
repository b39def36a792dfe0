//! Python bindings for the built-in circuits: monolithic and accelerated
//! solves plus interface operator spectra. Arrays come back as nested lists.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rasdi::aitken::{self, ClosedForm, Strategy};
use rasdi::circuits::{builtin, CircuitId, Preset};
use rasdi::dae::{self, Trajectory};

create_exception!(pyrasdi, RasdiError, PyException);

fn err(e: rasdi::Error) -> PyErr {
    RasdiError::new_err(format!("{}: {e}", e.code()))
}

fn preset(name: &str) -> PyResult<Preset> {
    let id: CircuitId = name.parse().map_err(err)?;
    builtin(id).map_err(err)
}

fn check_step(dt: f64, t_end: f64) -> PyResult<()> {
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(PyValueError::new_err("dt must be positive and t_end nonnegative"));
    }
    Ok(())
}

fn states(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.states.iter().map(|z| z.iter().copied().collect()).collect()
}

/// Names of the built-in circuits.
#[pyfunction]
fn circuits() -> Vec<&'static str> {
    vec!["ex1", "ex2", "ex2-swapped", "emt-ts", "nonlinear"]
}

/// Variable names of a built-in circuit in solver order.
#[pyfunction]
fn variables(circuit: &str) -> PyResult<Vec<String>> {
    Ok(preset(circuit)?.circuit.names)
}

/// Reference backward-Euler solve: `(times, states)`.
#[pyfunction]
#[pyo3(signature = (circuit, dt, t_end))]
fn monolithic(circuit: &str, dt: f64, t_end: f64) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    check_step(dt, t_end)?;
    let p = preset(circuit)?;
    let traj = dae::monolithic_solve(&p.circuit.system, dt, t_end).map_err(err)?;
    Ok((traj.times.clone(), states(&traj)))
}

/// Partitioned solve with Aitken acceleration of the interface iteration.
/// `strategy` is "rebuild", "reuse" or "pipelined" (with `window` steps).
#[pyfunction]
#[pyo3(signature = (circuit, dt, t_end, strategy = "rebuild", window = 3))]
fn accelerated<'py>(
    py: Python<'py>,
    circuit: &str,
    dt: f64,
    t_end: f64,
    strategy: &str,
    window: usize,
) -> PyResult<Bound<'py, PyDict>> {
    check_step(dt, t_end)?;
    let strategy = match strategy {
        "rebuild" => Strategy::Rebuild,
        "reuse" => Strategy::ReuseP,
        "pipelined" if window >= 1 => Strategy::Pipelined { m: window },
        other => return Err(PyValueError::new_err(format!("unknown strategy `{other}`"))),
    };
    let p = preset(circuit)?;
    let sys = &p.circuit.system;
    let run = aitken::solve_accelerated(sys, &p.partition, dt, t_end, strategy).map_err(err)?;
    let mono = dae::monolithic_solve(sys, dt, t_end).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("times", run.trajectory.times.clone())?;
    out.set_item("states", states(&run.trajectory))?;
    out.set_item("sweeps", run.sweeps.clone())?;
    out.set_item("max_error_vs_monolithic", run.trajectory.max_diff(&mono))?;
    Ok(out)
}

/// Interface operator of a built-in circuit at step `dt`, with its spectrum
/// and, for the two-inductor circuits, the closed-form radius and threshold.
#[pyfunction]
fn interface_operator<'py>(py: Python<'py>, circuit: &str, dt: f64) -> PyResult<Bound<'py, PyDict>> {
    check_step(dt, 0.0)?;
    let p = preset(circuit)?;
    let (op, map) = aitken::operator_at(&p.circuit.system, &p.partition, dt).map_err(err)?;
    let report = aitken::spectral_report(&op, Some(dt), p.closed_form);
    let matrix: Vec<Vec<f64>> = op.matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
    let slots: Vec<String> = map.gamma.iter().map(|&v| p.circuit.names[v].clone()).collect();
    let out = PyDict::new(py);
    out.set_item("matrix", matrix)?;
    out.set_item("slots", slots)?;
    out.set_item("eigenvalues", report.eigenvalues)?;
    out.set_item("rho", report.rho)?;
    out.set_item("classification", format!("{:?}", report.classification).to_lowercase())?;
    out.set_item("rho_closed_form", report.rho_closed_form)?;
    out.set_item("dt0", report.dt0)?;
    Ok(out)
}

/// Closed-form spectral radius for the two-inductor circuits. Pass `l2` for
/// the grounded variant.
#[pyfunction]
#[pyo3(signature = (dt, l1, c, g, l2 = None))]
fn closed_form_rho(dt: f64, l1: f64, c: f64, g: f64, l2: Option<f64>) -> f64 {
    closed_form(l1, c, g, l2).rho(dt)
}

/// Step size where the closed-form radius crosses 1; `None` if it never does.
#[pyfunction]
#[pyo3(signature = (l1, c, g, l2 = None))]
fn threshold_dt(l1: f64, c: f64, g: f64, l2: Option<f64>) -> Option<f64> {
    closed_form(l1, c, g, l2).dt0()
}

fn closed_form(l1: f64, c: f64, g: f64, l2: Option<f64>) -> ClosedForm {
    match l2 {
        Some(l2) => ClosedForm::Ex2 { l1, l2, c, g },
        None => ClosedForm::Ex1 { l1, c, g },
    }
}

#[pymodule]
fn pyrasdi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RasdiError", m.py().get_type::<RasdiError>())?;
    m.add_function(wrap_pyfunction!(circuits, m)?)?;
    m.add_function(wrap_pyfunction!(variables, m)?)?;
    m.add_function(wrap_pyfunction!(monolithic, m)?)?;
    m.add_function(wrap_pyfunction!(accelerated, m)?)?;
    m.add_function(wrap_pyfunction!(interface_operator, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_rho, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_dt, m)?)?;
    Ok(())
}
