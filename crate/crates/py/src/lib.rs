use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use fairgan::data::{encode, load_table, Schema};
use fairgan::fairness::{self, AuditOptions};
use fairgan::theory::{fairgan_toy_equilibrium, Scenario};

fn py_err(e: fairgan::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.kind()))
}

/// Jensen-Shannon divergence (natural log) between two probability vectors.
#[pyfunction]
fn jsd(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    fairness::jsd_values(&p, &q).map_err(py_err)
}

/// P(v=1 | s=1) - P(v=1 | s=0).
#[pyfunction]
fn risk_difference(v: Vec<u8>, s: Vec<u8>) -> PyResult<f64> {
    fairness::risk_difference(&v, &s).map_err(py_err)
}

#[pyfunction]
fn balanced_error_rate(predicted_s: Vec<u8>, s: Vec<u8>) -> PyResult<f64> {
    fairness::balanced_error_rate(&predicted_s, &s).map_err(py_err)
}

/// Exact game values for a scenario given as JSON text; returns JSON text.
#[pyfunction]
fn evaluate_scenario(scenario_json: &str) -> PyResult<String> {
    let scenario: Scenario = serde_json::from_str(scenario_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = scenario.evaluate().map_err(py_err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Conditionals minimizing the fairness-weighted criterion on the binned
/// two-Gaussian toy data: `(g_s1, g_s0, mean_gap)`.
#[pyfunction]
#[pyo3(signature = (lam, iterations = 20000))]
fn toy_equilibrium(lam: f64, iterations: usize) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let eq = fairgan_toy_equilibrium(lam, iterations).map_err(py_err)?;
    Ok((eq.g_s1, eq.g_s0, eq.mean_gap))
}

/// Fairness report of a CSV against its schema; returns JSON text.
#[pyfunction]
#[pyo3(signature = (schema, data, epsilon = 0.3, seed = 0, attacker = true))]
fn audit_csv(py: Python<'_>, schema: PathBuf, data: PathBuf, epsilon: f64, seed: u64, attacker: bool) -> PyResult<String> {
    py.detach(|| {
        let schema = Schema::load(&schema)?;
        let ds = encode(&load_table(&data, &schema)?);
        fairness::audit(&ds, None, &AuditOptions { epsilon, attacker, seed })?.to_json()
    })
    .map_err(py_err)
}

/// Runs the command-line interface in-process; returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("fairgan".to_string()).chain(args).collect();
    py.detach(|| fairgan::cli::run(argv))
}

#[pymodule]
fn fairgan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(jsd, m)?)?;
    m.add_function(wrap_pyfunction!(risk_difference, m)?)?;
    m.add_function(wrap_pyfunction!(balanced_error_rate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(toy_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(audit_csv, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("LOG4", fairgan::theory::LOG4)?;
    Ok(())
}
