//! Python bindings: run scenarios, inspect traces, sweep the strategy grid and
//! use the proof and lottery primitives directly.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use statechan::crypto::nizk::statement;
use statechan::crypto::{nizk_prove, nizk_prove_with_nonce, nizk_verify, NizkProof, Point, Scalar};
use statechan::games::lottery;
use statechan::sim::{self, IdealOutcome, Protocol, RunOptions};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn label<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// A validated scenario document.
#[pyclass(module = "statechan_py")]
#[derive(Clone)]
struct Scenario {
    inner: sim::Scenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: sim::Scenario::from_json(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn protocol(&self) -> String {
        label(&self.inner.protocol)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[pyo3(signature = (inject_fault = false))]
    fn run(&self, py: Python<'_>, inject_fault: bool) -> PyResult<Trace> {
        let inner = py
            .allow_threads(|| sim::run_scenario(&self.inner, &RunOptions { inject_fault }))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(Trace { inner })
    }

    /// Honest deltas and outputs in the ideal world, or `None` if the
    /// scenario has no ideal counterpart.
    fn ideal(&self) -> Option<(String, BTreeMap<u32, i64>, BTreeMap<u32, BTreeMap<u32, String>>)> {
        match sim::ideal_outcome(&self.inner) {
            IdealOutcome::Mapped {
                settlement,
                deltas,
                outputs,
            } => Some((label(&settlement), deltas, outputs)),
            IdealOutcome::Unmappable(_) => None,
        }
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?}, protocol={}, n={})", self.inner.name, self.protocol(), self.inner.n)
    }
}

/// The record of one run.
#[pyclass(module = "statechan_py")]
struct Trace {
    inner: sim::Trace,
}

#[pymethods]
impl Trace {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: sim::Trace::from_json(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn outcome(&self) -> String {
        label(&self.inner.outcome)
    }

    #[getter]
    fn settlement(&self) -> String {
        label(&self.inner.settlement)
    }

    #[getter]
    fn initial_wallets(&self) -> Vec<u64> {
        self.inner.initial_wallets.clone()
    }

    #[getter]
    fn final_wallets(&self) -> Vec<u64> {
        self.inner.final_wallets.clone()
    }

    #[getter]
    fn final_escrow(&self) -> u64 {
        self.inner.final_escrow
    }

    #[getter]
    fn aborter(&self) -> Option<u32> {
        self.inner.aborter
    }

    #[getter]
    fn outputs(&self) -> BTreeMap<u32, BTreeMap<u32, String>> {
        self.inner.outputs.clone()
    }

    /// Wallet change per party, keyed from 1.
    fn deltas(&self) -> BTreeMap<u32, i64> {
        (1..=self.inner.n as u32).map(|p| (p, self.inner.delta(p))).collect()
    }

    fn accepted_triggers(&self) -> usize {
        self.inner.accepted_triggers()
    }

    fn accepted_disputes(&self) -> usize {
        self.inner.accepted_disputes()
    }

    /// Invariant violations, empty when every check passes.
    fn violations(&self) -> Vec<String> {
        sim::check_invariants(&self.inner).violations.iter().map(|v| v.to_string()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Trace(settlement={}, deltas={:?})", self.settlement(), self.deltas())
    }
}

#[pyfunction]
#[pyo3(signature = (text, inject_fault = false))]
fn run_scenario(py: Python<'_>, text: &str, inject_fault: bool) -> PyResult<Trace> {
    Scenario::from_json(text)?.run(py, inject_fault)
}

/// Runs the deviation grid. Returns `(case count, failures)`, each failure a
/// `(name, problem)` pair.
#[pyfunction]
#[pyo3(signature = (protocol, ns, executions = 2, seed = 1, ideal_up_to = 3))]
fn sweep(
    py: Python<'_>,
    protocol: &str,
    ns: Vec<usize>,
    executions: u32,
    seed: u64,
    ideal_up_to: usize,
) -> PyResult<(usize, Vec<(String, String)>)> {
    let protocol: Protocol = serde_json::from_value(serde_json::Value::String(protocol.to_owned())).map_err(value_err)?;
    let ideal_ns: Vec<usize> = ns.iter().copied().filter(|&n| n <= ideal_up_to).collect();
    let summary = py
        .allow_threads(|| sim::sweep(protocol, &ns, &ideal_ns, executions, seed))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let failures = summary
        .failures()
        .map(|r| {
            let mut problems = r.violations.clone();
            if let Some(Err(e)) = &r.ideal {
                problems.push(format!("[ideal] {e}"));
            }
            (r.name.clone(), problems.join("; "))
        })
        .collect();
    Ok((summary.cases(), failures))
}

fn scalar(s: &str) -> PyResult<Scalar> {
    Scalar::from_hex(s).map_err(value_err)
}

fn point(s: &str) -> PyResult<Point> {
    Point::from_hex(s).map_err(value_err)
}

/// `(X, Y) = (x·G, x·H)` as compressed hex.
#[pyfunction]
fn nizk_statement(x: &str, h: &str) -> PyResult<(String, String)> {
    let (px, py) = statement(&scalar(x)?, &Point::generator(), &point(h)?);
    Ok((px.to_hex(), py.to_hex()))
}

/// Proves knowledge of `x` with `X = x·G` and `Y = x·H`. Returns `(KX, KY, s)`.
#[pyfunction]
#[pyo3(signature = (x, h, k = None, seed = None))]
fn nizk_prove_hex(x: &str, h: &str, k: Option<&str>, seed: Option<u64>) -> PyResult<(String, String, String)> {
    let (x, h, g) = (scalar(x)?, point(h)?, Point::generator());
    let proof = match (k, seed) {
        (Some(k), _) => nizk_prove_with_nonce(&x, &g, &h, &scalar(k)?),
        (None, Some(seed)) => nizk_prove(&x, &g, &h, &mut ChaCha20Rng::seed_from_u64(seed)),
        (None, None) => nizk_prove(&x, &g, &h, &mut rand::rngs::OsRng),
    }
    .map_err(value_err)?;
    Ok((proof.kx.to_hex(), proof.ky.to_hex(), proof.s.to_hex()))
}

#[pyfunction]
fn nizk_verify_hex(h: &str, x: &str, y: &str, kx: &str, ky: &str, s: &str) -> PyResult<bool> {
    let proof = NizkProof {
        kx: point(kx)?,
        ky: point(ky)?,
        s: scalar(s)?,
    };
    Ok(nizk_verify(&Point::generator(), &point(h)?, &point(x)?, &point(y)?, &proof))
}

/// Zero-based slot of the lottery winner for these inputs.
#[pyfunction]
fn lottery_winner(inputs: Vec<Vec<u8>>) -> PyResult<usize> {
    if inputs.is_empty() {
        return Err(PyValueError::new_err("no inputs"));
    }
    Ok(lottery::winner(&inputs))
}

#[pyfunction]
fn lottery_collateral(n: usize) -> PyResult<u64> {
    if n < 2 {
        return Err(PyValueError::new_err("a lottery needs at least two parties"));
    }
    Ok(lottery::lottery_collateral(n).0)
}

#[pymodule]
fn statechan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Trace>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(nizk_statement, m)?)?;
    m.add_function(wrap_pyfunction!(nizk_prove_hex, m)?)?;
    m.add_function(wrap_pyfunction!(nizk_verify_hex, m)?)?;
    m.add_function(wrap_pyfunction!(lottery_winner, m)?)?;
    m.add_function(wrap_pyfunction!(lottery_collateral, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
