use std::path::Path;

use leakage_rb::cli::{cmd_check, reproduce as run_reproduction, Figure};
use leakage_rb::config::{Experiment, ExperimentConfig};
use leakage_rb::fitting::{fit_with, FitOptions, FitResult, ModelKind};
use leakage_rb::gatesets::{twirl, GateSet};
use leakage_rb::liouville::{
    leakage_rates, s_coh, s_inc, s_matrix, CMatrix, Channel as CoreChannel, SpaceSpec, C64,
};
use leakage_rb::noise::{filter_channel, FilterParams};
use leakage_rb::protocol::{DecayDataset, DecayPoint};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type Rows = Vec<Vec<C64>>;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_rows(m: &CMatrix) -> Rows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn from_rows(rows: &Rows, d: usize) -> PyResult<CMatrix> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(value_err(format!("expected a {d}x{d} matrix")));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

/// Quantum channel on `H1 ⊕ H2` given by Kraus operators.
#[pyclass(module = "leakage_rb", name = "Channel")]
struct Channel(CoreChannel);

#[pymethods]
impl Channel {
    #[new]
    fn new(d1: usize, d2: usize, kraus: Vec<Rows>) -> PyResult<Self> {
        let space = SpaceSpec::new(d1, d2).map_err(value_err)?;
        let ops = kraus
            .iter()
            .map(|k| from_rows(k, space.d()))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self(CoreChannel::new(space, ops).map_err(value_err)?))
    }

    #[staticmethod]
    fn unitary(d1: usize, d2: usize, u: Rows) -> PyResult<Self> {
        let space = SpaceSpec::new(d1, d2).map_err(value_err)?;
        let u = from_rows(&u, space.d())?;
        Ok(Self(CoreChannel::unitary(space, u).map_err(value_err)?))
    }

    /// Leakage filter on a qubit: leak with probability `p`, Bloch vector `r`.
    #[staticmethod]
    fn filter(p: f64, r: [f64; 3]) -> PyResult<Self> {
        let fp = FilterParams::new(p, r).map_err(value_err)?;
        Ok(Self(filter_channel(&fp).map_err(value_err)?))
    }

    #[getter]
    fn d1(&self) -> usize {
        self.0.space().d1()
    }

    #[getter]
    fn d2(&self) -> usize {
        self.0.space().d2()
    }

    fn kraus(&self) -> Vec<Rows> {
        self.0.kraus().iter().map(to_rows).collect()
    }

    /// Row-major Liouville matrix.
    fn liouville(&self) -> Rows {
        to_rows(self.0.liouville())
    }

    fn apply(&self, rho: Rows) -> PyResult<Rows> {
        let rho = from_rows(&rho, self.0.space().d())?;
        Ok(to_rows(&self.0.apply(&rho)))
    }

    /// `self ∘ first`.
    fn compose(&self, first: &Channel) -> PyResult<Channel> {
        Ok(Self(self.0.compose(&first.0).map_err(value_err)?))
    }

    fn s_inc(&self) -> f64 {
        s_inc(&self.0)
    }

    fn s_coh(&self) -> PyResult<f64> {
        s_coh(&self.0).map_err(value_err)
    }

    fn s_matrix(&self) -> PyResult<[[f64; 2]; 2]> {
        Ok(s_matrix(&self.0).map_err(value_err)?.0)
    }

    fn lambda_pm(&self) -> PyResult<(f64, f64)> {
        s_matrix(&self.0)
            .and_then(|s| s.lambda_pm())
            .map_err(value_err)
    }

    /// `(l_inc, l_coh)`; `l_coh` is None without a leakage subspace.
    fn leakage_rates(&self) -> (f64, Option<f64>) {
        let r = leakage_rates(&self.0);
        (r.l_inc, r.l_coh)
    }

    fn is_cp(&self) -> bool {
        self.0.diagnostics(1e-10).is_cp
    }

    fn is_trace_preserving(&self) -> bool {
        self.0.diagnostics(1e-10).is_trace_preserving
    }

    fn __repr__(&self) -> String {
        format!(
            "Channel(d1={}, d2={}, rank={})",
            self.d1(),
            self.d2(),
            self.0.kraus().len()
        )
    }
}

#[pyclass(module = "leakage_rb", name = "GateSet")]
struct PyGateSet(GateSet);

#[pymethods]
impl PyGateSet {
    #[staticmethod]
    fn pauli() -> Self {
        Self(GateSet::pauli())
    }

    #[staticmethod]
    fn shelving() -> Self {
        Self(GateSet::shelving())
    }

    /// Parses a gate-set JSON document; `checked` verifies unitarity and closure.
    #[staticmethod]
    #[pyo3(signature = (text, checked = true))]
    fn from_json(text: &str, checked: bool) -> PyResult<Self> {
        let gs = if checked {
            GateSet::from_json(text)
        } else {
            GateSet::from_json_unchecked(text)
        };
        Ok(Self(gs.map_err(value_err)?))
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(value_err)
    }

    #[getter]
    fn label(&self) -> &str {
        self.0.label()
    }

    fn __len__(&self) -> usize {
        self.0.size()
    }

    fn gate(&self, i: usize) -> PyResult<Rows> {
        Ok(to_rows(self.0.gate(i).map_err(value_err)?))
    }

    /// Twirl superoperator `mean g ⊗ conj(g)`.
    fn twirl(&self) -> PyResult<Rows> {
        Ok(to_rows(&twirl(&self.0).map_err(value_err)?.matrix))
    }

    fn twirl_idempotence_error(&self) -> PyResult<f64> {
        Ok(twirl(&self.0).map_err(value_err)?.idempotence_error())
    }

    fn twirl_rank(&self) -> PyResult<usize> {
        Ok(twirl(&self.0).map_err(value_err)?.rank(1e-10))
    }

    fn __repr__(&self) -> String {
        format!("GateSet('{}', size={})", self.0.label(), self.0.size())
    }
}

/// Mean survival probability per sequence length.
#[pyclass(module = "leakage_rb", name = "DecayDataset")]
struct Dataset(DecayDataset);

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (m, mean, sem = None, n = None))]
    fn new(
        m: Vec<usize>,
        mean: Vec<f64>,
        sem: Option<Vec<f64>>,
        n: Option<Vec<usize>>,
    ) -> PyResult<Self> {
        let len = m.len();
        let sem = sem.unwrap_or_else(|| vec![0.0; len]);
        let n = n.unwrap_or_else(|| vec![1; len]);
        if mean.len() != len || sem.len() != len || n.len() != len {
            return Err(value_err("m, mean, sem and n must have equal length"));
        }
        let points = (0..len)
            .map(|i| DecayPoint {
                m: m[i],
                mean: mean[i],
                sem: sem[i],
                n: n[i],
            })
            .collect();
        Ok(Self(DecayDataset::from_points(points)))
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self(DecayDataset::from_csv(text).map_err(value_err)?))
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    #[getter]
    fn m(&self) -> Vec<usize> {
        self.0.ms()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.0.means()
    }

    #[getter]
    fn sem(&self) -> Vec<f64> {
        self.0.sems()
    }

    fn __len__(&self) -> usize {
        self.0.points.len()
    }
}

#[pyclass(module = "leakage_rb", name = "FitResult")]
struct Fit(FitResult);

#[pymethods]
impl Fit {
    #[getter]
    fn model(&self) -> String {
        self.0.model.to_string()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.0.names.clone()
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.0.params.clone()
    }

    #[getter]
    fn stderr(&self) -> Vec<f64> {
        self.0.stderr.clone()
    }

    #[getter]
    fn r2(&self) -> Option<f64> {
        self.0.r2
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    #[getter]
    fn degenerate(&self) -> bool {
        self.0.degenerate
    }

    /// `(value, stderr)` of a named parameter.
    fn param(&self, name: &str) -> Option<(f64, f64)> {
        self.0.param(name).map(|e| (e.value, e.stderr))
    }

    fn predict(&self, m: usize) -> f64 {
        self.0.predict(m)
    }

    fn to_json(&self) -> String {
        self.0.to_json_value().to_string()
    }

    fn __repr__(&self) -> String {
        self.0.summary()
    }
}

/// Fits `model` ("single-exp", "double-exp" or "tp-constrained").
#[pyfunction]
#[pyo3(signature = (dataset, model = "single-exp", weighted = true))]
fn fit(dataset: &Dataset, model: &str, weighted: bool) -> PyResult<Fit> {
    let kind: ModelKind = model.parse().map_err(value_err)?;
    let opts = FitOptions {
        weighted,
        ..FitOptions::default()
    };
    fit_with(kind, &dataset.0, &opts)
        .map(Fit)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs the experiment described by a TOML document. Relative gate-set paths
/// resolve against `base_dir`.
#[pyfunction]
#[pyo3(signature = (config_toml, jobs = 1, base_dir = "."))]
fn simulate(py: Python<'_>, config_toml: &str, jobs: usize, base_dir: &str) -> PyResult<Dataset> {
    let cfg = ExperimentConfig::from_toml_str(config_toml).map_err(value_err)?;
    let exp = Experiment::from_config(cfg, Path::new(base_dir)).map_err(value_err)?;
    py.detach(|| exp.run(jobs.max(1)))
        .map(Dataset)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Regenerates a figure ("fig1" or "fig2") and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (figure, seed = None, jobs = 1, oracle_samples = None))]
fn reproduce(
    py: Python<'_>,
    figure: &str,
    seed: Option<u64>,
    jobs: usize,
    oracle_samples: Option<usize>,
) -> PyResult<String> {
    let figure = match figure {
        "fig1" => Figure::Fig1,
        "fig2" => Figure::Fig2,
        other => return Err(value_err(format!("unknown figure '{other}'"))),
    };
    let rep = py
        .detach(|| run_reproduction(figure, seed, jobs.max(1), oracle_samples))
        .map_err(|e| PyRuntimeError::new_err(e.message))?;
    serde_json::to_string(&rep.report).map_err(value_err)
}

/// Built-in numerical checks as `(name, pass, detail)` tuples.
#[pyfunction]
#[pyo3(signature = (gateset = None))]
fn check(gateset: Option<&PyGateSet>) -> Vec<(String, bool, String)> {
    cmd_check(gateset.map(|g| &g.0))
        .into_iter()
        .map(|o| (o.name, o.pass, o.detail))
        .collect()
}

#[pymodule]
#[pyo3(name = "leakage_rb")]
fn leakage_rb_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Channel>()?;
    m.add_class::<PyGateSet>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Fit>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
