//! Python bindings: `Graph`, `Formula`, the three solvers and their
//! brute-force references.

use std::collections::BTreeMap;

use cardmso_core::balanced::cbalanced as solve_cbalanced;
use cardmso_core::corpus as shipped;
use cardmso_core::formula::Formula;
use cardmso_core::graph::{Graph, PartitionMode};
use cardmso_core::oracle;
use cardmso_core::partitioning::mso_partition;
use cardmso_core::solver::{self, SolverError, SolverOptions};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn solver_error(e: SolverError) -> PyErr {
    if e.is_budget() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse_mode(mode: &str) -> PyResult<PartitionMode> {
    match mode {
        "vc" => Ok(PartitionMode::VertexCover),
        "nd" => Ok(PartitionMode::NeighborhoodDiversity),
        other => Err(PyValueError::new_err(format!("mode must be 'vc' or 'nd', not {other:?}"))),
    }
}

fn options(mode: &str, k_max: usize, dedup: bool) -> PyResult<SolverOptions> {
    Ok(SolverOptions {
        mode: parse_mode(mode)?,
        k_max,
        dedup,
        ..SolverOptions::default()
    })
}

#[pyclass(name = "Graph", module = "cardmso", frozen)]
pub struct PyGraph {
    inner: Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (n, edges = Vec::new(), names = None))]
    fn new(n: usize, edges: Vec<(usize, usize)>, names: Option<Vec<String>>) -> PyResult<Self> {
        let mut g = Graph::from_edges(n, &edges).map_err(value_error)?;
        if let Some(names) = names {
            if names.len() != n {
                return Err(PyValueError::new_err(format!("{} names for {n} vertices", names.len())));
            }
            for (v, name) in names.into_iter().enumerate() {
                g.set_name(v, name);
            }
        }
        Ok(PyGraph { inner: g })
    }

    /// Reads the `p n m` / `v i name` / `e i j` text format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Graph::parse(text).map(|inner| PyGraph { inner }).map_err(value_error)
    }

    #[staticmethod]
    fn path(n: usize) -> Self {
        PyGraph { inner: Graph::path(n) }
    }

    #[staticmethod]
    fn cycle(n: usize) -> Self {
        PyGraph { inner: Graph::cycle(n) }
    }

    #[staticmethod]
    fn complete(n: usize) -> Self {
        PyGraph { inner: Graph::complete(n) }
    }

    #[staticmethod]
    fn star(leaves: usize) -> Self {
        PyGraph { inner: Graph::star(leaves) }
    }

    #[staticmethod]
    fn complete_bipartite(a: usize, b: usize) -> Self {
        PyGraph {
            inner: Graph::complete_bipartite(a, b),
        }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.inner.n() && v < self.inner.n() && self.inner.has_edge(u, v)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

#[pyclass(name = "Formula", module = "cardmso", frozen)]
pub struct PyFormula {
    inner: Formula,
}

#[pymethods]
impl PyFormula {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Formula::parse(text).map(|inner| PyFormula { inner }).map_err(value_error)
    }

    #[getter]
    fn prefix(&self) -> Vec<String> {
        self.inner.prefix.clone()
    }

    fn params(&self) -> Vec<String> {
        self.inner.params().into_iter().collect()
    }

    /// Copy with every `$name` replaced by its integer value.
    fn with_params(&self, values: BTreeMap<String, i64>) -> PyResult<Self> {
        let (inner, unused) = self.inner.substitute_params(&values).map_err(value_error)?;
        if let Some(name) = unused.first() {
            return Err(PyValueError::new_err(format!("formula has no parameter ${name}")));
        }
        Ok(PyFormula { inner })
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.analyze();
        let d = PyDict::new(py);
        d.set_item("m", s.m)?;
        d.set_item("q_s", s.q_s)?;
        d.set_item("q_v", s.q_v)?;
        d.set_item("constraints", s.constraint_count)?;
        d.set_item("small_threshold", s.small_threshold())?;
        d.set_item("reduce_threshold", s.reduce_threshold())?;
        Ok(d)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Formula({:?})", self.inner.to_string())
    }
}

/// `{"holds", "witness", "alpha", "stats"}`; the witness maps each prefix
/// variable to vertex indices.
#[pyfunction]
#[pyo3(signature = (graph, formula, mode = "vc", k_max = 20, dedup = true))]
fn check<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    formula: &PyFormula,
    mode: &str,
    k_max: usize,
    dedup: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = options(mode, k_max, dedup)?;
    let v = py
        .detach(|| solver::check(&graph.inner, &formula.inner, &opts))
        .map_err(solver_error)?;
    let d = PyDict::new(py);
    d.set_item("holds", v.holds)?;
    match &v.witness {
        Some(w) => {
            let sets = PyDict::new(py);
            for (name, set) in formula.inner.prefix.iter().zip(&w.sets) {
                sets.set_item(name, set.clone())?;
            }
            d.set_item("witness", sets)?;
            d.set_item("alpha", w.alpha.clone())?;
        }
        None => {
            d.set_item("witness", py.None())?;
            d.set_item("alpha", py.None())?;
        }
    }
    let stats = PyDict::new(py);
    stats.set_item("pre_evaluations", v.stats.pre_evaluations)?;
    stats.set_item("prefix_assignments", v.stats.prefix_assignments)?;
    stats.set_item("ilp_solves", v.stats.ilp_solves)?;
    stats.set_item("elapsed", v.stats.elapsed.as_secs_f64())?;
    d.set_item("stats", stats)?;
    Ok(d)
}

/// Parts of a partition into `r` sets that each induce a model of `formula`,
/// or `None`.
#[pyfunction]
#[pyo3(signature = (graph, formula, r, allow_empty = true, mode = "vc", k_max = 20))]
fn partition(
    py: Python<'_>,
    graph: &PyGraph,
    formula: &PyFormula,
    r: usize,
    allow_empty: bool,
    mode: &str,
    k_max: usize,
) -> PyResult<Option<Vec<Vec<usize>>>> {
    let opts = options(mode, k_max, true)?;
    let res = py
        .detach(|| mso_partition(&graph.inner, &formula.inner, r, allow_empty, &opts))
        .map_err(solver_error)?;
    Ok(res.parts)
}

/// `(cut_value, parts)` of a minimum-cut equitable `c`-partition, or `None`.
#[pyfunction]
#[pyo3(signature = (graph, c, allow_empty = true, k_max = 20))]
fn cbalance(
    py: Python<'_>,
    graph: &PyGraph,
    c: usize,
    allow_empty: bool,
    k_max: usize,
) -> PyResult<Option<(usize, Vec<Vec<usize>>)>> {
    let opts = options("vc", k_max, true)?;
    let res = py
        .detach(|| solve_cbalanced(&graph.inner, c, allow_empty, &opts))
        .map_err(solver_error)?;
    Ok(res.map(|r| (r.cut_value, r.parts)))
}

#[pyfunction]
#[pyo3(signature = (graph, formula, cap = oracle::DEFAULT_CAP))]
fn brute_check(graph: &PyGraph, formula: &PyFormula, cap: usize) -> PyResult<bool> {
    oracle::brute_check(&graph.inner, &formula.inner, cap).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (graph, formula, r, allow_empty = true, cap = oracle::DEFAULT_CAP))]
fn brute_partition(graph: &PyGraph, formula: &PyFormula, r: usize, allow_empty: bool, cap: usize) -> PyResult<bool> {
    oracle::brute_partition(&graph.inner, &formula.inner, r, allow_empty, cap).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (graph, c, allow_empty = true, cap = oracle::DEFAULT_CAP))]
fn brute_cbalanced(graph: &PyGraph, c: usize, allow_empty: bool, cap: usize) -> PyResult<Option<usize>> {
    if c == 0 {
        return Err(PyValueError::new_err("c must be at least 1"));
    }
    oracle::brute_cbalanced(&graph.inner, c, allow_empty, cap).map_err(value_error)
}

/// Text of a shipped formula; with no name, the list of names.
#[pyfunction]
#[pyo3(signature = (name = None))]
fn corpus(py: Python<'_>, name: Option<&str>) -> PyResult<Py<PyAny>> {
    match name {
        None => {
            let names: Vec<&str> = shipped::SHIPPED.iter().map(|(n, _)| *n).collect();
            Ok(names.into_pyobject(py)?.into_any().unbind())
        }
        Some(n) => match shipped::shipped(n) {
            Some(text) => Ok(text.into_pyobject(py)?.into_any().unbind()),
            None => Err(PyValueError::new_err(format!("no shipped formula named {n:?}"))),
        },
    }
}

#[pymodule]
fn cardmso(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyFormula>()?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(partition, m)?)?;
    m.add_function(wrap_pyfunction!(cbalance, m)?)?;
    m.add_function(wrap_pyfunction!(brute_check, m)?)?;
    m.add_function(wrap_pyfunction!(brute_partition, m)?)?;
    m.add_function(wrap_pyfunction!(brute_cbalanced, m)?)?;
    m.add_function(wrap_pyfunction!(corpus, m)?)?;
    Ok(())
}
