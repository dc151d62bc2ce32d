//! Python bindings for the spectral attention pipeline.
//!
//! Configuration arguments are JSON strings holding partial overrides of the
//! Rust-side defaults; results come back as plain Python objects.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::de::DeserializeOwned;
use serde::Serialize;

use san_core::graph::{self, Graph, Split, Task};
use san_core::san::ModelConfig;
use san_core::spectral::{self, LaplacianKind};
use san_core::train::{self, TrainConfig};
use san_core::wl;

fn err(e: san_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_kind(kind: &str) -> PyResult<LaplacianKind> {
    match kind {
        "combinatorial" => Ok(LaplacianKind::Combinatorial),
        "symmetric" => Ok(LaplacianKind::SymmetricNormalized),
        other => Err(PyValueError::new_err(format!(
            "unknown laplacian kind {other:?} (expected 'combinatorial' or 'symmetric')"
        ))),
    }
}

fn parse_task(task: &str) -> PyResult<Task> {
    serde_json::from_value(serde_json::Value::String(task.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown task {task:?}")))
}

/// Start from the Rust default and overlay the keys of a partial JSON
/// object; unknown keys are rejected.
fn merged_config<T: Serialize + DeserializeOwned>(default: T, overrides: Option<&str>) -> PyResult<T> {
    let mut base = serde_json::to_value(&default).map_err(|e| PyValueError::new_err(e.to_string()))?;
    if let Some(text) = overrides {
        let patch: serde_json::Value =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("bad config JSON: {e}")))?;
        let obj = patch
            .as_object()
            .ok_or_else(|| PyValueError::new_err("config JSON must be an object"))?;
        let target = base.as_object_mut().expect("config serializes to an object");
        for (k, v) in obj {
            if !target.contains_key(k) {
                return Err(PyValueError::new_err(format!("unknown config key {k:?}")));
            }
            target.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(base).map_err(|e| PyValueError::new_err(format!("bad config value: {e}")))
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<PyObject> {
    Ok(match v {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_py(py),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py(py)
            }
        }
        serde_json::Value::String(s) => s.into_py(py),
        serde_json::Value::Array(items) => {
            let list = PyList::empty_bound(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py(py)
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new_bound(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_py(py)
        }
    })
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

// ---------------------------------------------------------------- graph

#[pyclass(name = "Graph")]
#[derive(Clone)]
struct PyGraph {
    inner: Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (num_nodes, edges, node_features=None, edge_features=None))]
    fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        node_features: Option<Vec<Vec<f64>>>,
        edge_features: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let mut g = Graph::new(num_nodes, edges).map_err(err)?;
        if let Some(x) = node_features {
            g = g.with_node_features(x).map_err(err)?;
        }
        if let Some(e) = edge_features {
            g = g.with_edge_features(e).map_err(err)?;
        }
        Ok(PyGraph { inner: g })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    #[getter]
    fn node_labels(&self) -> Option<Vec<usize>> {
        self.inner.node_labels.clone()
    }

    #[getter]
    fn node_features(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.node_features.clone()
    }

    fn has_edge(&self, i: usize, j: usize) -> bool {
        self.inner.has_edge(i, j)
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    fn adjacency_matrix(&self) -> Vec<Vec<f64>> {
        self.inner.adjacency_matrix()
    }

    fn permuted(&self, perm: Vec<usize>) -> PyResult<PyGraph> {
        Ok(PyGraph { inner: self.inner.permuted(&perm).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("Graph(num_nodes={}, num_edges={})", self.inner.num_nodes, self.inner.num_edges())
    }
}

#[pyclass(name = "Dataset")]
#[derive(Clone)]
struct PyDataset {
    inner: graph::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (graphs, task, train=vec![], val=vec![], test=vec![]))]
    fn new(
        graphs: Vec<PyGraph>,
        task: &str,
        train: Vec<usize>,
        val: Vec<usize>,
        test: Vec<usize>,
    ) -> PyResult<Self> {
        let ds = graph::Dataset::new(
            graphs.into_iter().map(|g| g.inner).collect(),
            parse_task(task)?,
            Split { train, val, test },
        )
        .map_err(err)?;
        Ok(PyDataset { inner: ds })
    }

    #[getter]
    fn graphs(&self) -> Vec<PyGraph> {
        self.inner.graphs.iter().map(|g| PyGraph { inner: g.clone() }).collect()
    }

    #[getter]
    fn task(&self) -> String {
        serde_json::to_value(self.inner.task)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .expect("task serializes to a string")
    }

    #[getter]
    fn split(&self) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let s = &self.inner.split;
        (s.train.clone(), s.val.clone(), s.test.clone())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        graph::save_graphs(&self.inner, path.as_ref()).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<PyDataset> {
        Ok(PyDataset { inner: graph::load_graphs(path.as_ref()).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.graphs.len()
    }
}

// ---------------------------------------------------------------- generators

#[pyfunction]
fn gen_sbm(num_nodes: usize, communities: usize, p_in: f64, p_out: f64, seed: u64) -> PyResult<PyGraph> {
    Ok(PyGraph { inner: graph::gen_sbm(num_nodes, communities, p_in, p_out, seed).map_err(err)? })
}

#[pyfunction]
fn gen_erdos_renyi(num_nodes: usize, p: f64, seed: u64) -> PyResult<PyGraph> {
    Ok(PyGraph { inner: graph::gen_erdos_renyi(num_nodes, p, seed).map_err(err)? })
}

#[pyfunction]
fn gen_cycle(n: usize) -> PyResult<PyGraph> {
    Ok(PyGraph { inner: graph::gen_cycle(n).map_err(err)? })
}

#[pyfunction]
fn gen_complete(n: usize) -> PyResult<PyGraph> {
    Ok(PyGraph { inner: graph::gen_complete(n).map_err(err)? })
}

#[pyfunction]
fn gen_ring_pair(n: usize, m: usize) -> PyResult<PyGraph> {
    Ok(PyGraph { inner: graph::gen_ring_pair(n, m).map_err(err)? })
}

#[pyfunction]
fn enumerate_connected(max_nodes: usize) -> PyResult<Vec<PyGraph>> {
    Ok(graph::enumerate_connected(max_nodes)
        .map_err(err)?
        .into_iter()
        .map(|g| PyGraph { inner: g })
        .collect())
}

// ---------------------------------------------------------------- spectral

#[pyfunction]
#[pyo3(signature = (g, kind="combinatorial"))]
fn laplacian(g: &PyGraph, kind: &str) -> PyResult<Vec<Vec<f64>>> {
    Ok(spectral::laplacian(&g.inner, parse_kind(kind)?))
}

#[pyfunction]
#[pyo3(signature = (g, kind="combinatorial", m=None))]
fn eigendecompose(py: Python<'_>, g: &PyGraph, kind: &str, m: Option<usize>) -> PyResult<PyObject> {
    let sd = spectral::eigendecompose(&g.inner, parse_kind(kind)?).map_err(err)?;
    let mut doc = serde_json::json!({
        "eigenvalues": sd.eigenvalues,
        "eigenvectors": sd.eigenvectors,
        "multiplicity_groups": sd.multiplicity_groups,
        "num_zero_modes": sd.num_zero_modes,
    });
    if let Some(m) = m {
        let sel = spectral::select_eigpairs(&sd, m).map_err(err)?;
        doc["selection"] = serde_json::json!({
            "m": sel.m(),
            "num_real": sel.num_real(),
            "eigenvalues": sel.eigenvalues,
            "eigenvectors": sel.eigenvectors,
            "mask": sel.mask,
        });
    }
    json_to_py(py, &doc)
}

#[pyfunction]
fn diffusion_distance_sq(g: &PyGraph, j1: usize, j2: usize, t: f64) -> PyResult<f64> {
    spectral::diffusion_distance_sq(&g.inner, j1, j2, t).map_err(err)
}

#[pyfunction]
fn biharmonic_distance_sq(g: &PyGraph, j1: usize, j2: usize) -> PyResult<f64> {
    spectral::biharmonic_distance_sq(&g.inner, j1, j2).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (g, as_written=false))]
fn greens_function(g: &PyGraph, as_written: bool) -> PyResult<Vec<Vec<f64>>> {
    spectral::greens_function(&g.inner, as_written).map_err(err)
}

#[pyfunction]
fn heat_kernel(g: &PyGraph, t: f64) -> Vec<Vec<f64>> {
    spectral::heat_kernel(&g.inner, t)
}

// ---------------------------------------------------------------- wl

#[pyfunction]
fn wl1_distinguishes(g1: &PyGraph, g2: &PyGraph) -> bool {
    wl::wl1_distinguishes(&g1.inner, &g2.inner)
}

#[pyfunction]
#[pyo3(signature = (g1, g2, tol=1e-6))]
fn spectra_distinguish(g1: &PyGraph, g2: &PyGraph, tol: f64) -> PyResult<bool> {
    wl::spectra_distinguish(&g1.inner, &g2.inner, tol).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (graphs, tol=1e-6))]
fn discrimination_report(py: Python<'_>, graphs: Vec<PyGraph>, tol: f64) -> PyResult<PyObject> {
    let corpus: Vec<Graph> = graphs.into_iter().map(|g| g.inner).collect();
    let report = wl::discrimination_report(&corpus, tol).map_err(err)?;
    let rows: Vec<serde_json::Value> = report
        .rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "g1": r.g1,
                "g2": r.g2,
                "isomorphic": r.isomorphic,
                "wl1_distinct": r.wl1_distinct,
                "spectra_distinct": r.spectra_distinct,
            })
        })
        .collect();
    json_to_py(
        py,
        &serde_json::json!({
            "rows": rows,
            "wl_blind_spectra_separated": report.wl_blind_spectra_separated,
            "unsound_pairs": report.unsound_pairs,
        }),
    )
}

// ---------------------------------------------------------------- training

#[pyfunction]
#[pyo3(signature = (num_graphs, n, communities, p_in=0.5, p_out=0.05, seed=0))]
fn make_cluster_dataset(
    num_graphs: usize,
    n: usize,
    communities: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> PyResult<PyDataset> {
    Ok(PyDataset {
        inner: train::make_cluster_dataset(num_graphs, n, communities, p_in, p_out, seed)
            .map_err(err)?,
    })
}

/// Train a model; `model_config` / `train_config` are JSON strings with
/// partial overrides of the defaults. Returns the run record as a dict.
#[pyfunction]
#[pyo3(signature = (dataset, model_config=None, train_config=None))]
fn train_model(
    py: Python<'_>,
    dataset: &PyDataset,
    model_config: Option<&str>,
    train_config: Option<&str>,
) -> PyResult<PyObject> {
    let model: ModelConfig = merged_config(ModelConfig::default(), model_config)?;
    let cfg: TrainConfig = merged_config(TrainConfig::default(), train_config)?;
    let record = train::train_model(&dataset.inner, &model, &cfg).map_err(err)?;
    to_py(py, &record)
}

/// One full training run per gamma value; returns a list of run records.
#[pyfunction]
#[pyo3(signature = (dataset, gammas, model_config=None, train_config=None))]
fn gamma_sweep(
    py: Python<'_>,
    dataset: &PyDataset,
    gammas: Vec<f64>,
    model_config: Option<&str>,
    train_config: Option<&str>,
) -> PyResult<PyObject> {
    let model: ModelConfig = merged_config(ModelConfig::default(), model_config)?;
    let cfg: TrainConfig = merged_config(TrainConfig::default(), train_config)?;
    let records = train::gamma_sweep(&dataset.inner, &model, &cfg, &gammas).map_err(err)?;
    to_py(py, &records)
}

#[pyfunction]
fn default_model_config(py: Python<'_>) -> PyResult<PyObject> {
    to_py(py, &ModelConfig::default())
}

#[pyfunction]
fn default_train_config(py: Python<'_>) -> PyResult<PyObject> {
    to_py(py, &TrainConfig::default())
}

#[pymodule]
fn san_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(gen_sbm, m)?)?;
    m.add_function(wrap_pyfunction!(gen_erdos_renyi, m)?)?;
    m.add_function(wrap_pyfunction!(gen_cycle, m)?)?;
    m.add_function(wrap_pyfunction!(gen_complete, m)?)?;
    m.add_function(wrap_pyfunction!(gen_ring_pair, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_connected, m)?)?;
    m.add_function(wrap_pyfunction!(laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(eigendecompose, m)?)?;
    m.add_function(wrap_pyfunction!(diffusion_distance_sq, m)?)?;
    m.add_function(wrap_pyfunction!(biharmonic_distance_sq, m)?)?;
    m.add_function(wrap_pyfunction!(greens_function, m)?)?;
    m.add_function(wrap_pyfunction!(heat_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(wl1_distinguishes, m)?)?;
    m.add_function(wrap_pyfunction!(spectra_distinguish, m)?)?;
    m.add_function(wrap_pyfunction!(discrimination_report, m)?)?;
    m.add_function(wrap_pyfunction!(make_cluster_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train_model, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(default_model_config, m)?)?;
    m.add_function(wrap_pyfunction!(default_train_config, m)?)?;
    Ok(())
}
