//! Python bindings: geometry parsing and kernels, the SQL engine, the dataset
//! generator and an embedded wire-protocol server.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyTuple;
use spatial3d::bench::{generate_dataset, DatasetSpec, DrillStyle};
use spatial3d::kernels::{self, Backend, ExecutorConfig};
use spatial3d::sqlfe::{self, Cell, Outcome};
use spatial3d::store::{GeometryRecord, Store};
use spatial3d::wire::{AuthConfig, ServerHandle};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

fn config(backend: &str, workers: usize, chunk_size: usize) -> PyResult<ExecutorConfig> {
    let backend: Backend = backend
        .parse()
        .map_err(|e: kernels::KernelError| PyValueError::new_err(e.to_string()))?;
    let cfg = match backend {
        Backend::Sequential => ExecutorConfig::sequential(),
        Backend::Parallel => ExecutorConfig::parallel(workers),
    }
    .with_chunk_size(chunk_size);
    cfg.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(cfg)
}

fn kernel_err(e: kernels::KernelError) -> PyErr {
    match e {
        kernels::KernelError::TypeMismatch { .. } => PyTypeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// An immutable 3D geometry parsed from WKT.
#[pyclass(frozen, module = "spatial3d_py")]
struct Geometry {
    inner: spatial3d::Geometry,
}

#[pymethods]
impl Geometry {
    #[new]
    fn new(wkt: &str) -> PyResult<Self> {
        spatial3d::geometry::parse_wkt(wkt)
            .map(|inner| Geometry { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn wkt(&self) -> String {
        spatial3d::geometry::serialize_wkt(&self.inner)
    }

    #[getter]
    fn geom_type(&self) -> &'static str {
        self.inner.type_name()
    }

    /// Face count for meshes, `None` otherwise.
    #[getter]
    fn face_count(&self) -> Option<usize> {
        self.inner.as_mesh().map(|m| m.face_count())
    }

    /// Whether a mesh is closed and consistently oriented.
    #[getter]
    fn is_closed(&self) -> Option<bool> {
        self.inner.as_mesh().map(|m| m.closure().is_closed)
    }

    #[pyo3(signature = (backend = "sequential", workers = 1, chunk_size = kernels::DEFAULT_CHUNK_SIZE))]
    fn volume(&self, py: Python<'_>, backend: &str, workers: usize, chunk_size: usize) -> PyResult<f64> {
        let cfg = config(backend, workers, chunk_size)?;
        let mesh = self
            .inner
            .as_mesh()
            .ok_or_else(|| PyTypeError::new_err(format!("volume needs a mesh, got {}", self.inner.type_name())))?;
        py.detach(|| kernels::mesh_volume(mesh, &cfg))
            .map(|v| v.value)
            .map_err(kernel_err)
    }

    #[pyo3(signature = (other, backend = "sequential", workers = 1, chunk_size = kernels::DEFAULT_CHUNK_SIZE))]
    fn distance(
        &self,
        py: Python<'_>,
        other: &Geometry,
        backend: &str,
        workers: usize,
        chunk_size: usize,
    ) -> PyResult<f64> {
        let cfg = config(backend, workers, chunk_size)?;
        py.detach(|| kernels::distance_between(&self.inner, &other.inner, &cfg))
            .map(|r| r.distance)
            .map_err(kernel_err)
    }

    #[pyo3(signature = (other, backend = "sequential", workers = 1, chunk_size = kernels::DEFAULT_CHUNK_SIZE))]
    fn intersects(
        &self,
        py: Python<'_>,
        other: &Geometry,
        backend: &str,
        workers: usize,
        chunk_size: usize,
    ) -> PyResult<bool> {
        let cfg = config(backend, workers, chunk_size)?;
        py.detach(|| kernels::intersects_between(&self.inner, &other.inner, &cfg))
            .map_err(kernel_err)
    }

    fn __str__(&self) -> String {
        self.wkt()
    }

    fn __repr__(&self) -> String {
        format!("Geometry('{}')", self.wkt())
    }

    fn __eq__(&self, other: &Geometry) -> bool {
        self.inner == other.inner
    }
}

/// Result of one SELECT.
#[pyclass(frozen, module = "spatial3d_py")]
struct QueryResult {
    #[pyo3(get)]
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
    #[pyo3(get)]
    notices: Vec<String>,
    #[pyo3(get)]
    kernel_records_evaluated: u64,
    #[pyo3(get)]
    batches_run: u64,
    #[pyo3(get)]
    excluded_rows: u64,
}

#[pymethods]
impl QueryResult {
    /// Rows as tuples of Python values (int, float, bool, str).
    #[getter]
    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyTuple>>> {
        self.rows
            .iter()
            .map(|r| {
                let vals: Vec<Bound<'py, PyAny>> = r
                    .iter()
                    .map(|c| -> PyResult<Bound<'py, PyAny>> {
                        Ok(match c {
                            Cell::Int(v) => v.into_pyobject(py)?.into_any(),
                            Cell::Real(v) => v.into_pyobject(py)?.into_any(),
                            Cell::Bool(v) => v.into_pyobject(py)?.to_owned().into_any(),
                            Cell::Text(v) => v.into_pyobject(py)?.into_any(),
                        })
                    })
                    .collect::<PyResult<_>>()?;
                PyTuple::new(py, vals)
            })
            .collect()
    }

    /// Rows in PostgreSQL text format, as a wire client would see them.
    #[getter]
    fn text_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(Cell::to_text).collect())
            .collect()
    }

    fn __len__(&self) -> usize {
        self.rows.len()
    }
}

/// SQL engine over in-memory tables.
#[pyclass(frozen, module = "spatial3d_py")]
struct Engine {
    inner: Arc<sqlfe::Engine>,
}

#[pymethods]
impl Engine {
    #[new]
    #[pyo3(signature = (backend = "sequential", workers = 1, chunk_size = kernels::DEFAULT_CHUNK_SIZE))]
    fn new(backend: &str, workers: usize, chunk_size: usize) -> PyResult<Self> {
        let cfg = config(backend, workers, chunk_size)?;
        Ok(Engine {
            inner: Arc::new(sqlfe::Engine::new(Arc::new(Store::new()), cfg)),
        })
    }

    /// Loads an `id,wkt` CSV file; returns the record count.
    #[pyo3(signature = (table, path, geom_column = "geom"))]
    fn load_csv(&self, py: Python<'_>, table: &str, path: PathBuf, geom_column: &str) -> PyResult<usize> {
        py.detach(|| self.inner.store().load_csv_with_column(table, &path, geom_column))
            .map(|t| t.len())
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Registers `(id, wkt)` pairs as a table; returns the record count.
    #[pyo3(signature = (table, records, geom_column = "geom"))]
    fn register(&self, table: &str, records: Vec<(i64, String)>, geom_column: &str) -> PyResult<usize> {
        let recs = records
            .into_iter()
            .map(|(id, wkt)| {
                spatial3d::geometry::parse_wkt(&wkt)
                    .map(|geometry| GeometryRecord { id, geometry })
                    .map_err(|e| PyValueError::new_err(format!("id {id}: {e}")))
            })
            .collect::<PyResult<Vec<_>>>()?;
        self.inner
            .store()
            .register(table, recs, geom_column)
            .map(|t| t.len())
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn tables(&self) -> Vec<String> {
        self.inner.store().table_names()
    }

    /// Runs one SELECT. SQL errors raise `ValueError` whose message starts
    /// with the SQLSTATE code.
    fn query(&self, py: Python<'_>, sql: &str) -> PyResult<QueryResult> {
        let res = py
            .detach(|| self.inner.execute(sql))
            .map_err(|e| PyValueError::new_err(format!("{}: {e}", e.sqlstate())))?;
        match res.outcome {
            Outcome::Rows(rs) => Ok(QueryResult {
                columns: rs.columns.iter().map(|c| c.name.clone()).collect(),
                rows: rs.rows,
                notices: res.notices,
                kernel_records_evaluated: rs.stats.kernel_records_evaluated,
                batches_run: rs.stats.batches_run,
                excluded_rows: rs.stats.excluded_rows,
            }),
            _ => Err(PyValueError::new_err("statement returned no rows")),
        }
    }

    /// Serves this engine over the PostgreSQL wire protocol on a background
    /// thread. `port=0` picks a free port.
    #[pyo3(signature = (host = "127.0.0.1", port = 0, users = None))]
    fn serve(&self, host: &str, port: u16, users: Option<Vec<(String, String)>>) -> PyResult<Server> {
        let auth = match users {
            Some(u) => AuthConfig::password(u),
            None => AuthConfig::trust(),
        };
        let handle = ServerHandle::start(
            &format!("{host}:{port}"),
            self.inner.clone(),
            auth,
            Duration::from_secs(5),
        )
        .map_err(|e| PyOSError::new_err(e.to_string()))?;
        Ok(Server {
            port: handle.port(),
            handle: Mutex::new(Some(handle)),
        })
    }
}

/// Handle to a running server.
#[pyclass(frozen, module = "spatial3d_py")]
struct Server {
    #[pyo3(get)]
    port: u16,
    handle: Mutex<Option<ServerHandle>>,
}

#[pymethods]
impl Server {
    fn shutdown(&self, py: Python<'_>) -> PyResult<()> {
        let handle = self
            .handle
            .lock()
            .map_err(|_| PyRuntimeError::new_err("poisoned"))?
            .take();
        match handle {
            Some(h) => py
                .detach(|| h.shutdown())
                .map_err(|e| PyRuntimeError::new_err(e.to_string())),
            None => Ok(()),
        }
    }
}

/// Writes `drills.csv` and `ore.wkt`; returns `(segment_count, face_count)`.
#[pyfunction]
#[pyo3(signature = (out_dir, seed = 42, segments = 100_000, faces = 500, style = "vertical"))]
fn generate(
    py: Python<'_>,
    out_dir: PathBuf,
    seed: u64,
    segments: usize,
    faces: usize,
    style: &str,
) -> PyResult<(usize, usize)> {
    let drill_style: DrillStyle = style.parse().map_err(PyValueError::new_err)?;
    let spec = DatasetSpec {
        seed,
        segment_count: segments,
        mesh_face_target: faces,
        drill_style,
        ..DatasetSpec::default()
    };
    py.detach(|| generate_dataset(&spec, &out_dir))
        .map(|g| (g.segment_count, g.face_count))
        .map_err(|e| PyOSError::new_err(e.to_string()))
}

#[pymodule]
fn spatial3d_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Geometry>()?;
    m.add_class::<Engine>()?;
    m.add_class::<QueryResult>()?;
    m.add_class::<Server>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
