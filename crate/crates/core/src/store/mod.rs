//! In-memory geometry tables.
//!
//! A table mirrors exactly two columns of its source: a unique 64-bit id and the
//! geometry. Records are held in an immutable `Arc` slice; a reload swaps in a
//! new slice, so queries that already took a snapshot are never disturbed.

mod csv_load;
mod mirror;

use crate::geometry::{Geometry, GeometryError};
use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

pub use mirror::UpstreamDsn;

/// Default name of the geometry column.
pub const DEFAULT_GEOM_COLUMN: &str = "geom";

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryRecord {
    pub id: i64,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadState {
    Empty,
    Loading,
    Ready,
}

/// Immutable ordered view of a table's records.
pub type Snapshot = Arc<[GeometryRecord]>;

#[derive(Debug)]
pub struct GeometryTable {
    name: String,
    geom_column: String,
    records: Snapshot,
}

impl GeometryTable {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn geom_column(&self) -> &str {
        &self.geom_column
    }

    pub fn records(&self) -> &Snapshot {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("could not read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("duplicate id {id} at line {line}")]
    DuplicateId { id: i64, line: u64 },
    #[error("line {line}: invalid geometry: {source}")]
    Parse {
        line: u64,
        #[source]
        source: GeometryError,
    },
    #[error("table \"{0}\" does not exist")]
    UnknownTable(String),
    #[error("table \"{0}\" is still loading")]
    TableNotReady(String),
    #[error("invalid identifier \"{0}\"")]
    InvalidIdentifier(String),
    #[error("could not connect to upstream server: {0}")]
    ConnectionFailed(String),
    #[error("upstream server error {code}: {message}")]
    Upstream { code: String, message: String },
}

#[derive(Debug, Default)]
struct Slot {
    state: Option<LoadState>,
    table: Option<Arc<GeometryTable>>,
}

/// Registry of mirrored tables. Many concurrent readers; registration and
/// reload take the write lock only to swap the finished table in.
#[derive(Debug, Default)]
pub struct Store {
    tables: RwLock<HashMap<String, Slot>>,
}

fn normalize(name: &str) -> String {
    name.to_ascii_lowercase()
}

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    /// Loads `id,wkt` lines from a CSV file. Record order follows the file.
    pub fn load_csv(&self, table_name: &str, path: impl AsRef<Path>) -> Result<Arc<GeometryTable>, StoreError> {
        self.load_csv_with_column(table_name, path, DEFAULT_GEOM_COLUMN)
    }

    pub fn load_csv_with_column(
        &self,
        table_name: &str,
        path: impl AsRef<Path>,
        geom_column: &str,
    ) -> Result<Arc<GeometryTable>, StoreError> {
        let path = path.as_ref();
        self.load_with(table_name, geom_column, || csv_load::read_csv(path))
    }

    /// Copies `(id_column, geom_column)` of `source_table` from a server
    /// speaking the PostgreSQL protocol. The geometry must come back as WKT text.
    pub fn mirror_upstream(
        &self,
        table_name: &str,
        dsn: &UpstreamDsn,
        source_table: &str,
        id_column: &str,
        geom_column: &str,
    ) -> Result<Arc<GeometryTable>, StoreError> {
        self.load_with(table_name, geom_column, || {
            mirror::fetch(dsn, source_table, id_column, geom_column)
        })
    }

    /// Registers already-built records under `table_name`.
    pub fn register(
        &self,
        table_name: &str,
        records: Vec<GeometryRecord>,
        geom_column: &str,
    ) -> Result<Arc<GeometryTable>, StoreError> {
        self.load_with(table_name, geom_column, || {
            check_unique(&records)?;
            Ok(records)
        })
    }

    fn load_with(
        &self,
        table_name: &str,
        geom_column: &str,
        load: impl FnOnce() -> Result<Vec<GeometryRecord>, StoreError>,
    ) -> Result<Arc<GeometryTable>, StoreError> {
        if !is_identifier(table_name) {
            return Err(StoreError::InvalidIdentifier(table_name.into()));
        }
        let key = normalize(table_name);
        self.write().entry(key.clone()).or_default().state = Some(LoadState::Loading);

        let loaded = load();

        let mut tables = self.write();
        let slot = tables.entry(key.clone()).or_default();
        match loaded {
            Ok(records) => {
                let table = Arc::new(GeometryTable {
                    name: key,
                    geom_column: normalize(geom_column),
                    records: records.into(),
                });
                slot.table = Some(table.clone());
                slot.state = Some(LoadState::Ready);
                Ok(table)
            }
            Err(e) => {
                if slot.table.is_some() {
                    slot.state = Some(LoadState::Ready);
                } else {
                    tables.remove(&key);
                }
                Err(e)
            }
        }
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, HashMap<String, Slot>> {
        self.tables.write().unwrap_or_else(|e| e.into_inner())
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, HashMap<String, Slot>> {
        self.tables.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn load_state(&self, table_name: &str) -> LoadState {
        self.read()
            .get(&normalize(table_name))
            .and_then(|s| s.state)
            .unwrap_or(LoadState::Empty)
    }

    /// Latest loaded version of a table. During a reload the previous version
    /// stays visible.
    pub fn table(&self, table_name: &str) -> Result<Arc<GeometryTable>, StoreError> {
        let tables = self.read();
        match tables.get(&normalize(table_name)) {
            None => Err(StoreError::UnknownTable(table_name.into())),
            Some(Slot { table: Some(t), .. }) => Ok(t.clone()),
            Some(_) => Err(StoreError::TableNotReady(table_name.into())),
        }
    }

    /// Immutable snapshot of a table's records.
    pub fn scan(&self, table_name: &str) -> Result<Snapshot, StoreError> {
        self.table(table_name).map(|t| t.records.clone())
    }

    pub fn table_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .read()
            .iter()
            .filter(|(_, s)| s.table.is_some())
            .map(|(k, _)| k.clone())
            .collect();
        names.sort();
        names
    }
}

fn check_unique(records: &[GeometryRecord]) -> Result<(), StoreError> {
    let mut seen = HashSet::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if !seen.insert(r.id) {
            return Err(StoreError::DuplicateId {
                id: r.id,
                line: i as u64 + 1,
            });
        }
    }
    Ok(())
}

/// Plain SQL identifier: letter or underscore, then letters, digits, underscores.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_two_records() {
        let f = write_csv("1,POINT Z (1 2 3)\n2,\"LINESTRING Z (0 0 0, 1 1 1)\"\n");
        let store = Store::new();
        let t = store.load_csv("things", f.path()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(store.load_state("things"), LoadState::Ready);
        let snap = store.scan("THINGS").unwrap();
        assert_eq!(snap[0].id, 1);
        assert_eq!(snap[0].geometry, Geometry::Point(Point3::new(1.0, 2.0, 3.0)));
        assert_eq!(snap[1].id, 2);
    }

    #[test]
    fn duplicate_id_reports_line() {
        let f = write_csv("id,geometry\n7,POINT Z (1 2 3)\n8,POINT Z (1 2 3)\n7,POINT Z (0 0 0)\n");
        let err = Store::new().load_csv("t", f.path()).unwrap_err();
        assert!(matches!(err, StoreError::DuplicateId { id: 7, line: 4 }), "{err:?}");
    }

    #[test]
    fn parse_failure_reports_line() {
        let f = write_csv("1,POINT Z (1 2 3)\n2,POINT Z (1 2)\n");
        let err = Store::new().load_csv("t", f.path()).unwrap_err();
        assert!(matches!(err, StoreError::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = Store::new().load_csv("t", "/nonexistent/file.csv").unwrap_err();
        assert!(matches!(err, StoreError::Io { .. }));
    }

    #[test]
    fn failed_first_load_leaves_no_table() {
        let store = Store::new();
        let _ = store.load_csv("t", "/nonexistent/file.csv");
        assert!(matches!(store.scan("t"), Err(StoreError::UnknownTable(_))));
        assert_eq!(store.load_state("t"), LoadState::Empty);
    }

    #[test]
    fn failed_reload_keeps_previous_version() {
        let good = write_csv("1,POINT Z (1 2 3)\n");
        let bad = write_csv("1,POINT Z (1 2\n");
        let store = Store::new();
        store.load_csv("t", good.path()).unwrap();
        assert!(store.load_csv("t", bad.path()).is_err());
        assert_eq!(store.scan("t").unwrap().len(), 1);
        assert_eq!(store.load_state("t"), LoadState::Ready);
    }

    #[test]
    fn unknown_table() {
        assert!(matches!(Store::new().scan("nope"), Err(StoreError::UnknownTable(_))));
    }

    #[test]
    fn snapshots_survive_reload() {
        let a = write_csv("1,POINT Z (1 2 3)\n");
        let b = write_csv("1,POINT Z (1 2 3)\n2,POINT Z (4 5 6)\n");
        let store = Store::new();
        store.load_csv("t", a.path()).unwrap();
        let before = store.scan("t").unwrap();
        store.load_csv("t", b.path()).unwrap();
        assert_eq!(before.len(), 1);
        assert_eq!(store.scan("t").unwrap().len(), 2);
    }

    #[test]
    fn concurrent_scans_are_identical() {
        let f = write_csv(
            &(1..=500)
                .map(|i| format!("{i},POINT Z ({i} 0 0)\n"))
                .collect::<String>(),
        );
        let store = Arc::new(Store::new());
        store.load_csv("pts", f.path()).unwrap();
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let s = store.clone();
                std::thread::spawn(move || s.scan("pts").unwrap())
            })
            .collect();
        let snaps: Vec<Snapshot> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for s in &snaps[1..] {
            assert_eq!(s[..], snaps[0][..]);
        }
    }

    #[test]
    fn register_checks_ids_and_names() {
        let store = Store::new();
        let rec = |id| GeometryRecord {
            id,
            geometry: Geometry::Point(Point3::ORIGIN),
        };
        assert!(matches!(
            store.register("t", vec![rec(1), rec(1)], "geom"),
            Err(StoreError::DuplicateId { id: 1, line: 2 })
        ));
        assert!(matches!(
            store.register("bad name", vec![rec(1)], "geom"),
            Err(StoreError::InvalidIdentifier(_))
        ));
        let t = store.register("T", vec![rec(1)], "Shape").unwrap();
        assert_eq!(t.name(), "t");
        assert_eq!(t.geom_column(), "shape");
        assert_eq!(store.table_names(), vec!["t".to_string()]);
    }
}
