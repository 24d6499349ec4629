use crate::geometry::{parse_wkt, serialize_wkt, Geometry};
use crate::kernels::{Backend, ExecutorConfig};
use crate::sqlfe::{Engine, SqlError};
use crate::store::{GeometryRecord, Store, StoreError};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::dataset::{DRILLS_FILE, ORE_FILE};

pub const MIN_REPEATS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryKind {
    Volume,
    Distance,
    Intersects,
}

impl QueryKind {
    pub fn name(self) -> &'static str {
        match self {
            QueryKind::Volume => "volume",
            QueryKind::Distance => "distance",
            QueryKind::Intersects => "intersects",
        }
    }
}

impl std::fmt::Display for QueryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for QueryKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "volume" => Ok(QueryKind::Volume),
            "distance" => Ok(QueryKind::Distance),
            "intersects" => Ok(QueryKind::Intersects),
            other => Err(format!("unknown operation '{other}'")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("could not load dataset: {0}")]
    Load(#[from] StoreError),
    #[error("invalid ore body: {0}")]
    Ore(String),
    #[error("query failed: {0}")]
    Query(#[from] SqlError),
    #[error("cell {op} limit={limit} {backend}/{workers} exceeded its {timeout:?} budget after {runs} runs")]
    Timeout {
        op: QueryKind,
        limit: String,
        backend: Backend,
        workers: usize,
        timeout: Duration,
        runs: usize,
    },
    #[error("backend results differ for {0}")]
    ResultMismatch(String),
    #[error("malformed report: {0}")]
    Report(String),
    #[error("invalid options: {0}")]
    Options(String),
}

/// Drill holes and ore body held in memory, so every cell can start a fresh
/// engine without re-reading the files.
#[derive(Debug, Clone)]
pub struct BenchData {
    pub drills: Vec<GeometryRecord>,
    pub ore: Geometry,
}

impl BenchData {
    pub fn load(dir: &Path) -> Result<BenchData, BenchError> {
        let store = Store::new();
        let drills = store.load_csv("drills", dir.join(DRILLS_FILE))?.records().to_vec();
        let text = std::fs::read_to_string(dir.join(ORE_FILE))?;
        let ore = parse_wkt(text.trim()).map_err(|e| BenchError::Ore(e.to_string()))?;
        if ore.as_mesh().is_none() {
            return Err(BenchError::Ore(format!("expected a mesh, got {}", ore.type_name())));
        }
        Ok(BenchData { drills, ore })
    }

    /// Fresh store with tables `drills` and `ore`.
    pub fn store(&self) -> Result<Arc<Store>, BenchError> {
        let store = Store::new();
        store.register("drills", self.drills.clone(), "geom")?;
        store.register(
            "ore",
            vec![GeometryRecord {
                id: 1,
                geometry: self.ore.clone(),
            }],
            "geom",
        )?;
        Ok(Arc::new(store))
    }

    pub fn sql(&self, op: QueryKind, limit: Option<u64>) -> String {
        let limit = limit.map_or(String::new(), |l| format!(" LIMIT {l}"));
        match op {
            QueryKind::Volume => format!("SELECT id, ST_Volume(geom) FROM ore{limit}"),
            QueryKind::Distance => format!(
                "SELECT id, ST_3DDistance(geom, ST_GeomFromText('{}')) FROM drills{limit}",
                serialize_wkt(&self.ore)
            ),
            QueryKind::Intersects => format!(
                "SELECT id, ST_3DIntersects(geom, ST_GeomFromText('{}')) FROM drills{limit}",
                serialize_wkt(&self.ore)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    /// `None` runs without a LIMIT clause.
    pub limits: Vec<Option<u64>>,
    pub backends: Vec<Backend>,
    /// Worker counts tried for the parallel backend.
    pub workers: Vec<usize>,
    pub repeats: usize,
    pub timeout: Duration,
    /// One untimed run per cell before measuring.
    pub warmup: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            limits: vec![Some(1), Some(10), Some(100_000)],
            backends: vec![Backend::Sequential, Backend::Parallel],
            workers: vec![8],
            repeats: MIN_REPEATS,
            timeout: Duration::from_secs(600),
            warmup: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub op: QueryKind,
    pub limit: Option<u64>,
    pub backend: Backend,
    pub workers: usize,
    pub wall_times: Vec<f64>,
    /// Rows returned by the last run (not part of the CSV report).
    pub result_rows: Option<usize>,
}

impl TimingReport {
    pub fn mean(&self) -> f64 {
        self.wall_times.iter().sum::<f64>() / self.wall_times.len() as f64
    }

    /// Sample standard deviation.
    pub fn stddev(&self) -> f64 {
        let n = self.wall_times.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.wall_times.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

fn limit_text(limit: Option<u64>) -> String {
    limit.map_or("ALL".into(), |l| l.to_string())
}

/// Times `op` for every (limit, backend, workers) cell. Each cell gets a new
/// store and engine; all cells must return identical rows for the same limit.
pub fn run_benchmark(data: &BenchData, op: QueryKind, opts: &BenchOptions) -> Result<Vec<TimingReport>, BenchError> {
    if opts.repeats < MIN_REPEATS {
        return Err(BenchError::Options(format!("repeats must be at least {MIN_REPEATS}")));
    }
    if opts.backends.contains(&Backend::Parallel) && (opts.workers.is_empty() || opts.workers.contains(&0)) {
        return Err(BenchError::Options(
            "parallel backend needs positive worker counts".into(),
        ));
    }
    let mut cells = Vec::new();
    for &limit in &opts.limits {
        for &backend in &opts.backends {
            match backend {
                Backend::Sequential => cells.push((limit, ExecutorConfig::sequential())),
                Backend::Parallel => cells.extend(opts.workers.iter().map(|&w| (limit, ExecutorConfig::parallel(w)))),
            }
        }
    }

    let mut reports = Vec::new();
    let mut reference: Vec<(Option<u64>, Vec<Vec<String>>)> = Vec::new();
    for (limit, cfg) in cells {
        let sql = data.sql(op, limit);
        let engine = Engine::new(data.store()?, cfg);
        if opts.warmup {
            engine.query(&sql)?;
        }
        let started = Instant::now();
        let mut times = Vec::with_capacity(opts.repeats);
        let mut last = None;
        for run in 0..opts.repeats {
            let t0 = Instant::now();
            let rows = engine.query(&sql)?;
            times.push(t0.elapsed().as_secs_f64());
            last = Some(rows);
            if started.elapsed() > opts.timeout && run + 1 < opts.repeats {
                return Err(BenchError::Timeout {
                    op,
                    limit: limit_text(limit),
                    backend: cfg.backend,
                    workers: cfg.worker_count,
                    timeout: opts.timeout,
                    runs: run + 1,
                });
            }
        }
        let rows = last.expect("at least one run").text_rows();
        match reference.iter().find(|(l, _)| *l == limit) {
            Some((_, expected)) if *expected != rows => {
                return Err(BenchError::ResultMismatch(format!("{op} limit={}", limit_text(limit))))
            }
            Some(_) => {}
            None => reference.push((limit, rows.clone())),
        }
        log::info!(
            "{op} limit={} {}/{}: mean {:.4}s",
            limit_text(limit),
            cfg.backend,
            cfg.worker_count,
            times.iter().sum::<f64>() / times.len() as f64
        );
        reports.push(TimingReport {
            op,
            limit,
            backend: cfg.backend,
            workers: cfg.worker_count,
            wall_times: times,
            result_rows: Some(rows.len()),
        });
    }
    Ok(reports)
}

pub const REPORT_HEADER: [&str; 6] = ["op", "limit", "backend", "workers", "run_index", "seconds"];

/// One CSV line per run: `op,limit,backend,workers,run_index,seconds`.
/// `limit` is `ALL` for unlimited queries.
pub fn write_report_csv<W: Write>(reports: &[TimingReport], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for r in reports {
        for (i, t) in r.wall_times.iter().enumerate() {
            w.write_record([
                r.op.name().to_string(),
                limit_text(r.limit),
                r.backend.to_string(),
                r.workers.to_string(),
                i.to_string(),
                format!("{t}"),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> BenchError {
    BenchError::Report(e.to_string())
}

/// Inverse of [`write_report_csv`]; runs are grouped back into cells in
/// order of first appearance.
pub fn read_report_csv<R: Read>(input: R) -> Result<Vec<TimingReport>, BenchError> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != REPORT_HEADER {
        return Err(BenchError::Report(format!("unexpected header {header:?}")));
    }
    let mut out: Vec<TimingReport> = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let bad = |what: &str| BenchError::Report(format!("bad {what} in {rec:?}"));
        let op: QueryKind = rec[0].parse().map_err(|_| bad("op"))?;
        let limit = match &rec[1] {
            "ALL" => None,
            s => Some(s.parse().map_err(|_| bad("limit"))?),
        };
        let backend: Backend = rec[2].parse().map_err(|_| bad("backend"))?;
        let workers: usize = rec[3].parse().map_err(|_| bad("workers"))?;
        let run_index: usize = rec[4].parse().map_err(|_| bad("run_index"))?;
        let seconds: f64 = rec[5].parse().map_err(|_| bad("seconds"))?;
        let cell = out
            .iter_mut()
            .find(|r| r.op == op && r.limit == limit && r.backend == backend && r.workers == workers);
        let cell = match cell {
            Some(c) => c,
            None => {
                out.push(TimingReport {
                    op,
                    limit,
                    backend,
                    workers,
                    wall_times: Vec::new(),
                    result_rows: None,
                });
                out.last_mut().expect("just pushed")
            }
        };
        if run_index != cell.wall_times.len() {
            return Err(bad("run_index"));
        }
        cell.wall_times.push(seconds);
    }
    Ok(out)
}

/// Fixed-width summary table.
pub fn format_table(reports: &[TimingReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<11} {:>8} {:<10} {:>7} {:>4} {:>11} {:>11} {:>8}",
        "op", "limit", "backend", "workers", "runs", "mean_s", "stddev_s", "rows"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<11} {:>8} {:<10} {:>7} {:>4} {:>11.6} {:>11.6} {:>8}",
            r.op.name(),
            limit_text(r.limit),
            r.backend.to_string(),
            r.workers,
            r.wall_times.len(),
            r.mean(),
            r.stddev(),
            r.result_rows.map_or("-".into(), |n| n.to_string()),
        );
    }
    s
}
