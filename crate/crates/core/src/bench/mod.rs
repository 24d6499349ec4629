//! Synthetic mining dataset and timing harness.
//!
//! Drill holes are two-point line strings, the ore body a closed TIN. The
//! harness runs one SQL statement per operation through a fresh in-process
//! engine for each (limit, backend, workers) cell.

mod dataset;
mod harness;

pub use dataset::{generate_dataset, BoundingBox, DatasetSpec, DrillStyle, GeneratedDataset, DRILLS_FILE, ORE_FILE};
pub use harness::{
    format_table, read_report_csv, run_benchmark, write_report_csv, BenchData, BenchError, BenchOptions, QueryKind,
    TimingReport, MIN_REPEATS, REPORT_HEADER,
};
