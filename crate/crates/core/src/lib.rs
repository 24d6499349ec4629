//! In-memory 3D spatial query acceleration.
//!
//! Geometry tables are mirrored in memory as `(id, geometry)` pairs and queried
//! through a small SQL subset. The three spatial operators (`ST_Volume`,
//! `ST_3DDistance`, `ST_3DIntersects`) are evaluated by face-decomposed kernels:
//! one work item per mesh face followed by a deterministic reduction, on either a
//! sequential reference backend or a data-parallel backend.
//!
//! The crate is organised as:
//!
//! - [`geometry`]: domain types, WKT, closedness validation and test shapes.
//! - [`kernels`]: per-face primitives, reductions and the batch executor.
//! - [`store`]: in-memory geometry tables, CSV ingestion and upstream mirroring.
//! - [`sqlfe`]: SQL subset parser and the planner that splits kernel work from
//!   residual predicate filtering.
//! - [`wire`]: PostgreSQL v3 wire protocol server (and a minimal client).
//! - [`bench`]: dataset generator and timing harness.

pub mod bench;
pub mod geometry;
pub mod kernels;
pub mod sqlfe;
pub mod store;
pub mod wire;

pub use geometry::{Geometry, LineSegment, MeshKind, Point3, Triangle, TriangleMesh};
pub use kernels::{Backend, ExecutorConfig};
pub use sqlfe::Engine;
pub use store::{GeometryRecord, Store};
