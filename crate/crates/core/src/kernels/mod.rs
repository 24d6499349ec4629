//! Spatial operators as per-face computations plus deterministic reductions.
//!
//! Every operator decomposes a mesh into one work item per face: volume sums a
//! signed term per face, distance takes the minimum per-face distance and
//! intersection asks whether any face is pierced. Work items are grouped into
//! chunks of [`ExecutorConfig::chunk_size`] faces; chunk results are combined
//! with the same reduction tree on every backend, so the sequential backend is
//! an exact oracle for the parallel one.

mod batch;
mod distance;
mod executor;
mod intersect;
mod prepared;
mod volume;

pub use batch::{distance_between, intersects_between, run_batch, BatchOp, KernelResult, KernelValue, KernelWarning};
pub use distance::{
    distance_to_mesh, point_segment_distance, point_triangle_distance, segment_segment_distance,
    segment_triangle_distance, DistanceParams, DistanceQuery, DistanceResult,
};
pub use executor::pairwise_sum;
pub use intersect::{
    intersects_mesh, segment_triangle_intersect, IntersectionParams, IntersectionResult, BARYCENTRIC_SLACK,
    PARALLEL_TOLERANCE,
};
pub use volume::{face_volume_term, mesh_volume, MeshVolume};

use std::fmt;
use std::str::FromStr;

/// Default number of faces per work unit.
pub const DEFAULT_CHUNK_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Sequential,
    Parallel,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Sequential => "sequential",
            Backend::Parallel => "parallel",
        })
    }
}

impl FromStr for Backend {
    type Err = KernelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sequential" | "seq" => Ok(Backend::Sequential),
            "parallel" | "par" => Ok(Backend::Parallel),
            other => Err(KernelError::InvalidConfig(format!("unknown backend '{other}'"))),
        }
    }
}

/// What `mesh_volume` does with a mesh that fails the closedness check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VolumePolicy {
    /// Compute the signed sum anyway and flag the result.
    #[default]
    Permissive,
    /// Refuse with [`KernelError::MeshNotClosed`].
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutorConfig {
    pub backend: Backend,
    /// Worker threads for [`Backend::Parallel`]; ignored by the sequential backend.
    pub worker_count: usize,
    /// Faces (or records) per work unit. Fixes the reduction tree shape.
    pub chunk_size: usize,
    pub volume_policy: VolumePolicy,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig::sequential()
    }
}

impl ExecutorConfig {
    pub fn sequential() -> Self {
        ExecutorConfig {
            backend: Backend::Sequential,
            worker_count: 1,
            chunk_size: DEFAULT_CHUNK_SIZE,
            volume_policy: VolumePolicy::Permissive,
        }
    }

    pub fn parallel(worker_count: usize) -> Self {
        ExecutorConfig {
            backend: Backend::Parallel,
            worker_count,
            ..ExecutorConfig::sequential()
        }
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size;
        self
    }

    pub fn with_volume_policy(mut self, policy: VolumePolicy) -> Self {
        self.volume_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if self.chunk_size == 0 {
            return Err(KernelError::InvalidConfig("chunk_size must be positive".into()));
        }
        if self.backend == Backend::Parallel && self.worker_count == 0 {
            return Err(KernelError::InvalidConfig("worker_count must be positive".into()));
        }
        Ok(())
    }

    /// Same tree shape, single thread. Used for the inner loop of record-parallel batches.
    pub(crate) fn inner(&self) -> Self {
        ExecutorConfig {
            backend: Backend::Sequential,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("{op} does not support {left} and {right}")]
    TypeMismatch {
        op: &'static str,
        left: &'static str,
        right: &'static str,
    },
    #[error("mesh is not closed ({boundary} boundary edges, {inconsistent} inconsistent half-edges)")]
    MeshNotClosed { boundary: usize, inconsistent: usize },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("{0}")]
    InvalidArgument(String),
    #[error("invalid executor configuration: {0}")]
    InvalidConfig(String),
}
