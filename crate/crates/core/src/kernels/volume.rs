//! Solid volume by the divergence theorem.
//!
//! With the field `F(p) = p / 3` (divergence 1) the flux through a planar face
//! is constant over the face, which reduces the volume to
//! `V = 1/6 * sum_i v0_i . ((v1_i - v0_i) x (v2_i - v0_i))`.
//!
//! For a closed mesh the sum does not depend on the origin, so it is taken
//! relative to the mesh's first vertex to limit cancellation far from zero.

use super::{ExecutorConfig, KernelError, VolumePolicy};
use crate::geometry::{Triangle, TriangleMesh};

/// One face's signed contribution, `v0 . ((v1 - v0) x (v2 - v0)) / 6`.
#[inline]
pub fn face_volume_term(tri: &Triangle) -> f64 {
    tri.v0.dot(tri.normal()) / 6.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshVolume {
    /// Signed volume; positive for closed meshes with outward CCW faces.
    pub value: f64,
    /// Set when the mesh failed the closedness check (permissive policy only).
    pub not_closed: bool,
}

pub fn mesh_volume(mesh: &TriangleMesh, cfg: &ExecutorConfig) -> Result<MeshVolume, KernelError> {
    cfg.validate()?;
    if mesh.face_count() == 0 {
        return Err(KernelError::EmptyMesh);
    }
    let closure = mesh.closure();
    if !closure.is_closed && cfg.volume_policy == VolumePolicy::Strict {
        return Err(KernelError::MeshNotClosed {
            boundary: closure.boundary_edge_count,
            inconsistent: closure.inconsistent_edge_count,
        });
    }
    let tris = mesh.triangles();
    let origin = tris[0].v0;
    let value = cfg.sum(tris.len(), |i| (tris[i].v0 - origin).dot(tris[i].normal()) / 6.0);
    Ok(MeshVolume {
        value,
        not_closed: !closure.is_closed,
    })
}
