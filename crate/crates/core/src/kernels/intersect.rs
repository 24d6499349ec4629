//! Segment/triangle intersection by plane piercing and barycentric test.
//!
//! With `d = p1 - p0`, `e0 = v1 - v0`, `e1 = v2 - v0` and `s = p0 - v0`, the
//! system `p0 + t d = v0 + u e0 + v e1` is solved by Cramer's rule in
//! cross-product form:
//!
//! ```text
//! [t, u, v] = [((s x e0) . e1), ((d x e1) . s), ((s x e0) . d)] / ((d x e1) . e0)
//! ```
//!
//! The segment hits the triangle when the denominator is not negligible and
//! `0 <= t <= 1`, `u >= 0`, `v >= 0`, `u + v <= 1`.

use super::{ExecutorConfig, KernelError};
use crate::geometry::{LineSegment, Point3, Triangle, TriangleMesh};

/// The denominator is treated as zero when
/// `|(d x e1) . e0| <= PARALLEL_TOLERANCE * |d| |e0| |e1|`.
pub const PARALLEL_TOLERANCE: f64 = 1e-12;

/// Slack allowed on each barycentric and segment-parameter bound.
pub const BARYCENTRIC_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionParams {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    /// `1 - u - v`.
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionResult {
    pub hit: bool,
    pub point: Option<Point3>,
    pub face_index: Option<usize>,
    pub params: Option<IntersectionParams>,
}

impl IntersectionResult {
    pub const MISS: IntersectionResult = IntersectionResult {
        hit: false,
        point: None,
        face_index: None,
        params: None,
    };
}

/// `(t, u, v)` of the segment line meeting the triangle plane, or `None` when
/// the segment is (numerically) parallel to the plane.
pub(crate) fn solve_pierce(seg: &LineSegment, tri: &Triangle) -> Option<(f64, f64, f64)> {
    let d = seg.direction();
    let e0 = tri.e0();
    let e1 = tri.e1();
    let h = d.cross(e1);
    let den = h.dot(e0);
    if den.abs() <= PARALLEL_TOLERANCE * d.norm() * e0.norm() * e1.norm() {
        return None;
    }
    let s = seg.p0 - tri.v0;
    let q = s.cross(e0);
    let t = q.dot(e1) / den;
    let u = h.dot(s) / den;
    let v = q.dot(d) / den;
    Some((t, u, v))
}

/// A segment lying in the triangle's plane never hits; zero-length segments and
/// degenerate triangles never hit.
pub fn segment_triangle_intersect(seg: &LineSegment, tri: &Triangle) -> IntersectionResult {
    if tri.is_degenerate() {
        return IntersectionResult::MISS;
    }
    let Some((t, u, v)) = solve_pierce(seg, tri) else {
        return IntersectionResult::MISS;
    };
    let eps = BARYCENTRIC_SLACK;
    let inside = t >= -eps && t <= 1.0 + eps && u >= -eps && v >= -eps && u + v <= 1.0 + eps;
    if !inside {
        return IntersectionResult::MISS;
    }
    IntersectionResult {
        hit: true,
        point: Some(seg.point_at(t)),
        face_index: None,
        params: Some(IntersectionParams {
            t,
            u,
            v,
            w: 1.0 - u - v,
        }),
    }
}

/// Any-reduction over faces; reports the lowest-index face that is hit.
pub fn intersects_mesh(
    seg: &LineSegment,
    mesh: &TriangleMesh,
    cfg: &ExecutorConfig,
) -> Result<IntersectionResult, KernelError> {
    cfg.validate()?;
    if mesh.face_count() == 0 {
        return Err(KernelError::EmptyMesh);
    }
    let tris = mesh.triangles();
    let hit = cfg.first_hit(tris.len(), |i| {
        let r = segment_triangle_intersect(seg, &tris[i]);
        r.hit.then_some(r)
    });
    Ok(match hit {
        Some((i, r)) => IntersectionResult {
            face_index: Some(i),
            ..r
        },
        None => IntersectionResult::MISS,
    })
}
