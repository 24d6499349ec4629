//! Closest-point distance kernels.
//!
//! Segment/triangle distance minimises the convex quadratic
//! `Q(u, v, t) = |T(u, v) - L(t)|^2` over `u, v >= 0, u + v <= 1, 0 <= t <= 1`.
//! The minimum is either an interior critical point (the segment pierces the
//! triangle) or lies on one of the five boundary faces of that domain: the
//! segment against each triangle edge, or each segment endpoint against the
//! triangle. Each boundary subproblem is solved exactly by a lower-dimensional
//! kernel in this module.

use super::intersect::solve_pierce;
use super::{ExecutorConfig, KernelError};
use crate::geometry::{LineSegment, Point3, Triangle, TriangleMesh};

/// Parameters of the minimiser, in the parametrisation of the two inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceParams {
    /// `L(t)` against `T(u, v)`.
    SegmentTriangle { t: f64, u: f64, v: f64 },
    /// Point against `T(u, v)`.
    PointTriangle { u: f64, v: f64 },
    /// `A(s)` against `B(t)`.
    SegmentSegment { s: f64, t: f64 },
    /// Point against `L(t)`.
    PointSegment { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceResult {
    pub distance: f64,
    pub closest_on_a: Point3,
    pub closest_on_b: Point3,
    /// Face of the mesh realising the minimum (mesh queries only).
    pub face_index: Option<usize>,
    pub params: Option<DistanceParams>,
}

impl DistanceResult {
    fn between(a: Point3, b: Point3, params: DistanceParams) -> Self {
        DistanceResult {
            distance: a.distance(b),
            closest_on_a: a,
            closest_on_b: b,
            face_index: None,
            params: Some(params),
        }
    }

    /// Same result with the roles of the two inputs exchanged.
    pub fn swapped(self) -> Self {
        let params = self.params.map(|p| match p {
            DistanceParams::SegmentSegment { s, t } => DistanceParams::SegmentSegment { s: t, t: s },
            other => other,
        });
        DistanceResult {
            closest_on_a: self.closest_on_b,
            closest_on_b: self.closest_on_a,
            params,
            ..self
        }
    }

    fn unreachable(at: Point3) -> Self {
        DistanceResult {
            distance: f64::INFINITY,
            closest_on_a: at,
            closest_on_b: at,
            face_index: None,
            params: None,
        }
    }
}

/// Keeps the first strictly smaller candidate.
fn pick_min(best: &mut Option<DistanceResult>, cand: DistanceResult) {
    match best {
        Some(b) if b.distance <= cand.distance => {}
        _ => *best = Some(cand),
    }
}

#[inline]
fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

pub fn point_segment_distance(p: Point3, seg: &LineSegment) -> DistanceResult {
    let d = seg.direction();
    let dd = d.norm_squared();
    let t = if dd > 0.0 {
        clamp01((p - seg.p0).dot(d) / dd)
    } else {
        0.0
    };
    DistanceResult::between(p, seg.point_at(t), DistanceParams::PointSegment { t })
}

/// Closest points between two segments; either may have zero length.
///
/// The clamped critical point is compared against the four endpoint-to-segment
/// projections, which cover every edge of the `(s, t)` square, so parallel and
/// nearly parallel inputs still return the global minimum.
pub fn segment_segment_distance(a: &LineSegment, b: &LineSegment) -> DistanceResult {
    let d1 = a.direction();
    let d2 = b.direction();
    let r = a.p0 - b.p0;
    let aa = d1.norm_squared();
    let ee = d2.norm_squared();
    let f = d2.dot(r);

    let mut best: Option<DistanceResult> = None;
    let mut push = |s: f64, t: f64| {
        let cand = DistanceResult::between(a.point_at(s), b.point_at(t), DistanceParams::SegmentSegment { s, t });
        pick_min(&mut best, cand);
    };

    if aa > 0.0 && ee > 0.0 {
        let c = d1.dot(r);
        let bb = d1.dot(d2);
        let denom = aa * ee - bb * bb;
        if denom > f64::EPSILON * aa * ee {
            let s = clamp01((bb * f - c * ee) / denom);
            let t = (bb * s + f) / ee;
            let (s, t) = if t < 0.0 {
                (clamp01(-c / aa), 0.0)
            } else if t > 1.0 {
                (clamp01((bb - c) / aa), 1.0)
            } else {
                (s, t)
            };
            push(s, t);
        }
    }
    // square edges s = 0, s = 1, t = 0, t = 1
    let edge = |p: Point3, seg: &LineSegment| match point_segment_distance(p, seg).params {
        Some(DistanceParams::PointSegment { t }) => t,
        _ => 0.0,
    };
    push(0.0, edge(a.p0, b));
    push(1.0, edge(a.p1, b));
    push(edge(b.p0, a), 0.0);
    push(edge(b.p1, a), 1.0);
    best.expect("at least one candidate")
}

/// Closest point of a triangle to `p` by Voronoi-region classification
/// (three vertex regions, three edge regions, interior).
pub fn point_triangle_distance(p: Point3, tri: &Triangle) -> DistanceResult {
    if tri.is_degenerate() {
        return degenerate_point_triangle(p, tri);
    }
    let (u, v) = closest_uv(p, tri);
    DistanceResult::between(p, tri.point_at(u, v), DistanceParams::PointTriangle { u, v })
}

fn closest_uv(p: Point3, tri: &Triangle) -> (f64, f64) {
    let (a, b, c) = (tri.v0, tri.v1, tri.v2);
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (0.0, 0.0);
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (1.0, 0.0);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return (d1 / (d1 - d3), 0.0);
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (0.0, 1.0);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return (0.0, d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (1.0 - w, w);
    }
    let denom = 1.0 / (va + vb + vc);
    (vb * denom, vc * denom)
}

// A zero-area triangle is the union of its edges.
fn degenerate_point_triangle(p: Point3, tri: &Triangle) -> DistanceResult {
    let mut best = None;
    for (k, edge) in edges(tri).iter().enumerate() {
        let r = point_segment_distance(p, edge);
        let s = match r.params {
            Some(DistanceParams::PointSegment { t }) => t,
            _ => 0.0,
        };
        let (u, v) = edge_uv(k, s);
        pick_min(
            &mut best,
            DistanceResult {
                params: Some(DistanceParams::PointTriangle { u, v }),
                ..r
            },
        );
    }
    best.expect("three edges")
}

fn edges(tri: &Triangle) -> [LineSegment; 3] {
    [
        LineSegment::new(tri.v0, tri.v1),
        LineSegment::new(tri.v1, tri.v2),
        LineSegment::new(tri.v2, tri.v0),
    ]
}

/// `(u, v)` of the point at parameter `s` along edge `k` (as in [`edges`]).
#[inline]
fn edge_uv(k: usize, s: f64) -> (f64, f64) {
    match k {
        0 => (s, 0.0),
        1 => (1.0 - s, s),
        _ => (0.0, 1.0 - s),
    }
}

/// Global minimum of `|T(u, v) - L(t)|` over the triangle and segment domains.
pub fn segment_triangle_distance(seg: &LineSegment, tri: &Triangle) -> DistanceResult {
    if seg.is_degenerate() {
        let r = point_triangle_distance(seg.p0, tri);
        let params = match r.params {
            Some(DistanceParams::PointTriangle { u, v }) => Some(DistanceParams::SegmentTriangle { t: 0.0, u, v }),
            p => p,
        };
        return DistanceResult { params, ..r };
    }

    let mut best: Option<DistanceResult> = None;

    // Interior critical point: the quadratic is positive definite exactly when
    // the segment is not parallel to the triangle plane, and then its critical
    // point has zero residual, i.e. it is the piercing point.
    if !tri.is_degenerate() {
        if let Some((t, u, v)) = solve_pierce(seg, tri) {
            if (0.0..=1.0).contains(&t) && u >= 0.0 && v >= 0.0 && u + v <= 1.0 {
                pick_min(
                    &mut best,
                    DistanceResult::between(
                        seg.point_at(t),
                        tri.point_at(u, v),
                        DistanceParams::SegmentTriangle { t, u, v },
                    ),
                );
            }
        }
    }

    for (t, end) in [(0.0, seg.p0), (1.0, seg.p1)] {
        let r = point_triangle_distance(end, tri);
        if let Some(DistanceParams::PointTriangle { u, v }) = r.params {
            pick_min(
                &mut best,
                DistanceResult {
                    params: Some(DistanceParams::SegmentTriangle { t, u, v }),
                    ..r
                },
            );
        }
    }

    for (k, edge) in edges(tri).iter().enumerate() {
        let r = segment_segment_distance(seg, edge);
        if let Some(DistanceParams::SegmentSegment { s: t, t: s }) = r.params {
            let (u, v) = edge_uv(k, s);
            pick_min(
                &mut best,
                DistanceResult {
                    params: Some(DistanceParams::SegmentTriangle { t, u, v }),
                    ..r
                },
            );
        }
    }
    best.expect("boundary candidates always exist")
}

/// Query side of a mesh distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceQuery {
    Point(Point3),
    Segment(LineSegment),
}

impl From<Point3> for DistanceQuery {
    fn from(p: Point3) -> Self {
        DistanceQuery::Point(p)
    }
}

impl From<LineSegment> for DistanceQuery {
    fn from(s: LineSegment) -> Self {
        DistanceQuery::Segment(s)
    }
}

/// Minimum over per-face distances. Degenerate faces are skipped (they count
/// as infinitely far); ties go to the lowest face index. `closest_on_a` lies on
/// the query, `closest_on_b` on the mesh.
pub fn distance_to_mesh(
    query: DistanceQuery,
    mesh: &TriangleMesh,
    cfg: &ExecutorConfig,
) -> Result<DistanceResult, KernelError> {
    cfg.validate()?;
    if mesh.face_count() == 0 {
        return Err(KernelError::EmptyMesh);
    }
    let tris = mesh.triangles();
    let skip_degenerate = mesh.has_degenerate_faces();
    let face = |i: usize| {
        let tri = &tris[i];
        if skip_degenerate && tri.is_degenerate() {
            return None;
        }
        Some(match query {
            DistanceQuery::Point(p) => point_triangle_distance(p, tri),
            DistanceQuery::Segment(s) => segment_triangle_distance(&s, tri),
        })
    };
    let best = cfg.argmin(tris.len(), face, |r| r.distance);
    Ok(match best {
        Some((i, r)) => DistanceResult {
            face_index: Some(i),
            ..r
        },
        None => DistanceResult::unreachable(match query {
            DistanceQuery::Point(p) => p,
            DistanceQuery::Segment(s) => s.p0,
        }),
    })
}
