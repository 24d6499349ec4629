//! Mesh argument shared by every record of a batch, with bounding spheres per
//! face and per cluster of nearby faces used to skip faces that cannot change
//! the result.
//!
//! Results are identical to the plain face scans: a face is skipped only when
//! a lower bound on its distance (sphere or plane gap, shrunk by a rounding
//! margin) already exceeds the current minimum, or zero for intersection.

use super::distance::{point_triangle_distance, segment_triangle_distance, DistanceQuery, DistanceResult};
use super::intersect::{segment_triangle_intersect, IntersectionResult};
use crate::geometry::{LineSegment, Point3, TriangleMesh};

const MARGIN: f64 = 1e-9;
const CLUSTER: usize = 16;

struct Sphere {
    center: Point3,
    radius: f64,
}

/// Unit normal and offset of a face plane; zero normal for degenerate faces.
struct Plane {
    normal: Point3,
    offset: f64,
    extent: f64,
}

pub(crate) struct PreparedMesh<'a> {
    mesh: &'a TriangleMesh,
    faces: Vec<Sphere>,
    planes: Vec<Plane>,
    skip: Vec<bool>,
    /// Face indices in Morton order of their centroids.
    order: Vec<usize>,
    /// One bounding sphere per `CLUSTER` consecutive entries of `order`.
    clusters: Vec<Sphere>,
}

impl<'a> PreparedMesh<'a> {
    pub(crate) fn new(mesh: &'a TriangleMesh) -> Self {
        let skip_degenerate = mesh.has_degenerate_faces();
        let mut faces = Vec::with_capacity(mesh.face_count());
        let mut skip = Vec::with_capacity(mesh.face_count());
        let mut planes = Vec::with_capacity(mesh.face_count());
        for tri in mesh.triangles() {
            let n = tri.normal();
            let len = n.norm();
            let normal = if tri.is_degenerate() || len == 0.0 {
                Point3::new(0.0, 0.0, 0.0)
            } else {
                n * (1.0 / len)
            };
            planes.push(Plane {
                normal,
                offset: normal.dot(tri.v0),
                extent: tri.max_abs(),
            });
            let [a, b, c] = tri.vertices();
            let center = Point3::new(
                (a.x + b.x + c.x) / 3.0,
                (a.y + b.y + c.y) / 3.0,
                (a.z + b.z + c.z) / 3.0,
            );
            let radius = center.distance(a).max(center.distance(b)).max(center.distance(c));
            faces.push(Sphere { center, radius });
            skip.push(skip_degenerate && tri.is_degenerate());
        }

        let (lo, hi) = faces.iter().fold(
            (
                Point3::new(f64::MAX, f64::MAX, f64::MAX),
                Point3::new(f64::MIN, f64::MIN, f64::MIN),
            ),
            |(lo, hi), s| {
                let c = s.center;
                (
                    Point3::new(lo.x.min(c.x), lo.y.min(c.y), lo.z.min(c.z)),
                    Point3::new(hi.x.max(c.x), hi.y.max(c.y), hi.z.max(c.z)),
                )
            },
        );
        let mut order: Vec<usize> = (0..faces.len()).collect();
        order.sort_by_key(|&i| morton(faces[i].center, lo, hi));

        let clusters = order
            .chunks(CLUSTER)
            .map(|members| {
                let n = members.len() as f64;
                let sum = members
                    .iter()
                    .fold(Point3::new(0.0, 0.0, 0.0), |acc, &i| acc + faces[i].center);
                let center = sum * (1.0 / n);
                let radius = members
                    .iter()
                    .map(|&i| center.distance(faces[i].center) + faces[i].radius)
                    .fold(0.0, f64::max);
                Sphere { center, radius }
            })
            .collect();
        PreparedMesh {
            mesh,
            faces,
            planes,
            skip,
            order,
            clusters,
        }
    }

    /// Distance from `query` to the surface of `sphere`, shrunk by the rounding margin.
    fn lower_bound(sphere: &Sphere, query: &DistanceQuery) -> f64 {
        let c = sphere.center;
        let d = match query {
            DistanceQuery::Point(p) => p.distance(c),
            DistanceQuery::Segment(s) => point_segment_gap(c, s),
        };
        let r = sphere.radius;
        d - r - MARGIN * (1.0 + d + r)
    }

    /// Larger of the face sphere bound and the gap to the face plane.
    fn face_bound(&self, i: usize, query: &DistanceQuery) -> f64 {
        let sphere = Self::lower_bound(&self.faces[i], query);
        let plane = &self.planes[i];
        let side = |p: Point3| plane.normal.dot(p) - plane.offset;
        let (gap, extent) = match query {
            DistanceQuery::Point(p) => (side(*p).abs(), p.max_abs()),
            DistanceQuery::Segment(s) => {
                let (a, b) = (side(s.p0), side(s.p1));
                let gap = if a * b <= 0.0 { 0.0 } else { a.abs().min(b.abs()) };
                (gap, s.p0.max_abs().max(s.p1.max_abs()))
            }
        };
        sphere.max(gap - MARGIN * (1.0 + plane.extent + extent))
    }

    fn members(&self, cluster: usize) -> &[usize] {
        let start = cluster * CLUSTER;
        &self.order[start..(start + CLUSTER).min(self.order.len())]
    }

    /// Same value, closest points and face index as `distance_to_mesh`.
    /// Clusters are visited nearest bound first; the result does not
    /// depend on the order because ties are broken on face index.
    pub(crate) fn distance(&self, query: DistanceQuery) -> Option<DistanceResult> {
        let tris = self.mesh.triangles();
        let mut clusters: Vec<(f64, usize)> = self
            .clusters
            .iter()
            .enumerate()
            .map(|(c, sphere)| (Self::lower_bound(sphere, &query), c))
            .collect();
        clusters.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut best: Option<(usize, DistanceResult)> = None;
        for (bound, cluster) in clusters {
            if best.as_ref().is_some_and(|b| bound > b.1.distance) {
                break;
            }
            for &i in self.members(cluster) {
                if self.skip[i] || best.as_ref().is_some_and(|b| self.face_bound(i, &query) > b.1.distance) {
                    continue;
                }
                let r = match query {
                    DistanceQuery::Point(p) => point_triangle_distance(p, &tris[i]),
                    DistanceQuery::Segment(s) => segment_triangle_distance(&s, &tris[i]),
                };
                let better = match best {
                    None => true,
                    Some((j, ref b)) => r.distance < b.distance || (r.distance == b.distance && i < j),
                };
                if better {
                    best = Some((i, r));
                }
            }
        }
        best.map(|(i, r)| DistanceResult {
            face_index: Some(i),
            ..r
        })
    }

    /// Same outcome as `intersects_mesh`: the lowest-index face hit.
    pub(crate) fn intersect(&self, seg: &LineSegment) -> IntersectionResult {
        let query = DistanceQuery::Segment(*seg);
        let tris = self.mesh.triangles();
        let mut best: Option<(usize, IntersectionResult)> = None;
        for (cluster, sphere) in self.clusters.iter().enumerate() {
            if Self::lower_bound(sphere, &query) > 0.0 {
                continue;
            }
            for &i in self.members(cluster) {
                if best.as_ref().is_some_and(|b| b.0 < i) || self.face_bound(i, &query) > 0.0 {
                    continue;
                }
                let r = segment_triangle_intersect(seg, &tris[i]);
                if r.hit {
                    best = Some((i, r));
                }
            }
        }
        best.map_or(IntersectionResult::MISS, |(i, r)| IntersectionResult {
            face_index: Some(i),
            ..r
        })
    }
}

/// Interleaved 10-bit quantised coordinates of `p` within `[lo, hi]`.
fn morton(p: Point3, lo: Point3, hi: Point3) -> u32 {
    let q = |v: f64, a: f64, b: f64| {
        let t = if b > a { (v - a) / (b - a) } else { 0.0 };
        (t * 1023.0).round().clamp(0.0, 1023.0) as u32
    };
    let spread = |mut x: u32| {
        x = (x | (x << 16)) & 0x0300_00ff;
        x = (x | (x << 8)) & 0x0300_f00f;
        x = (x | (x << 4)) & 0x030c_30c3;
        (x | (x << 2)) & 0x0924_9249
    };
    spread(q(p.x, lo.x, hi.x)) | (spread(q(p.y, lo.y, hi.y)) << 1) | (spread(q(p.z, lo.z, hi.z)) << 2)
}

fn point_segment_gap(p: Point3, s: &LineSegment) -> f64 {
    let d = s.direction();
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 {
        ((p - s.p0).dot(d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(s.point_at(t))
}
