//! Geometry domain types, WKT text format and mesh validation.
//!
//! All values are immutable once built and can be shared freely between
//! threads. Meshes are stored as a flat array of oriented triangles so kernels
//! consume them without conversion.

mod closure;
pub mod shapes;
mod wkt;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

pub use closure::{validate_closed, ClosureReport};
pub use wkt::{parse_wkt, serialize_wkt};

/// A triangle whose cross-product norm is at or below this value is degenerate.
pub const DEGENERATE_AREA_THRESHOLD: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("non-finite coordinate at position {pos}")]
    NonFinite { pos: usize },
    #[error("polygon ring at position {pos} has {points} points, at least 4 are required")]
    RingTooShort { pos: usize, points: usize },
    #[error("polygon ring at position {pos} is not closed")]
    RingNotClosed { pos: usize },
    #[error("mixed dimension at position {pos}: only 3D (Z) coordinates are accepted")]
    MixedDimension { pos: usize },
    #[error("unsupported geometry at position {pos}: {what}")]
    Unsupported { pos: usize, what: String },
    #[error("coordinate is not finite")]
    NonFiniteValue,
    #[error("line string needs at least 2 points, got {0}")]
    LineStringTooShort(usize),
}

/// A coordinate triple in model units. Also used as a free vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    /// Unchecked constructor for values derived from already-finite inputs.
    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    /// Checked constructor: rejects NaN and infinities.
    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() && z.is_finite() {
            Ok(Point3 { x, y, z })
        } else {
            Err(GeometryError::NonFiniteValue)
        }
    }

    #[inline]
    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Largest absolute coordinate.
    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }
}

impl Add for Point3 {
    type Output = Point3;
    #[inline]
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    #[inline]
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    #[inline]
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.x, self.y, self.z)
    }
}

/// `L(t) = p0 + t (p1 - p0)`, `0 <= t <= 1`. Zero length is allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment {
    pub p0: Point3,
    pub p1: Point3,
}

impl LineSegment {
    pub const fn new(p0: Point3, p1: Point3) -> Self {
        LineSegment { p0, p1 }
    }

    #[inline]
    pub fn direction(&self) -> Point3 {
        self.p1 - self.p0
    }

    #[inline]
    pub fn point_at(&self, t: f64) -> Point3 {
        self.p0 + self.direction() * t
    }

    pub fn is_degenerate(&self) -> bool {
        self.p0 == self.p1
    }

    pub fn length(&self) -> f64 {
        self.direction().norm()
    }
}

/// Oriented triangle, vertices kept exactly in stored (counter-clockwise) order.
///
/// Parametrised as `T(u, v) = v0 + u e0 + v e1` with `e0 = v1 - v0`,
/// `e1 = v2 - v0`, `u, v >= 0`, `u + v <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v0: Point3,
    pub v1: Point3,
    pub v2: Point3,
}

impl Triangle {
    pub const fn new(v0: Point3, v1: Point3, v2: Point3) -> Self {
        Triangle { v0, v1, v2 }
    }

    #[inline]
    pub fn e0(&self) -> Point3 {
        self.v1 - self.v0
    }

    #[inline]
    pub fn e1(&self) -> Point3 {
        self.v2 - self.v0
    }

    /// Unnormalised normal `e0 x e1`; its length is twice the area.
    #[inline]
    pub fn normal(&self) -> Point3 {
        self.e0().cross(self.e1())
    }

    pub fn area(&self) -> f64 {
        0.5 * self.normal().norm()
    }

    pub fn is_degenerate(&self) -> bool {
        self.normal().norm() <= DEGENERATE_AREA_THRESHOLD
    }

    #[inline]
    pub fn point_at(&self, u: f64, v: f64) -> Point3 {
        self.v0 + self.e0() * u + self.e1() * v
    }

    /// Same triangle with the opposite winding.
    pub fn flipped(&self) -> Triangle {
        Triangle::new(self.v0, self.v2, self.v1)
    }

    pub fn vertices(&self) -> [Point3; 3] {
        [self.v0, self.v1, self.v2]
    }

    pub fn max_abs(&self) -> f64 {
        self.v0.max_abs().max(self.v1.max_abs()).max(self.v2.max_abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeshKind {
    Tin,
    PolyhedralSurface,
}

/// Flat array of oriented triangles (TIN or triangulated polyhedral surface).
#[derive(Debug)]
pub struct TriangleMesh {
    triangles: Vec<Triangle>,
    kind: MeshKind,
    has_degenerate_faces: bool,
    closure: OnceLock<ClosureReport>,
}

impl TriangleMesh {
    pub fn new(triangles: Vec<Triangle>, kind: MeshKind) -> Self {
        let has_degenerate_faces = triangles.iter().any(Triangle::is_degenerate);
        TriangleMesh {
            triangles,
            kind,
            has_degenerate_faces,
            closure: OnceLock::new(),
        }
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    pub fn has_degenerate_faces(&self) -> bool {
        self.has_degenerate_faces
    }

    /// Closedness report, computed once and cached.
    pub fn closure(&self) -> &ClosureReport {
        self.closure.get_or_init(|| validate_closed(self))
    }

    /// Every face with its winding reversed.
    pub fn flipped(&self) -> TriangleMesh {
        TriangleMesh::new(self.triangles.iter().map(Triangle::flipped).collect(), self.kind)
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(Point3) -> Point3) -> TriangleMesh {
        let tris = self
            .triangles
            .iter()
            .map(|t| Triangle::new(f(t.v0), f(t.v1), f(t.v2)))
            .collect();
        TriangleMesh::new(tris, self.kind)
    }
}

impl Clone for TriangleMesh {
    fn clone(&self) -> Self {
        TriangleMesh {
            triangles: self.triangles.clone(),
            kind: self.kind,
            has_degenerate_faces: self.has_degenerate_faces,
            closure: self.closure.clone(),
        }
    }
}

/// Meshes are equal when their triangles are; the source kind is not compared.
impl PartialEq for TriangleMesh {
    fn eq(&self, other: &Self) -> bool {
        self.triangles == other.triangles
    }
}

/// Tagged union of the supported geometry types.
///
/// A two-point [`Geometry::LineString`] compares equal to, and dispatches like,
/// the equivalent [`Geometry::Segment`].
#[derive(Debug, Clone)]
pub enum Geometry {
    Point(Point3),
    Segment(LineSegment),
    LineString(Vec<Point3>),
    Mesh(Arc<TriangleMesh>),
}

impl Geometry {
    /// Builds a line string; two points become a [`Geometry::Segment`].
    pub fn line_string(points: Vec<Point3>) -> Result<Geometry, GeometryError> {
        match points.len() {
            0 | 1 => Err(GeometryError::LineStringTooShort(points.len())),
            2 => Ok(Geometry::Segment(LineSegment::new(points[0], points[1]))),
            _ => Ok(Geometry::LineString(points)),
        }
    }

    pub fn mesh(mesh: TriangleMesh) -> Geometry {
        Geometry::Mesh(Arc::new(mesh))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Geometry::Point(_) => "POINT",
            Geometry::Segment(_) | Geometry::LineString(_) => "LINESTRING",
            Geometry::Mesh(m) => match m.kind() {
                MeshKind::Tin => "TIN",
                MeshKind::PolyhedralSurface => "POLYHEDRALSURFACE",
            },
        }
    }

    /// The segment this geometry is, if it is a segment or two-point line string.
    pub fn as_segment(&self) -> Option<LineSegment> {
        match self {
            Geometry::Segment(s) => Some(*s),
            Geometry::LineString(p) if p.len() == 2 => Some(LineSegment::new(p[0], p[1])),
            _ => None,
        }
    }

    /// Consecutive segments of a segment or line string.
    pub fn segments(&self) -> Option<Vec<LineSegment>> {
        match self {
            Geometry::Segment(s) => Some(vec![*s]),
            Geometry::LineString(p) => Some(p.windows(2).map(|w| LineSegment::new(w[0], w[1])).collect()),
            _ => None,
        }
    }

    pub fn as_mesh(&self) -> Option<&TriangleMesh> {
        match self {
            Geometry::Mesh(m) => Some(m),
            _ => None,
        }
    }

    /// Largest absolute coordinate over all vertices.
    pub fn max_abs(&self) -> f64 {
        match self {
            Geometry::Point(p) => p.max_abs(),
            Geometry::Segment(s) => s.p0.max_abs().max(s.p1.max_abs()),
            Geometry::LineString(p) => p.iter().fold(0.0, |m, q| m.max(q.max_abs())),
            Geometry::Mesh(m) => m.triangles().iter().fold(0.0, |a, t| a.max(t.max_abs())),
        }
    }
}

impl PartialEq for Geometry {
    fn eq(&self, other: &Self) -> bool {
        use Geometry::*;
        match (self, other) {
            (Point(a), Point(b)) => a == b,
            (Mesh(a), Mesh(b)) => a == b,
            (LineString(a), LineString(b)) => a == b,
            _ => match (self.as_segment(), other.as_segment()) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            },
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_wkt(self))
    }
}

impl std::str::FromStr for Geometry {
    type Err = GeometryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_wkt(s)
    }
}
