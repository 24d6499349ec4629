//! Reference computations written independently of the library kernels, plus
//! seeded input generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatial3d::geometry::{LineSegment, MeshKind, Point3, Triangle, TriangleMesh};

pub type V = [f64; 3];

pub fn v(p: Point3) -> V {
    [p.x, p.y, p.z]
}

fn sub(a: V, b: V) -> V {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: V, b: V) -> V {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: V, s: f64) -> V {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: V, b: V) -> V {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dist(a: V, b: V) -> f64 {
    let d = sub(a, b);
    dot(d, d).sqrt()
}

/// `|L(t) - T(u, v)|` with `L(t) = p0 + t (p1 - p0)` and
/// `T(u, v) = v0 + u (v1 - v0) + v (v2 - v0)`.
pub fn sample_distance(seg: &LineSegment, tri: &Triangle, t: f64, u: f64, w: f64) -> f64 {
    let (p0, p1) = (v(seg.p0), v(seg.p1));
    let (a, b, c) = (v(tri.v0), v(tri.v1), v(tri.v2));
    let l = add(p0, scale(sub(p1, p0), t));
    let q = add(a, add(scale(sub(b, a), u), scale(sub(c, a), w)));
    dist(l, q)
}

/// Uniform point of the domain `t in [0,1]`, `u, v >= 0`, `u + v <= 1`.
pub fn random_params(rng: &mut impl Rng) -> (f64, f64, f64) {
    let t = rng.random::<f64>();
    let (mut u, mut w) = (rng.random::<f64>(), rng.random::<f64>());
    if u + w > 1.0 {
        u = 1.0 - u;
        w = 1.0 - w;
    }
    (t, u, w)
}

/// Minimum of a convex function on `[lo, hi]`: an 11-node grid brackets the
/// minimiser within one step of the best node, then golden-section search
/// narrows the bracket.
fn refine_1d(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    const NODES: usize = 11;
    if hi <= lo {
        return f(lo);
    }
    let step = (hi - lo) / (NODES - 1) as f64;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..NODES {
        let y = f(lo + step * i as f64);
        if y < best.0 {
            best = (y, i);
        }
    }
    let mut a = (lo + step * (best.1 as f64 - 1.0)).max(lo);
    let mut b = (lo + step * (best.1 as f64 + 1.0)).min(hi);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut min = best.0.min(f1).min(f2);
    for _ in 0..60 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
            min = min.min(f1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
            min = min.min(f2);
        }
    }
    min
}

/// Minimum of `sample_distance` over the domain by nested refinement in
/// `t`, `u` and `v`. Partial minima of a jointly convex function stay convex,
/// so each level is a one-dimensional convex search. Every evaluated node is
/// feasible, so the result is an upper bound.
pub fn grid_segment_triangle(seg: &LineSegment, tri: &Triangle) -> f64 {
    refine_1d(0.0, 1.0, |t| {
        refine_1d(0.0, 1.0, |u| {
            refine_1d(0.0, 1.0 - u, |w| sample_distance(seg, tri, t, u, w))
        })
    })
}

/// Segment/segment distance sampled on an `n x n` parameter grid.
pub fn grid_segment_segment(a: &LineSegment, b: &LineSegment, n: usize) -> f64 {
    let (a0, a1, b0, b1) = (v(a.p0), v(a.p1), v(b.p0), v(b.p1));
    let (da, db) = (sub(a1, a0), sub(b1, b0));
    let mut best = f64::INFINITY;
    for i in 0..n {
        let pa = add(a0, scale(da, i as f64 / (n - 1) as f64));
        for j in 0..n {
            let pb = add(b0, scale(db, j as f64 / (n - 1) as f64));
            best = best.min(dist(pa, pb));
        }
    }
    best
}

/// Sum of signed tetrahedra against the vertex centroid, with compensated
/// summation.
pub fn signed_tetra_volume(mesh: &TriangleMesh) -> f64 {
    let tris = mesh.triangles();
    let mut o = [0.0; 3];
    for tri in tris {
        for p in tri.vertices() {
            o = add(o, v(p));
        }
    }
    let o = scale(o, 1.0 / (3 * tris.len()) as f64);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for tri in tris {
        let (a, b, c) = (sub(v(tri.v0), o), sub(v(tri.v1), o), sub(v(tri.v2), o));
        let term = dot(a, cross(b, c)) / 6.0;
        let t = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - t) + term
        } else {
            (term - t) + sum
        };
        sum = t;
    }
    sum + comp
}

fn closest_on_triangle(p: V, a: V, b: V, c: V) -> V {
    let (ab, ac, ap) = (sub(b, a), sub(c, a), sub(p, a));
    let (d1, d2) = (dot(ab, ap), dot(ac, ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let (d3, d4) = (dot(ab, bp), dot(ac, bp));
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return add(a, scale(ab, d1 / (d1 - d3)));
    }
    let cp = sub(p, c);
    let (d5, d6) = (dot(ab, cp), dot(ac, cp));
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return add(a, scale(ac, d2 / (d2 - d6)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return add(b, scale(sub(c, b), (d4 - d3) / ((d4 - d3) + (d5 - d6))));
    }
    let denom = 1.0 / (va + vb + vc);
    add(a, add(scale(ab, vb * denom), scale(ac, vc * denom)))
}

pub fn ref_point_triangle(p: Point3, tri: &Triangle) -> f64 {
    let p = v(p);
    dist(p, closest_on_triangle(p, v(tri.v0), v(tri.v1), v(tri.v2)))
}

pub fn ref_segment_segment(s: &LineSegment, r: &LineSegment) -> f64 {
    let (p1, q1, p2, q2) = (v(s.p0), v(s.p1), v(r.p0), v(r.p1));
    let (d1, d2, rr) = (sub(q1, p1), sub(q2, p2), sub(p1, p2));
    let (a, e, f) = (dot(d1, d1), dot(d2, d2), dot(d2, rr));
    let eps = 1e-300;
    let (sc, tc);
    if a <= eps && e <= eps {
        return dist(p1, p2);
    }
    if a <= eps {
        sc = 0.0;
        tc = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(d1, rr);
        if e <= eps {
            tc = 0.0;
            sc = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            sc = s0;
            tc = t0;
        }
    }
    dist(add(p1, scale(d1, sc)), add(p2, scale(d2, tc)))
}

fn orient(a: V, b: V, c: V, d: V) -> f64 {
    dot(sub(a, d), cross(sub(b, d), sub(c, d)))
}

/// Strict crossing test from orientation signs; touching configurations count
/// as non-crossing and fall through to the boundary distances.
fn segment_crosses_triangle(s: &LineSegment, tri: &Triangle) -> bool {
    let (p, q) = (v(s.p0), v(s.p1));
    let (a, b, c) = (v(tri.v0), v(tri.v1), v(tri.v2));
    let (sp, sq) = (orient(a, b, c, p), orient(a, b, c, q));
    if !((sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0)) {
        return false;
    }
    let e0 = orient(p, q, a, b);
    let e1 = orient(p, q, b, c);
    let e2 = orient(p, q, c, a);
    (e0 > 0.0 && e1 > 0.0 && e2 > 0.0) || (e0 < 0.0 && e1 < 0.0 && e2 < 0.0)
}

/// Closed-form segment/triangle distance: zero on a proper crossing,
/// otherwise the least of the endpoint projections and the three edge pairs.
pub fn ref_segment_triangle(s: &LineSegment, tri: &Triangle) -> f64 {
    if segment_crosses_triangle(s, tri) {
        return 0.0;
    }
    let edges = [
        LineSegment::new(tri.v0, tri.v1),
        LineSegment::new(tri.v1, tri.v2),
        LineSegment::new(tri.v2, tri.v0),
    ];
    let mut best = ref_point_triangle(s.p0, tri).min(ref_point_triangle(s.p1, tri));
    for e in &edges {
        best = best.min(ref_segment_segment(s, e));
    }
    best
}

pub fn ref_segment_mesh(s: &LineSegment, mesh: &TriangleMesh) -> f64 {
    mesh.triangles()
        .iter()
        .map(|t| ref_segment_triangle(s, t))
        .fold(f64::INFINITY, f64::min)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(rng: &mut impl Rng, half: f64) -> Point3 {
    Point3::new(
        rng.random_range(-half..half),
        rng.random_range(-half..half),
        rng.random_range(-half..half),
    )
}

pub fn random_segment(rng: &mut impl Rng, half: f64) -> LineSegment {
    LineSegment::new(random_point(rng, half), random_point(rng, half))
}

/// Random non-degenerate triangle.
pub fn random_triangle(rng: &mut impl Rng, half: f64) -> Triangle {
    loop {
        let t = Triangle::new(
            random_point(rng, half),
            random_point(rng, half),
            random_point(rng, half),
        );
        if t.area() > 1e-3 * half * half {
            return t;
        }
    }
}

/// Small random triangle soup near the origin, for kernel consistency checks.
pub fn random_soup(rng: &mut impl Rng, faces: usize, half: f64) -> TriangleMesh {
    TriangleMesh::new((0..faces).map(|_| random_triangle(rng, half)).collect(), MeshKind::Tin)
}
