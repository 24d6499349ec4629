//! Closed reference solids: cube, subdivided icosahedron and octahedron.
//!
//! All faces are wound counter-clockwise seen from outside.

use super::{MeshKind, Point3, Triangle, TriangleMesh};
use std::collections::HashMap;

/// Axis-aligned unit cube `[0,1]^3` as 12 triangles.
pub fn unit_cube() -> TriangleMesh {
    cuboid(Point3::ORIGIN, Point3::new(1.0, 1.0, 1.0))
}

/// Axis-aligned box between `lo` and `hi` as 12 outward-CCW triangles.
pub fn cuboid(lo: Point3, hi: Point3) -> TriangleMesh {
    const FACES: [[[u8; 3]; 3]; 12] = [
        [[0, 0, 0], [0, 1, 0], [1, 1, 0]],
        [[0, 0, 0], [1, 1, 0], [1, 0, 0]],
        [[0, 0, 1], [1, 0, 1], [1, 1, 1]],
        [[0, 0, 1], [1, 1, 1], [0, 1, 1]],
        [[0, 0, 0], [1, 0, 0], [1, 0, 1]],
        [[0, 0, 0], [1, 0, 1], [0, 0, 1]],
        [[0, 1, 0], [0, 1, 1], [1, 1, 1]],
        [[0, 1, 0], [1, 1, 1], [1, 1, 0]],
        [[0, 0, 0], [0, 0, 1], [0, 1, 1]],
        [[0, 0, 0], [0, 1, 1], [0, 1, 0]],
        [[1, 0, 0], [1, 1, 0], [1, 1, 1]],
        [[1, 0, 0], [1, 1, 1], [1, 0, 1]],
    ];
    let pick = |c: [u8; 3]| {
        Point3::new(
            if c[0] == 0 { lo.x } else { hi.x },
            if c[1] == 0 { lo.y } else { hi.y },
            if c[2] == 0 { lo.z } else { hi.z },
        )
    };
    let tris = FACES
        .iter()
        .map(|f| Triangle::new(pick(f[0]), pick(f[1]), pick(f[2])))
        .collect();
    TriangleMesh::new(tris, MeshKind::PolyhedralSurface)
}

/// Icosahedron subdivided `level` times, vertices on a sphere of `radius`.
/// Has `20 * 4^level` faces.
pub fn icosphere(level: u32, radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let verts = vec![
        Point3::new(-1.0, t, 0.0),
        Point3::new(1.0, t, 0.0),
        Point3::new(-1.0, -t, 0.0),
        Point3::new(1.0, -t, 0.0),
        Point3::new(0.0, -1.0, t),
        Point3::new(0.0, 1.0, t),
        Point3::new(0.0, -1.0, -t),
        Point3::new(0.0, 1.0, -t),
        Point3::new(t, 0.0, -1.0),
        Point3::new(t, 0.0, 1.0),
        Point3::new(-t, 0.0, -1.0),
        Point3::new(-t, 0.0, 1.0),
    ];
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    subdivided_sphere(verts, faces, level, radius)
}

/// Octahedron subdivided `level` times, vertices on a sphere of `radius`.
/// Has `8 * 4^level` faces.
pub fn octasphere(level: u32, radius: f64) -> TriangleMesh {
    let verts = vec![
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(-1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, -1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(0.0, 0.0, -1.0),
    ];
    let faces = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    subdivided_sphere(verts, faces, level, radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereBase {
    Icosahedron,
    Octahedron,
}

impl SphereBase {
    pub fn face_count(self, level: u32) -> usize {
        let base = match self {
            SphereBase::Icosahedron => 20,
            SphereBase::Octahedron => 8,
        };
        base * 4usize.pow(level)
    }

    pub fn build(self, level: u32, radius: f64) -> TriangleMesh {
        match self {
            SphereBase::Icosahedron => icosphere(level, radius),
            SphereBase::Octahedron => octasphere(level, radius),
        }
    }
}

/// Base solid and subdivision level whose face count is closest to `target`.
/// Ties go to the icosahedral family, then to the coarser mesh.
pub fn sphere_for_face_target(target: usize) -> (SphereBase, u32) {
    let mut best = (SphereBase::Icosahedron, 0u32);
    let mut best_gap = usize::MAX;
    for level in 0..12 {
        for base in [SphereBase::Icosahedron, SphereBase::Octahedron] {
            let gap = base.face_count(level).abs_diff(target);
            if gap < best_gap {
                best_gap = gap;
                best = (base, level);
            }
        }
    }
    best
}

fn subdivided_sphere(mut verts: Vec<Point3>, mut faces: Vec<[usize; 3]>, level: u32, radius: f64) -> TriangleMesh {
    for v in verts.iter_mut() {
        *v = *v * (1.0 / v.norm());
    }
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Point3>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = verts[a] + verts[b];
                verts.push(m * (1.0 / m.norm()));
                verts.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let tris = faces
        .iter()
        .map(|&[a, b, c]| Triangle::new(verts[a] * radius, verts[b] * radius, verts[c] * radius))
        .collect();
    TriangleMesh::new(tris, MeshKind::Tin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_counts() {
        assert_eq!(unit_cube().face_count(), 12);
        assert_eq!(icosphere(0, 1.0).face_count(), 20);
        assert_eq!(icosphere(3, 1.0).face_count(), 1280);
        assert_eq!(octasphere(3, 1.0).face_count(), 512);
    }

    #[test]
    fn face_target_selection() {
        assert_eq!(sphere_for_face_target(500), (SphereBase::Octahedron, 3));
        assert_eq!(sphere_for_face_target(512), (SphereBase::Octahedron, 3));
        assert_eq!(sphere_for_face_target(20), (SphereBase::Icosahedron, 0));
        assert_eq!(sphere_for_face_target(1), (SphereBase::Octahedron, 0));
        assert_eq!(sphere_for_face_target(1300), (SphereBase::Icosahedron, 3));
    }

    #[test]
    fn faces_point_outward() {
        for mesh in [unit_cube(), icosphere(2, 1.0), octasphere(2, 1.0)] {
            let c = mesh
                .triangles()
                .iter()
                .fold(Point3::ORIGIN, |acc, t| acc + t.v0 + t.v1 + t.v2)
                * (1.0 / (3.0 * mesh.face_count() as f64));
            for t in mesh.triangles() {
                let centroid = (t.v0 + t.v1 + t.v2) * (1.0 / 3.0);
                assert!(t.normal().dot(centroid - c) > 0.0);
            }
        }
    }
}
