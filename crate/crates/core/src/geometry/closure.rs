use super::{Point3, TriangleMesh};
use std::collections::HashMap;

/// Edge-manifold report for a triangle mesh.
///
/// `boundary_edge_count` counts undirected edges used by exactly one face.
/// `inconsistent_edge_count` counts the directed face edges (half-edges) lying on
/// an undirected edge that is used twice in the same direction or more than
/// twice; a single flipped triangle in a closed mesh therefore reports 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosureReport {
    pub is_closed: bool,
    pub boundary_edge_count: usize,
    pub inconsistent_edge_count: usize,
}

type VertexKey = [u64; 3];

fn key(p: Point3) -> VertexKey {
    // -0.0 and 0.0 are the same vertex
    [(p.x + 0.0).to_bits(), (p.y + 0.0).to_bits(), (p.z + 0.0).to_bits()]
}

/// Closed iff every undirected edge is shared by exactly two faces with
/// opposite directions. Vertices are identified by exact coordinates.
pub fn validate_closed(mesh: &TriangleMesh) -> ClosureReport {
    // (forward, backward) uses per undirected edge, keyed low -> high
    let mut edges: HashMap<(VertexKey, VertexKey), (usize, usize)> =
        HashMap::with_capacity(mesh.face_count() * 3 / 2 + 1);
    for tri in mesh.triangles() {
        let v = [key(tri.v0), key(tri.v1), key(tri.v2)];
        for i in 0..3 {
            let (a, b) = (v[i], v[(i + 1) % 3]);
            if a < b {
                edges.entry((a, b)).or_default().0 += 1;
            } else {
                edges.entry((b, a)).or_default().1 += 1;
            }
        }
    }

    let mut boundary = 0;
    let mut inconsistent = 0;
    for &(fwd, back) in edges.values() {
        match (fwd, back) {
            (1, 0) | (0, 1) => boundary += 1,
            (1, 1) => {}
            (f, b) => inconsistent += f + b,
        }
    }
    ClosureReport {
        is_closed: mesh.face_count() > 0 && boundary == 0 && inconsistent == 0,
        boundary_edge_count: boundary,
        inconsistent_edge_count: inconsistent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes::{icosphere, octasphere, unit_cube};
    use crate::geometry::{MeshKind, Triangle};

    #[test]
    fn unit_cube_is_closed() {
        let r = validate_closed(&unit_cube());
        assert_eq!(
            r,
            ClosureReport {
                is_closed: true,
                boundary_edge_count: 0,
                inconsistent_edge_count: 0
            }
        );
    }

    #[test]
    fn single_triangle_is_open() {
        let m = TriangleMesh::new(
            vec![Triangle::new(
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            )],
            MeshKind::Tin,
        );
        assert_eq!(
            validate_closed(&m),
            ClosureReport {
                is_closed: false,
                boundary_edge_count: 3,
                inconsistent_edge_count: 0
            }
        );
    }

    /// Brute-force oracle: count directed-edge conflicts by pairwise comparison.
    fn conflicting_half_edges(mesh: &TriangleMesh) -> usize {
        let half: Vec<(Point3, Point3)> = mesh
            .triangles()
            .iter()
            .flat_map(|t| [(t.v0, t.v1), (t.v1, t.v2), (t.v2, t.v0)])
            .collect();
        half.iter()
            .enumerate()
            .filter(|(i, h)| {
                let same = half
                    .iter()
                    .enumerate()
                    .filter(|(j, g)| j != i && g.0 == h.0 && g.1 == h.1)
                    .count();
                let uses = half
                    .iter()
                    .filter(|g| (g.0 == h.0 && g.1 == h.1) || (g.0 == h.1 && g.1 == h.0))
                    .count();
                same > 0 || uses > 2
            })
            .count()
    }

    #[test]
    fn one_flipped_face_gives_six_conflicts() {
        let cube = unit_cube();
        let mut tris = cube.triangles().to_vec();
        tris[5] = tris[5].flipped();
        let m = TriangleMesh::new(tris, MeshKind::Tin);
        assert_eq!(conflicting_half_edges(&m), 6);
        assert_eq!(
            validate_closed(&m),
            ClosureReport {
                is_closed: false,
                boundary_edge_count: 0,
                inconsistent_edge_count: 6
            }
        );
    }

    #[test]
    fn spheres_are_closed() {
        for k in 0..4 {
            assert!(validate_closed(&icosphere(k, 1.0)).is_closed, "icosphere {k}");
            assert!(validate_closed(&octasphere(k, 2.5)).is_closed, "octasphere {k}");
        }
    }

    #[test]
    fn fully_flipped_cube_is_still_closed() {
        assert!(validate_closed(&unit_cube().flipped()).is_closed);
    }

    #[test]
    fn duplicated_face_is_inconsistent() {
        let cube = unit_cube();
        let mut tris = cube.triangles().to_vec();
        tris.push(tris[0]);
        let m = TriangleMesh::new(tris, MeshKind::Tin);
        let r = validate_closed(&m);
        assert!(!r.is_closed);
        assert_eq!(r.inconsistent_edge_count, conflicting_half_edges(&m));
    }
}
