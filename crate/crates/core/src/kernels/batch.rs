//! Column-wide evaluation of one operator over a table snapshot.

use super::distance::{distance_to_mesh, segment_segment_distance, DistanceQuery, DistanceResult};
use super::intersect::intersects_mesh;
use super::prepared::PreparedMesh;
use super::volume::mesh_volume;
use super::{Backend, ExecutorConfig, KernelError};
use crate::geometry::{Geometry, LineSegment};
use crate::store::GeometryRecord;

/// Point/mesh and segment/segment contact is decided by
/// `distance <= CONTACT_TOLERANCE * (1 + coordinate scale)`.
pub const CONTACT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BatchOp {
    Volume,
    Distance,
    Intersects,
}

impl BatchOp {
    pub fn sql_name(self) -> &'static str {
        match self {
            BatchOp::Volume => "ST_Volume",
            BatchOp::Distance => "ST_3DDistance",
            BatchOp::Intersects => "ST_3DIntersects",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelValue {
    Real(f64),
    Bool(bool),
    Error(KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelWarning {
    /// Volume of a mesh that failed the closedness check.
    OpenMesh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelResult {
    pub record_id: i64,
    pub value: KernelValue,
    pub warning: Option<KernelWarning>,
}

/// Evaluates `op` for every record, in input order. Per-record failures are
/// stored in that record's slot; only a bad call shape fails the whole batch.
pub fn run_batch(
    op: BatchOp,
    records: &[GeometryRecord],
    argument: Option<&Geometry>,
    cfg: &ExecutorConfig,
) -> Result<Vec<KernelResult>, KernelError> {
    cfg.validate()?;
    match (op, argument) {
        (BatchOp::Volume, Some(_)) => {
            return Err(KernelError::InvalidArgument(
                "ST_Volume takes no second argument".into(),
            ))
        }
        (BatchOp::Distance | BatchOp::Intersects, None) => {
            return Err(KernelError::InvalidArgument(format!(
                "{} needs a second geometry",
                op.sql_name()
            )))
        }
        _ => {}
    }

    let prepared = match argument {
        Some(Geometry::Mesh(m)) if records.len() > 1 && m.face_count() > 0 => Some(PreparedMesh::new(m)),
        _ => None,
    };
    let eval = |rec: &GeometryRecord, inner: &ExecutorConfig| {
        let result = match (&prepared, argument) {
            (Some(pm), Some(arg)) => evaluate_prepared(op, &rec.geometry, arg, pm),
            _ => evaluate(op, &rec.geometry, argument, inner),
        };
        let (value, warning) = match result {
            Ok(v) => v,
            Err(e) => (KernelValue::Error(e), None),
        };
        KernelResult {
            record_id: rec.id,
            value,
            warning,
        }
    };

    if records.len() <= 1 || cfg.backend == Backend::Sequential {
        // a lone record gets the face-parallel executor
        return Ok(records.iter().map(|r| eval(r, cfg)).collect());
    }
    let inner = cfg.inner();
    let per_unit = records
        .len()
        .div_ceil(cfg.worker_count.max(1) * 8)
        .clamp(1, cfg.chunk_size);
    let outer = cfg.with_chunk_size(per_unit);
    Ok(outer
        .map_chunks(records.len(), |_, r| {
            records[r].iter().map(|rec| eval(rec, &inner)).collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect())
}

fn evaluate(
    op: BatchOp,
    geom: &Geometry,
    argument: Option<&Geometry>,
    cfg: &ExecutorConfig,
) -> Result<(KernelValue, Option<KernelWarning>), KernelError> {
    match op {
        BatchOp::Volume => match geom {
            Geometry::Mesh(m) => {
                let v = mesh_volume(m, cfg)?;
                Ok((
                    KernelValue::Real(v.value),
                    v.not_closed.then_some(KernelWarning::OpenMesh),
                ))
            }
            other => Err(KernelError::TypeMismatch {
                op: op.sql_name(),
                left: other.type_name(),
                right: "nothing",
            }),
        },
        BatchOp::Distance => {
            let arg = argument.expect("checked by run_batch");
            Ok((KernelValue::Real(distance_between(geom, arg, cfg)?.distance), None))
        }
        BatchOp::Intersects => {
            let arg = argument.expect("checked by run_batch");
            Ok((KernelValue::Bool(intersects_between(geom, arg, cfg)?), None))
        }
    }
}

fn evaluate_prepared(
    op: BatchOp,
    geom: &Geometry,
    mesh: &Geometry,
    prepared: &PreparedMesh<'_>,
) -> Result<(KernelValue, Option<KernelWarning>), KernelError> {
    let value = match (op, geom) {
        (BatchOp::Distance, Geometry::Point(p)) => KernelValue::Real(
            prepared
                .distance(DistanceQuery::Point(*p))
                .map_or(f64::INFINITY, |r| r.distance),
        ),
        (BatchOp::Intersects, Geometry::Point(p)) => {
            let d = prepared
                .distance(DistanceQuery::Point(*p))
                .map_or(f64::INFINITY, |r| r.distance);
            KernelValue::Bool(d <= CONTACT_TOLERANCE * (1.0 + geom.max_abs().max(mesh.max_abs())))
        }
        (BatchOp::Distance, Geometry::Segment(_) | Geometry::LineString(_)) => {
            let pieces = geom.segments().ok_or_else(|| mismatch(op, geom, mesh))?;
            let d = pieces
                .into_iter()
                .filter_map(|s| prepared.distance(DistanceQuery::Segment(s)))
                .map(|r| r.distance)
                .fold(f64::INFINITY, |a, b| if b < a { b } else { a });
            KernelValue::Real(d)
        }
        (BatchOp::Intersects, Geometry::Segment(_) | Geometry::LineString(_)) => {
            let pieces = geom.segments().ok_or_else(|| mismatch(op, geom, mesh))?;
            KernelValue::Bool(pieces.iter().any(|s| prepared.intersect(s).hit))
        }
        (BatchOp::Volume, _) => unreachable!("volume takes no argument"),
        _ => return Err(mismatch(op, geom, mesh)),
    };
    Ok((value, None))
}

fn mismatch(op: BatchOp, a: &Geometry, b: &Geometry) -> KernelError {
    KernelError::TypeMismatch {
        op: op.sql_name(),
        left: a.type_name(),
        right: b.type_name(),
    }
}

/// 3D distance for every pairing except mesh/mesh, in either order. Line
/// strings are chains of segments.
pub fn distance_between(a: &Geometry, b: &Geometry, cfg: &ExecutorConfig) -> Result<DistanceResult, KernelError> {
    match (a, b) {
        (Geometry::Mesh(_), Geometry::Point(_) | Geometry::Segment(_) | Geometry::LineString(_)) => {
            distance_between(b, a, cfg).map(DistanceResult::swapped)
        }
        (Geometry::Point(p), Geometry::Mesh(m)) => distance_to_mesh(DistanceQuery::Point(*p), m, cfg),
        (_, Geometry::Mesh(m)) => {
            let pieces = a.segments().ok_or_else(|| mismatch(BatchOp::Distance, a, b))?;
            let mut best: Option<DistanceResult> = None;
            for seg in pieces {
                let r = distance_to_mesh(DistanceQuery::Segment(seg), m, cfg)?;
                if best.is_none_or(|b| r.distance < b.distance) {
                    best = Some(r);
                }
            }
            Ok(best.expect("line strings have at least one segment"))
        }
        _ => {
            let (Some(sa), Some(sb)) = (pieces(a), pieces(b)) else {
                return Err(mismatch(BatchOp::Distance, a, b));
            };
            Ok(min_segment_pairs(&sa, &sb))
        }
    }
}

/// Segments of a linear geometry; a point is a zero-length segment.
fn pieces(g: &Geometry) -> Option<Vec<LineSegment>> {
    match g {
        Geometry::Point(p) => Some(vec![LineSegment::new(*p, *p)]),
        other => other.segments(),
    }
}

fn min_segment_pairs(a: &[LineSegment], b: &[LineSegment]) -> DistanceResult {
    let mut best: Option<DistanceResult> = None;
    for sa in a {
        for sb in b {
            let r = segment_segment_distance(sa, sb);
            if best.is_none_or(|b| r.distance < b.distance) {
                best = Some(r);
            }
        }
    }
    best.expect("non-empty segment lists")
}

/// 3D intersection for the same pairings as [`distance_between`].
///
/// Segment/mesh uses the plane-piercing kernel (a segment lying in a face's
/// plane is not reported). Point/mesh and segment/segment use a contact
/// tolerance on the distance kernels.
pub fn intersects_between(a: &Geometry, b: &Geometry, cfg: &ExecutorConfig) -> Result<bool, KernelError> {
    let contact = |r: DistanceResult| {
        let scale = a.max_abs().max(b.max_abs());
        r.distance <= CONTACT_TOLERANCE * (1.0 + scale)
    };
    match (a, b) {
        (Geometry::Mesh(_), Geometry::Point(_) | Geometry::Segment(_) | Geometry::LineString(_)) => {
            intersects_between(b, a, cfg)
        }
        (Geometry::Point(p), Geometry::Mesh(m)) => Ok(contact(distance_to_mesh(DistanceQuery::Point(*p), m, cfg)?)),
        (_, Geometry::Mesh(m)) => {
            let pieces = a.segments().ok_or_else(|| mismatch(BatchOp::Intersects, a, b))?;
            for seg in pieces {
                if intersects_mesh(&seg, m, cfg)?.hit {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        _ => {
            let (Some(sa), Some(sb)) = (pieces(a), pieces(b)) else {
                return Err(mismatch(BatchOp::Intersects, a, b));
            };
            Ok(contact(min_segment_pairs(&sa, &sb)))
        }
    }
}
