use crate::geometry::shapes::sphere_for_face_target;
use crate::geometry::{serialize_wkt, Geometry, LineSegment, Point3, TriangleMesh};
use crate::store::GeometryRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const DRILLS_FILE: &str = "drills.csv";
pub const ORE_FILE: &str = "ore.wkt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrillStyle {
    /// Collars on the top face of the box, holes heading mostly downward.
    #[default]
    VerticalJittered,
    /// Both endpoints uniform in the box.
    UniformRandom,
}

impl std::str::FromStr for DrillStyle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vertical" | "vertical-jittered" | "verticaljittered" => Ok(DrillStyle::VerticalJittered),
            "uniform" | "uniform-random" | "uniformrandom" => Ok(DrillStyle::UniformRandom),
            other => Err(format!("unknown drill style '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Point3,
    pub max: Point3,
}

impl BoundingBox {
    pub fn center(&self) -> Point3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }
}

impl Default for BoundingBox {
    fn default() -> Self {
        BoundingBox {
            min: Point3::new(0.0, 0.0, -500.0),
            max: Point3::new(1000.0, 1000.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub seed: u64,
    pub segment_count: usize,
    pub mesh_face_target: usize,
    pub bounding_box: BoundingBox,
    pub drill_style: DrillStyle,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            seed: 42,
            segment_count: 100_000,
            mesh_face_target: 500,
            bounding_box: BoundingBox::default(),
            drill_style: DrillStyle::VerticalJittered,
        }
    }
}

/// Largest horizontal drift per unit of depth for vertical holes.
const JITTER: f64 = 0.15;
/// Ore body semi-axes as a fraction of the box extent.
const ORE_FRACTION: f64 = 0.2;

fn round_mm(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.segment_count == 0 {
            return Err("segment_count must be positive".into());
        }
        if self.mesh_face_target == 0 {
            return Err("mesh_face_target must be positive".into());
        }
        let e = self.bounding_box.extent();
        if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) {
            return Err("bounding box must have positive extent".into());
        }
        Ok(())
    }

    /// Drill holes with ids `1..=segment_count`. Coordinates are rounded to
    /// three decimals so the CSV text is exact.
    pub fn drills(&self) -> Vec<GeometryRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let bb = self.bounding_box;
        let depth = bb.extent().z;
        (1..=self.segment_count as i64)
            .map(|id| {
                let (a, b) = match self.drill_style {
                    DrillStyle::VerticalJittered => {
                        let collar = Point3::new(
                            uniform(&mut rng, bb.min.x, bb.max.x),
                            uniform(&mut rng, bb.min.y, bb.max.y),
                            bb.max.z,
                        );
                        let len = uniform(&mut rng, 0.5, 1.0) * depth;
                        let dx = uniform(&mut rng, -JITTER, JITTER);
                        let dy = uniform(&mut rng, -JITTER, JITTER);
                        let dir = Point3::new(dx, dy, -1.0);
                        let dir = dir * (1.0 / dir.norm());
                        (collar, collar + dir * len)
                    }
                    DrillStyle::UniformRandom => {
                        let mut p = || {
                            Point3::new(
                                uniform(&mut rng, bb.min.x, bb.max.x),
                                uniform(&mut rng, bb.min.y, bb.max.y),
                                uniform(&mut rng, bb.min.z, bb.max.z),
                            )
                        };
                        (p(), p())
                    }
                };
                let r = |p: Point3| Point3::new(round_mm(p.x), round_mm(p.y), round_mm(p.z));
                GeometryRecord {
                    id,
                    geometry: Geometry::Segment(LineSegment::new(r(a), r(b))),
                }
            })
            .collect()
    }

    /// Closed ore body: a subdivided sphere stretched into an ellipsoid at the
    /// box center, with the face count nearest the target.
    pub fn ore_body(&self) -> TriangleMesh {
        let (base, level) = sphere_for_face_target(self.mesh_face_target);
        let c = self.bounding_box.center();
        let e = self.bounding_box.extent() * ORE_FRACTION;
        base.build(level, 1.0).map_vertices(|v| {
            Point3::new(
                round_mm(c.x + v.x * e.x),
                round_mm(c.y + v.y * e.y),
                round_mm(c.z + v.z * e.z),
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub drills_csv: PathBuf,
    pub ore_wkt: PathBuf,
    pub segment_count: usize,
    pub face_count: usize,
}

/// Writes `drills.csv` (`id,geometry` with quoted `LINESTRING Z`) and
/// `ore.wkt` (one `TIN Z`) into `out_dir`.
pub fn generate_dataset(spec: &DatasetSpec, out_dir: &Path) -> std::io::Result<GeneratedDataset> {
    spec.validate()
        .map_err(|m| std::io::Error::new(std::io::ErrorKind::InvalidInput, m))?;
    std::fs::create_dir_all(out_dir)?;
    let drills_csv = out_dir.join(DRILLS_FILE);
    let ore_wkt = out_dir.join(ORE_FILE);

    let drills = spec.drills();
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(std::io::BufWriter::new(std::fs::File::create(&drills_csv)?));
    w.write_record(["id", "geometry"])?;
    for rec in &drills {
        w.write_record([rec.id.to_string(), serialize_wkt(&rec.geometry)])?;
    }
    w.flush()?;

    let ore = spec.ore_body();
    let face_count = ore.face_count();
    let mut f = std::io::BufWriter::new(std::fs::File::create(&ore_wkt)?);
    writeln!(f, "{}", serialize_wkt(&Geometry::mesh(ore)))?;
    f.flush()?;

    Ok(GeneratedDataset {
        drills_csv,
        ore_wkt,
        segment_count: drills.len(),
        face_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertical_drills_start_at_the_top() {
        let spec = DatasetSpec {
            segment_count: 200,
            ..DatasetSpec::default()
        };
        let bb = spec.bounding_box;
        for r in spec.drills() {
            let s = r.geometry.as_segment().unwrap();
            assert_eq!(s.p0.z, bb.max.z);
            assert!(s.p1.z < s.p0.z);
            assert!(s.p0.x >= bb.min.x && s.p0.x <= bb.max.x);
        }
    }

    #[test]
    fn uniform_drills_stay_in_the_box() {
        let spec = DatasetSpec {
            segment_count: 200,
            drill_style: DrillStyle::UniformRandom,
            ..DatasetSpec::default()
        };
        let bb = spec.bounding_box;
        for r in spec.drills() {
            let s = r.geometry.as_segment().unwrap();
            for p in [s.p0, s.p1] {
                assert!(p.x >= bb.min.x && p.x <= bb.max.x);
                assert!(p.z >= bb.min.z && p.z <= bb.max.z);
            }
        }
    }

    #[test]
    fn seeds_differ() {
        let a = DatasetSpec {
            segment_count: 5,
            ..DatasetSpec::default()
        };
        let b = DatasetSpec { seed: 43, ..a };
        assert_ne!(a.drills(), b.drills());
        assert_eq!(a.drills(), a.drills());
    }
}
