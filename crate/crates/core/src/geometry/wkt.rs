//! WKT reader and writer for the 3D subset.
//!
//! Grammar (keywords case-insensitive, whitespace anywhere between tokens):
//!
//! ```text
//! geometry    = point | linestring | tin | polysurface
//! point       = "POINT" ["Z"] "(" coord ")"
//! linestring  = "LINESTRING" ["Z"] "(" coord { "," coord } ")"      (>= 2 coords)
//! tin         = "TIN" ["Z"] "(" patch { "," patch } ")"            (triangle patches)
//! polysurface = "POLYHEDRALSURFACE" ["Z"] "(" patch { "," patch } ")"
//! patch       = "(" ring ")"
//! ring        = "(" coord { "," coord } ")"                        (>= 4 coords, closed)
//! coord       = number number number
//! ```
//!
//! Polygon faces are fan-triangulated from their first vertex and the closing
//! vertex is dropped. Faces are assumed planar and convex.

use super::{Geometry, GeometryError, LineSegment, MeshKind, Point3, Triangle, TriangleMesh};
use std::fmt::Write;

pub fn parse_wkt(text: &str) -> Result<Geometry, GeometryError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let geom = p.geometry()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax("trailing characters after geometry"));
    }
    Ok(geom)
}

/// Writes `g` as WKT. Meshes are always written as `TIN Z`.
pub fn serialize_wkt(g: &Geometry) -> String {
    let mut out = String::new();
    match g {
        Geometry::Point(p) => {
            out.push_str("POINT Z (");
            write_coord(&mut out, *p);
            out.push(')');
        }
        Geometry::Segment(LineSegment { p0, p1 }) => write_line(&mut out, &[*p0, *p1]),
        Geometry::LineString(pts) => write_line(&mut out, pts),
        Geometry::Mesh(mesh) => {
            out.push_str("TIN Z (");
            for (i, t) in mesh.triangles().iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str("((");
                for (j, v) in [t.v0, t.v1, t.v2, t.v0].into_iter().enumerate() {
                    if j > 0 {
                        out.push_str(", ");
                    }
                    write_coord(&mut out, v);
                }
                out.push_str("))");
            }
            out.push(')');
        }
    }
    out
}

fn write_line(out: &mut String, pts: &[Point3]) {
    out.push_str("LINESTRING Z (");
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_coord(out, *p);
    }
    out.push(')');
}

// `{}` on f64 is the shortest representation that parses back to the same bits.
fn write_coord(out: &mut String, p: Point3) {
    let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, message: impl Into<String>) -> GeometryError {
        GeometryError::Syntax {
            pos: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), GeometryError> {
        match self.peek() {
            Some(b) if b == c => {
                self.pos += 1;
                Ok(())
            }
            Some(b) => Err(self.syntax(format!("expected '{}', found '{}'", c as char, b as char))),
            None => Err(self.syntax(format!("expected '{}', found end of input", c as char))),
        }
    }

    /// Consumes `c` if it is the next token.
    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn word(&mut self) -> Option<(usize, String)> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            let w = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap_or_default()
                .to_ascii_uppercase();
            Some((start, w))
        }
    }

    fn geometry(&mut self) -> Result<Geometry, GeometryError> {
        let (kw_pos, kw) = self
            .word()
            .ok_or_else(|| self.syntax("expected geometry type keyword"))?;
        let save = self.pos;
        match self.word() {
            Some((_, ref z)) if z == "Z" => {}
            Some((pos, other)) => {
                let what = match other.as_str() {
                    "EMPTY" => "EMPTY geometries".to_string(),
                    "M" | "ZM" => format!("{other} coordinates"),
                    _ => format!("unexpected keyword {other}"),
                };
                return Err(GeometryError::Unsupported { pos, what });
            }
            None => self.pos = save,
        }
        match kw.as_str() {
            "POINT" => {
                self.expect(b'(')?;
                let p = self.coord()?;
                self.expect(b')')?;
                Ok(Geometry::Point(p))
            }
            "LINESTRING" => {
                self.expect(b'(')?;
                let pts = self.coord_list()?;
                self.expect(b')')?;
                if pts.len() < 2 {
                    return Err(GeometryError::LineStringTooShort(pts.len()));
                }
                Geometry::line_string(pts)
            }
            "TIN" => self.surface(MeshKind::Tin),
            "POLYHEDRALSURFACE" => self.surface(MeshKind::PolyhedralSurface),
            _ => Err(GeometryError::Unsupported {
                pos: kw_pos,
                what: format!("geometry type {kw}"),
            }),
        }
    }

    fn surface(&mut self, kind: MeshKind) -> Result<Geometry, GeometryError> {
        self.expect(b'(')?;
        let mut triangles = Vec::new();
        loop {
            let patch_pos = self.pos;
            self.expect(b'(')?;
            let ring_pos = {
                self.skip_ws();
                self.pos
            };
            self.expect(b'(')?;
            let ring = self.coord_list()?;
            self.expect(b')')?;
            if self.peek() == Some(b',') {
                return Err(GeometryError::Unsupported {
                    pos: self.pos,
                    what: "polygon holes".into(),
                });
            }
            self.expect(b')')?;
            if ring.len() < 4 {
                return Err(GeometryError::RingTooShort {
                    pos: ring_pos,
                    points: ring.len(),
                });
            }
            if ring[0] != ring[ring.len() - 1] {
                return Err(GeometryError::RingNotClosed { pos: ring_pos });
            }
            if kind == MeshKind::Tin && ring.len() != 4 {
                return Err(GeometryError::Syntax {
                    pos: patch_pos,
                    message: "TIN patches must be triangles".into(),
                });
            }
            let verts = &ring[..ring.len() - 1];
            for i in 1..verts.len() - 1 {
                triangles.push(Triangle::new(verts[0], verts[i], verts[i + 1]));
            }
            if !self.eat(b',') {
                break;
            }
        }
        self.expect(b')')?;
        Ok(Geometry::mesh(TriangleMesh::new(triangles, kind)))
    }

    fn coord_list(&mut self) -> Result<Vec<Point3>, GeometryError> {
        let mut pts = vec![self.coord()?];
        while self.eat(b',') {
            pts.push(self.coord()?);
        }
        Ok(pts)
    }

    fn coord(&mut self) -> Result<Point3, GeometryError> {
        self.skip_ws();
        let start = self.pos;
        let x = self.number()?;
        let y = self.number()?;
        if !self.at_number() {
            return Err(GeometryError::MixedDimension { pos: start });
        }
        let z = self.number()?;
        if self.at_number() {
            return Err(GeometryError::Unsupported {
                pos: self.pos,
                what: "4D coordinates".into(),
            });
        }
        Ok(Point3::new(x, y, z))
    }

    fn at_number(&mut self) -> bool {
        matches!(self.peek(), Some(b'0'..=b'9' | b'+' | b'-' | b'.'))
            || matches!(self.peek(), Some(b'n' | b'N' | b'i' | b'I'))
    }

    fn number(&mut self) -> Result<f64, GeometryError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && matches!(self.src[self.pos], b'0'..=b'9' | b'+' | b'-' | b'.' | b'e' | b'E')
        {
            self.pos += 1;
        }
        // NaN / Infinity spelled as words, possibly signed.
        if self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            let mut end = self.pos;
            while end < self.src.len() && self.src[end].is_ascii_alphabetic() {
                end += 1;
            }
            let word = String::from_utf8_lossy(&self.src[self.pos..end]).to_ascii_lowercase();
            if matches!(word.as_str(), "nan" | "inf" | "infinity") {
                return Err(GeometryError::NonFinite { pos: start });
            }
            return Err(self.syntax(format!("unexpected '{word}' in coordinate")));
        }
        if self.pos == start {
            return Err(self.syntax("expected number"));
        }
        let tok = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        let v: f64 = tok.parse().map_err(|_| GeometryError::Syntax {
            pos: start,
            message: format!("invalid number '{tok}'"),
        })?;
        if !v.is_finite() {
            return Err(GeometryError::NonFinite { pos: start });
        }
        Ok(v)
    }
}
