use super::{GeometryRecord, StoreError};
use crate::geometry::parse_wkt;
use std::collections::HashSet;
use std::path::Path;

/// Reads `id,wkt` records. A first line of `id,<anything>` is treated as a header.
pub(super) fn read_csv(path: &Path) -> Result<Vec<GeometryRecord>, StoreError> {
    let io_err = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut row = csv::StringRecord::new();
    let mut first = true;
    loop {
        let more = reader.read_record(&mut row).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.into_kind() {
                csv::ErrorKind::Io(source) => io_err(source),
                other => StoreError::Malformed {
                    line,
                    message: format!("{other:?}"),
                },
            }
        })?;
        if !more {
            break;
        }
        let line = row.position().map_or(0, |p| p.line());
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if std::mem::take(&mut first) && row.get(0).is_some_and(|f| f.eq_ignore_ascii_case("id")) {
            continue;
        }
        if row.len() != 2 {
            return Err(StoreError::Malformed {
                line,
                message: format!("expected 2 fields (id, geometry), found {}", row.len()),
            });
        }
        let id: i64 = row[0].parse().map_err(|_| StoreError::Malformed {
            line,
            message: format!("invalid id '{}'", &row[0]),
        })?;
        let geometry = parse_wkt(&row[1]).map_err(|source| StoreError::Parse { line, source })?;
        if !seen.insert(id) {
            return Err(StoreError::DuplicateId { id, line });
        }
        records.push(GeometryRecord { id, geometry });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn read(content: &str) -> Result<Vec<GeometryRecord>, StoreError> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        read_csv(f.path())
    }

    #[test]
    fn header_is_optional() {
        assert_eq!(read("id,geometry\n1,POINT Z (0 0 0)\n").unwrap().len(), 1);
        assert_eq!(read("ID,geom\n1,POINT Z (0 0 0)\n").unwrap().len(), 1);
        assert_eq!(read("1,POINT Z (0 0 0)\n").unwrap().len(), 1);
    }

    #[test]
    fn blank_lines_and_crlf() {
        let recs = read("1,POINT Z (0 0 0)\r\n\r\n2,POINT Z (1 1 1)\r\n").unwrap();
        assert_eq!(recs.iter().map(|r| r.id).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn unquoted_commas_are_rejected() {
        let err = read("1,LINESTRING Z (0 0 0, 1 1 1)\n").unwrap_err();
        assert!(matches!(err, StoreError::Malformed { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn bad_id() {
        let err = read("x1,POINT Z (0 0 0)\n").unwrap_err();
        assert!(matches!(err, StoreError::Malformed { line: 1, .. }), "{err:?}");
    }
}
