use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::BenchError;

fn csv_err(e: csv::Error) -> BenchError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => BenchError::Io(io),
        other => BenchError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// CSV text for `rows`: a header from the field names, then one line per
/// row in field order. Equal rows give equal bytes.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| BenchError::Io(std::io::Error::other(e.to_string())))
}

/// Writes `rows` to `path` as CSV. An empty slice is rejected since there
/// would be no header to write.
pub fn emit_report<T: Serialize>(rows: &[T], path: &Path) -> Result<(), BenchError> {
    if rows.is_empty() {
        return Err(BenchError::Config("report needs at least one row".into()));
    }
    let bytes = to_csv(rows)?;
    File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn read_report<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, BenchError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::LatencySample;
    use proptest::prelude::*;

    fn sample(i: usize, total: f64) -> LatencySample {
        LatencySample {
            request_id: format!("r{i}"),
            total_ms: total,
            transport_ms: total / 2.0,
            auth_ms: total / 8.0,
            access_ms: total / 8.0,
            service_ms: total / 4.0,
        }
    }

    #[test]
    fn three_samples_four_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_report(&[sample(0, 1.0), sample(1, 2.5), sample(2, 0.1)], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), "request_id,total_ms,transport_ms,auth_ms,access_ms,service_ms");
    }

    #[test]
    fn empty_report_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report::<LatencySample>(&[], &dir.path().join("e.csv")).is_err());
    }

    #[test]
    fn missing_directory_is_io_error() {
        let err = emit_report(&[sample(0, 1.0)], Path::new("/nonexistent/dir/x.csv")).unwrap_err();
        assert!(matches!(err, BenchError::Io(_)));
    }

    proptest! {
        #[test]
        fn emit_twice_identical_and_parses_back(totals in prop::collection::vec(0.0f64..1e6, 1..20)) {
            let rows: Vec<LatencySample> = totals.iter().enumerate().map(|(i, &t)| sample(i, t)).collect();
            let dir = tempfile::tempdir().unwrap();
            let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
            emit_report(&rows, &a).unwrap();
            emit_report(&rows, &b).unwrap();
            prop_assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
            let back: Vec<LatencySample> = read_report(&a).unwrap();
            prop_assert_eq!(back, rows);
        }
    }
}
