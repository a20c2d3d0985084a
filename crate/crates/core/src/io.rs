//! Plain-text matrix files: CSV without a header, one matrix row per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Formats a value with 17 significant digits, enough to read back the
/// identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

pub fn read_csv_matrix(path: &Path) -> Result<Matrix> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if let Some(first) = rows.first() {
            if record.len() != first.len() {
                return Err(Error::RaggedCsv {
                    path: path.to_path_buf(),
                    row: i + 1,
                    expected: first.len(),
                    found: record.len(),
                });
            }
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        msg: format!("row {}, column {}: {field:?} is not a finite number", i + 1, j + 1),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            msg: "empty matrix file".into(),
        });
    }
    Matrix::from_rows(&rows).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_text(path, &matrix_to_csv(m))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(text.as_bytes()).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        for v in [0.1, 1.0 / 3.0, -7.25e-300, 1.7976931348623157e308] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = Matrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-1e-20, 12345.678]]).unwrap();
        write_csv_matrix(&path, &m).unwrap();
        assert_eq!(read_csv_matrix(&path).unwrap(), m);
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = dir.path().join("ragged.csv");
        fs::write(&ragged, "1,2,3\n4,5\n").unwrap();
        assert!(matches!(
            read_csv_matrix(&ragged),
            Err(Error::RaggedCsv {
                row: 2,
                expected: 3,
                found: 2,
                ..
            })
        ));
        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "1,x\n").unwrap();
        assert!(matches!(read_csv_matrix(&bad), Err(Error::Parse { .. })));
        let nan = dir.path().join("nan.csv");
        fs::write(&nan, "1,NaN\n").unwrap();
        assert!(matches!(read_csv_matrix(&nan), Err(Error::Parse { .. })));
        assert!(matches!(
            read_csv_matrix(&dir.path().join("absent.csv")),
            Err(Error::MissingFile(_))
        ));
    }
}
