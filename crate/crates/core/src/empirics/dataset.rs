//! In-memory samples `(x_i, y_i)` and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// `row` counts data rows from 1 (the header is row 0).
    #[error("parse error at row {row:?}, column `{column}`: {message}")]
    Parse {
        row: Option<usize>,
        column: String,
        message: String,
    },
    #[error("non-finite value in row {row}, column `{column}`")]
    NonFiniteValue { row: usize, column: String },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// An immutable sample with row-major covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    /// Builds from a flat row-major `x` of length `n·d`.
    pub fn new(d: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self, DataError> {
        let n = y.len();
        if n == 0 {
            return Err(DataError::EmptyInput("dataset has no rows"));
        }
        if x.len() != n * d {
            return Err(DataError::LengthMismatch {
                what: "covariates",
                expected: n * d,
                got: x.len(),
            });
        }
        for i in 0..n {
            if !y[i].is_finite() {
                return Err(DataError::NonFiniteValue {
                    row: i + 1,
                    column: "y".into(),
                });
            }
            if let Some(j) = (0..d).find(|&j| !x[i * d + j].is_finite()) {
                return Err(DataError::NonFiniteValue {
                    row: i + 1,
                    column: format!("x{}", j + 1),
                });
            }
        }
        Ok(Self { n, d, x, y })
    }

    /// Builds from one covariate vector per row.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self, DataError> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() != y.len() {
            return Err(DataError::LengthMismatch {
                what: "covariate rows",
                expected: y.len(),
                got: rows.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(DataError::LengthMismatch {
                what: "covariate row",
                expected: d,
                got: bad.len(),
            });
        }
        Self::new(d, rows.concat(), y)
    }

    /// A single-covariate dataset.
    pub fn univariate(x: Vec<f64>, y: Vec<f64>) -> Result<Self, DataError> {
        Self::new(1, x, y)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn x_column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.x[i * self.d + j]).collect()
    }

    /// Writes the `x1..xd,y` CSV form; floats use shortest round-trip digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.d).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.d + 1);
        for i in 0..self.n {
            record.clear();
            record.extend(self.row(i).iter().map(f64::to_string));
            record.push(self.y[i].to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which columns to read; by default every `x<k>` column (ordered by `k`)
/// and `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub x: Option<Vec<String>>,
    pub y: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            x: None,
            y: "y".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadReport {
    pub rows: usize,
    pub x_columns: Vec<String>,
    pub y_column: String,
}

/// Reads a headed CSV file; lines starting with `#` are skipped.
pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: &Schema,
) -> Result<(Dataset, LoadReport), DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(file, schema)
}

pub fn read_dataset<R: Read>(
    reader: R,
    schema: &Schema,
) -> Result<(Dataset, LoadReport), DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            row: Some(0),
            column: String::new(),
            message: e.to_string(),
        })?
        .clone();
    let position = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::Parse {
                row: None,
                column: name.to_string(),
                message: "column not found in header".into(),
            })
    };

    let x_columns: Vec<String> = match &schema.x {
        Some(cols) => cols.clone(),
        None => {
            let mut found: Vec<(usize, String)> = header
                .iter()
                .filter_map(|h| {
                    let k = h.strip_prefix('x')?.parse::<usize>().ok()?;
                    Some((k, h.to_string()))
                })
                .collect();
            found.sort();
            found.into_iter().map(|(_, h)| h).collect()
        }
    };
    let y_pos = position(&schema.y)?;
    let x_pos: Vec<usize> = x_columns
        .iter()
        .map(|c| position(c))
        .collect::<Result<_, _>>()?;

    let d = x_pos.len();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::Parse {
            row: Some(row),
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |pos: usize, name: &str| -> Result<f64, DataError> {
            let raw = record.get(pos).ok_or_else(|| DataError::Parse {
                row: Some(row),
                column: name.to_string(),
                message: "missing field".into(),
            })?;
            let v: f64 = raw.parse().map_err(|_| DataError::Parse {
                row: Some(row),
                column: name.to_string(),
                message: format!("`{raw}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFiniteValue {
                    row,
                    column: name.to_string(),
                });
            }
            Ok(v)
        };
        for (pos, name) in x_pos.iter().zip(&x_columns) {
            x.push(cell(*pos, name)?);
        }
        y.push(cell(y_pos, &schema.y)?);
    }
    let data = Dataset::new(d, x, y)?;
    let report = LoadReport {
        rows: data.n(),
        x_columns,
        y_column: schema.y.clone(),
    };
    Ok((data, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<(Dataset, LoadReport), DataError> {
        read_dataset(text.as_bytes(), &Schema::default())
    }

    #[test]
    fn three_rows() {
        let (data, report) = read("x1,y\n1,2\n3,4\n5,6\n").unwrap();
        assert_eq!((data.n(), data.d()), (3, 1));
        assert_eq!(data.y(), &[2.0, 4.0, 6.0]);
        assert_eq!(data.row(2), &[5.0]);
        assert_eq!(report.x_columns, vec!["x1"]);
    }

    #[test]
    fn missing_y_names_the_column() {
        match read("x1,z\n1,2\n") {
            Err(DataError::Parse { column, .. }) => assert_eq!(column, "y"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nan_cell_reports_row() {
        match read("x1,y\n1,2\n3,NaN\n") {
            Err(DataError::NonFiniteValue { row, column }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn garbage_cell_is_a_parse_error() {
        match read("x1,y\n1,2\nabc,4\n") {
            Err(DataError::Parse { row, column, .. }) => {
                assert_eq!(row, Some(2));
                assert_eq!(column, "x1");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comments_and_column_order() {
        let (data, report) = read("# config: {}\ny,x2,x1\n1,20,10\n2,40,30\n").unwrap();
        assert_eq!(report.x_columns, vec!["x1", "x2"]);
        assert_eq!(data.row(0), &[10.0, 20.0]);
        assert_eq!(data.row(1), &[30.0, 40.0]);
    }

    #[test]
    fn csv_round_trip() {
        let data = Dataset::from_rows(&[vec![0.1, -2.5], vec![1e-300, 3.0]], vec![1.0 / 3.0, -0.0])
            .unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let (back, _) = read_dataset(buf.as_slice(), &Schema::default()).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(read("x1,y\n"), Err(DataError::EmptyInput(_))));
    }
}
