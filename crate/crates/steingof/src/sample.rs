//! Sample containers and file loading.
//!
//! A [`SampleSet`] is an n x d matrix of finite values; rows are
//! observations. Loaders accept comma-separated text with an optional header
//! (auto-detected: a first row whose leading cell fails numeric parsing) and
//! newline-delimited JSON where each line is an array of numbers. Parse
//! failures carry 1-based line numbers.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};

/// On-disk representation of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Csv,
    NdJson,
}

impl SampleFormat {
    /// Guesses from the file extension; comma-separated is the default.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("ndjson") | Some("jsonl") => SampleFormat::NdJson,
            _ => SampleFormat::Csv,
        }
    }
}

impl FromStr for SampleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(SampleFormat::Csv),
            "ndjson" => Ok(SampleFormat::NdJson),
            other => Err(Error::InvalidInput(format!(
                "unknown sample format '{other}' (expected csv or ndjson)"
            ))),
        }
    }
}

/// An n x d data matrix; rows are points.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: Array2<f64>,
    column_names: Option<Vec<String>>,
}

impl SampleSet {
    /// Builds from row vectors, validating rectangular shape and finiteness.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput(
                "sample must contain at least one row".into(),
            ));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::InvalidInput(
                "sample rows must have at least one column".into(),
            ));
        }
        let mut flat = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidInput(format!(
                    "row {} has {} columns, expected {}",
                    i + 1,
                    row.len(),
                    d
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "row {} contains a non-finite value",
                        i + 1
                    )));
                }
                flat.push(v);
            }
        }
        let data = Array2::from_shape_vec((rows.len(), d), flat).expect("shape checked");
        Ok(Self { data, column_names: None })
    }

    /// Wraps an existing array, validating shape and finiteness.
    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput("sample must be nonempty".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "sample contains a non-finite value".into(),
            ));
        }
        // Internal invariant: storage is row-major so rows are slices.
        let data = if data.as_slice().is_some() {
            data
        } else {
            data.as_standard_layout().to_owned()
        };
        Ok(Self { data, column_names: None })
    }

    /// Attaches column names; the count must match the dimension.
    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "{} column names for dimension {}",
                names.len(),
                self.dim()
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// The i-th observation as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Stacks two samples of equal dimension, `self` rows first.
    pub fn concat(&self, other: &SampleSet) -> Result<SampleSet> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let mut flat = Vec::with_capacity((self.n() + other.n()) * self.dim());
        flat.extend_from_slice(self.data.as_slice().expect("standard layout"));
        flat.extend_from_slice(other.data.as_slice().expect("standard layout"));
        let data =
            Array2::from_shape_vec((self.n() + other.n(), self.dim()), flat).expect("shape");
        Ok(SampleSet { data, column_names: None })
    }

    /// Loads a sample from disk in the given format.
    pub fn load(path: impl AsRef<Path>, format: SampleFormat) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        match format {
            SampleFormat::Csv => Self::parse_csv(&text),
            SampleFormat::NdJson => Self::parse_ndjson(&text),
        }
    }

    /// Parses comma-separated text with optional auto-detected header.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut names: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width: Option<usize> = None;
        let mut blank_at: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                // Blank lines are legal only as trailing padding.
                blank_at.get_or_insert(lineno);
                continue;
            }
            if let Some(b) = blank_at {
                return Err(Error::Parse {
                    line: b,
                    msg: "blank line inside data".into(),
                });
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if rows.is_empty() && names.is_none() && f64::from_str(cells[0]).is_err() {
                names = Some(cells.iter().map(|c| c.to_string()).collect());
                width = Some(cells.len());
                continue;
            }
            let w = *width.get_or_insert(cells.len());
            if cells.len() != w {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {} columns, found {}", w, cells.len()),
                });
            }
            let mut row = Vec::with_capacity(w);
            for (j, cell) in cells.iter().enumerate() {
                let v = f64::from_str(cell).map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("column {}: '{}' is not a number", j + 1, cell),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("column {}: non-finite value '{}'", j + 1, cell),
                    });
                }
                row.push(v);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("sample file has no data rows".into()));
        }
        let set = Self::from_rows(&rows)?;
        match names {
            Some(n) => set.with_column_names(n),
            None => Ok(set),
        }
    }

    /// Parses newline-delimited JSON; every line is an array of numbers.
    pub fn parse_ndjson(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width: Option<usize> = None;
        let mut blank_at: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                blank_at.get_or_insert(lineno);
                continue;
            }
            if let Some(b) = blank_at {
                return Err(Error::Parse {
                    line: b,
                    msg: "blank line inside data".into(),
                });
            }
            let row: Vec<f64> = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "non-finite value".into(),
                });
            }
            let w = *width.get_or_insert(row.len());
            if row.len() != w {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {} columns, found {}", w, row.len()),
                });
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("sample file has no data rows".into()));
        }
        Self::from_rows(&rows)
    }
}
