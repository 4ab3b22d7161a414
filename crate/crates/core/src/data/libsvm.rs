use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Feature storage of a [`DesignMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(DMatrix<f64>),
    /// Compressed rows: entries of row `i` are
    /// `row_offsets[i]..row_offsets[i + 1]` in `col_indices` / `values`.
    Sparse {
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    },
}

/// Labelled design matrix, as read from a LIBSVM file.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    storage: Storage,
    labels: Vec<f64>,
}

impl DesignMatrix {
    pub fn dense(x: DMatrix<f64>, labels: Vec<f64>) -> Result<Self> {
        if x.nrows() != labels.len() {
            return Err(Error::invalid("labels and design rows differ"));
        }
        if x.iter().chain(labels.iter()).any(|v| v.is_nan()) {
            return Err(Error::invalid("design matrix contains NaN"));
        }
        Ok(Self {
            rows: x.nrows(),
            cols: x.ncols(),
            storage: Storage::Dense(x),
            labels,
        })
    }

    pub fn sparse(
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        let rows = labels.len();
        if row_offsets.len() != rows + 1
            || row_offsets[0] != 0
            || row_offsets[rows] != col_indices.len()
            || col_indices.len() != values.len()
        {
            return Err(Error::invalid("inconsistent sparse row structure"));
        }
        for i in 0..rows {
            let (a, b) = (row_offsets[i], row_offsets[i + 1]);
            if a > b {
                return Err(Error::invalid(format!("row {i} has negative length")));
            }
            let idx = &col_indices[a..b];
            if idx.iter().any(|&j| j >= cols) {
                return Err(Error::invalid(format!(
                    "row {i} has a column index out of range"
                )));
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "row {i} column indices are not strictly increasing"
                )));
            }
        }
        if values.iter().chain(labels.iter()).any(|v| v.is_nan()) {
            return Err(Error::invalid("design matrix contains NaN"));
        }
        Ok(Self {
            rows,
            cols,
            storage: Storage::Sparse {
                row_offsets,
                col_indices,
                values,
            },
            labels,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.labels)
    }

    /// Nonzero entries `(column, value)` of row `i`, in column order.
    pub fn row_entries(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.storage {
            Storage::Dense(x) => (0..self.cols)
                .filter(|&j| x[(i, j)] != 0.0)
                .map(|j| (j, x[(i, j)]))
                .collect(),
            Storage::Sparse {
                row_offsets,
                col_indices,
                values,
            } => {
                let r = row_offsets[i]..row_offsets[i + 1];
                col_indices[r.clone()]
                    .iter()
                    .copied()
                    .zip(values[r].iter().copied())
                    .collect()
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(x) => x.clone(),
            Storage::Sparse { .. } => {
                let mut x = DMatrix::zeros(self.rows, self.cols);
                for i in 0..self.rows {
                    for (j, v) in self.row_entries(i) {
                        x[(i, j)] = v;
                    }
                }
                x
            }
        }
    }

    /// Dense copy with every column shifted to zero mean and scaled to unit
    /// variance; constant columns become zero.
    pub fn standardized(&self) -> Result<DMatrix<f64>> {
        if self.cols > MAX_DENSE_COLS {
            return Err(Error::invalid(format!(
                "standardization densifies the design; {} columns exceed the limit of {MAX_DENSE_COLS}",
                self.cols
            )));
        }
        let mut x = self.to_dense();
        let m = self.rows as f64;
        for mut col in x.column_iter_mut() {
            let mean = col.sum() / m;
            col.add_scalar_mut(-mean);
            let sd = (col.norm_squared() / m).sqrt();
            if sd > 0.0 {
                col /= sd;
            } else {
                col.fill(0.0);
            }
        }
        Ok(x)
    }

    /// LIBSVM text: one `label idx:val ...` line per row, 1-based indices,
    /// zero entries omitted.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let _ = write!(out, "{}", self.labels[i]);
            for (j, v) in self.row_entries(i) {
                let _ = write!(out, " {}:{}", j + 1, v);
            }
            out.push('\n');
        }
        out
    }
}

/// Densification limit for [`DesignMatrix::standardized`].
pub const MAX_DENSE_COLS: usize = 10_000;

pub fn load_libsvm(path: &Path) -> Result<DesignMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_libsvm(&text, path)
}

/// Parses LIBSVM text; `path` only labels error messages.
pub fn parse_libsvm(text: &str, path: &Path) -> Result<DesignMatrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: PathBuf::from(path),
        line,
        message,
    };
    let mut row_offsets = vec![0];
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut cols = 0;
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else {
            continue;
        };
        let label: f64 = label
            .parse()
            .map_err(|_| err(lineno, format!("bad label {label:?}")))?;
        if label.is_nan() {
            return Err(err(lineno, "label is NaN".into()));
        }
        let mut last = 0;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(lineno, format!("bad index in {tok:?}")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| err(lineno, format!("bad value in {tok:?}")))?;
            if idx == 0 {
                return Err(err(lineno, "indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(lineno, format!("index {idx} is not increasing")));
            }
            if val.is_nan() {
                return Err(err(lineno, format!("NaN value at index {idx}")));
            }
            last = idx;
            cols = cols.max(idx);
            col_indices.push(idx - 1);
            values.push(val);
        }
        labels.push(label);
        row_offsets.push(col_indices.len());
    }
    if labels.is_empty() {
        return Err(err(0, "no data rows".into()));
    }
    DesignMatrix::sparse(cols, row_offsets, col_indices, values, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<DesignMatrix> {
        parse_libsvm(text, Path::new("mem"))
    }

    #[test]
    fn single_row() {
        let d = parse("1 1:0.5 3:2\n").unwrap();
        assert_eq!((d.rows(), d.cols()), (1, 3));
        assert_eq!(d.labels(), &[1.0]);
        assert_eq!(
            d.to_dense(),
            DMatrix::from_row_slice(1, 3, &[0.5, 0.0, 2.0])
        );
    }

    #[test]
    fn signed_labels() {
        let d = parse("+1 2:1\n-1 1:1").unwrap();
        assert_eq!((d.rows(), d.cols()), (2, 2));
        assert_eq!(d.labels(), &[1.0, -1.0]);
    }

    #[test]
    fn malformed_input_reports_line() {
        match parse("1 1:0.5\n1 2:x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("1 0:1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(parse("1 3:1 2:1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse("1 2\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse(""), Err(Error::Parse { line: 0, .. })));
    }

    #[test]
    fn standardization_centres_and_scales() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let d = DesignMatrix::dense(x, vec![1.0, -1.0, 1.0]).unwrap();
        let s = d.standardized().unwrap();
        let c0 = s.column(0);
        assert!(c0.sum().abs() < 1e-14);
        assert!((c0.norm_squared() / 3.0 - 1.0).abs() < 1e-14);
        assert_eq!(s.column(1).norm(), 0.0);
    }

    proptest! {
        #[test]
        fn libsvm_round_trip(
            rows in proptest::collection::vec(
                (-3i32..3, proptest::collection::btree_map(0usize..20, -1e3f64..1e3, 0..6)),
                1..12,
            )
        ) {
            let mut text = String::new();
            for (label, entries) in &rows {
                text.push_str(&label.to_string());
                for (j, v) in entries {
                    if *v != 0.0 {
                        text.push_str(&format!(" {}:{}", j + 1, v));
                    }
                }
                text.push('\n');
            }
            let parsed = parse(&text).unwrap();
            let again = parse(&parsed.to_libsvm()).unwrap();
            prop_assert_eq!(parsed, again);
        }
    }
}
