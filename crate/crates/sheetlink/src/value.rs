//! Dense real matrices and string lists: the unit of transfer between the
//! cell grid and the kernel workspace.

use crate::error::{Error, Result};

/// Row-major dense matrix of finite reals.
///
/// NaN and infinity are rejected at construction; operations that would
/// produce them must error instead of storing them.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::TypeDim(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::TypeDim(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::TypeDim(format!(
                "matrix entries must be finite, got {bad}"
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// 1x1 matrix holding a single value.
    pub fn scalar(v: f64) -> Result<Matrix> {
        Matrix::new(1, 1, vec![v])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col]
    }

    /// Entries of one column, top to bottom (1-based index).
    pub fn column(&self, col1: usize) -> Result<Vec<f64>> {
        if col1 == 0 || col1 > self.cols {
            return Err(Error::Eval(format!(
                "column index {col1} out of range for {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok((0..self.rows).map(|r| self.get(r, col1 - 1)).collect())
    }

    /// Entries of one row, left to right (1-based index).
    pub fn row(&self, row1: usize) -> Result<Vec<f64>> {
        if row1 == 0 || row1 > self.rows {
            return Err(Error::Eval(format!(
                "row index {row1} out of range for {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok((0..self.cols).map(|c| self.get(row1 - 1, c)).collect())
    }

    /// Scalar value of a 1x1 matrix.
    pub fn as_scalar(&self) -> Option<f64> {
        if self.rows == 1 && self.cols == 1 {
            Some(self.data[0])
        } else {
            None
        }
    }
}

/// A value moving across the bridge: numeric matrix or list of strings.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Matrix(Matrix),
    Strings(Vec<String>),
}

impl Value {
    /// Canonical, platform-stable text form: dimensions plus the shortest
    /// round-trip decimal of each entry, row-major. Digests and replay
    /// comparisons hash this form.
    pub fn canonical(&self) -> String {
        match self {
            Value::Matrix(m) => {
                let mut s = format!("M {} {}", m.rows(), m.cols());
                for v in m.data() {
                    s.push(' ');
                    s.push_str(&format_f64(*v));
                }
                s
            }
            Value::Strings(list) => {
                let mut s = format!("S {}", list.len());
                for item in list {
                    s.push(' ');
                    // serde_json escaping keeps embedded spaces unambiguous
                    s.push_str(&serde_json::to_string(item).expect("string serializes"));
                }
                s
            }
        }
    }

    /// Inverse of `canonical`, used when replaying logged direct-variable
    /// transfers.
    pub fn from_canonical(text: &str) -> Result<Value> {
        let mut parts = text.split(' ');
        match parts.next() {
            Some("M") => {
                let rows: usize = parse_count(parts.next())?;
                let cols: usize = parse_count(parts.next())?;
                let data = parts
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| Error::Parse(format!("bad matrix entry '{t}'")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Value::Matrix(Matrix::new(rows, cols, data)?))
            }
            Some("S") => {
                let n: usize = parse_count(parts.next())?;
                let rest = parts.collect::<Vec<_>>().join(" ");
                let mut items = Vec::with_capacity(n);
                let mut de = serde_json::Deserializer::from_str(&rest).into_iter::<String>();
                for _ in 0..n {
                    match de.next() {
                        Some(Ok(s)) => items.push(s),
                        _ => return Err(Error::Parse("truncated string list".into())),
                    }
                }
                Ok(Value::Strings(items))
            }
            _ => Err(Error::Parse(format!("bad canonical value '{text}'"))),
        }
    }
}

fn parse_count(tok: Option<&str>) -> Result<usize> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse("bad canonical value dimensions".into()))
}

/// Shortest decimal that round-trips the exact f64.
pub fn format_f64(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(Matrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(Matrix::new(2, 2, vec![1.0, 2.0]).is_err());
        assert!(Matrix::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let m = Value::Matrix(Matrix::new(2, 2, vec![1.0, 0.5, -3.25, 1e-12]).unwrap());
        assert_eq!(Value::from_canonical(&m.canonical()).unwrap(), m);
        let s = Value::Strings(vec!["Risk".into(), "has space \"q\"".into()]);
        assert_eq!(Value::from_canonical(&s.canonical()).unwrap(), s);
    }

    #[test]
    fn column_and_row_access() {
        let m = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.column(1).unwrap(), vec![1.0, 4.0]);
        assert_eq!(m.row(2).unwrap(), vec![4.0, 5.0, 6.0]);
        assert!(m.column(4).is_err());
    }
}
