//! Cell-grid data model: A1-notation references, CSV ingestion, named
//! ranges, and typed range read/write.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::value::{format_f64, Matrix, Value};

/// 1-based cell coordinate. Column letters use bijective base-26
/// (A=1 .. Z=26, AA=27, AZ=52).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellRef {
    pub col: u32,
    pub row: u32,
}

impl CellRef {
    pub fn new(col: u32, row: u32) -> Result<CellRef> {
        if col == 0 || row == 0 {
            return Err(Error::Reference(format!(
                "cell coordinates are 1-based, got col {col} row {row}"
            )));
        }
        Ok(CellRef { col, row })
    }

    /// Canonical A1 text, e.g. (52, 10) -> "AZ10".
    pub fn format(&self) -> String {
        format!("{}{}", column_letters(self.col), self.row)
    }
}

/// Normalized rectangular range: start is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeRef {
    pub start: CellRef,
    pub end: CellRef,
}

impl RangeRef {
    pub fn new(a: CellRef, b: CellRef) -> RangeRef {
        RangeRef {
            start: CellRef {
                col: a.col.min(b.col),
                row: a.row.min(b.row),
            },
            end: CellRef {
                col: a.col.max(b.col),
                row: a.row.max(b.row),
            },
        }
    }

    pub fn cell(c: CellRef) -> RangeRef {
        RangeRef { start: c, end: c }
    }

    pub fn height(&self) -> u32 {
        self.end.row - self.start.row + 1
    }

    pub fn width(&self) -> u32 {
        self.end.col - self.start.col + 1
    }

    pub fn format(&self) -> String {
        if self.start == self.end {
            self.start.format()
        } else {
            format!("{}:{}", self.start.format(), self.end.format())
        }
    }
}

fn column_letters(mut col: u32) -> String {
    let mut buf = Vec::new();
    while col > 0 {
        let rem = (col - 1) % 26;
        buf.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    buf.reverse();
    String::from_utf8(buf).expect("ascii letters")
}

/// Parse a single A1 cell address like "E6" or "az10".
pub fn parse_cell(text: &str) -> Result<CellRef> {
    if text.contains('!') {
        return Err(Error::Reference(format!(
            "multi-sheet references are not supported: '{text}'"
        )));
    }
    let letters: String = text.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    let digits = &text[letters.len()..];
    if letters.is_empty() {
        return Err(Error::Reference(format!(
            "missing column letters in '{text}'"
        )));
    }
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Reference(format!("bad row number '{digits}' in '{text}'")));
    }
    if digits.starts_with('0') {
        return Err(Error::Reference(format!(
            "row number must not have leading zeros: '{digits}'"
        )));
    }
    let mut col: u32 = 0;
    for ch in letters.chars() {
        let d = ch.to_ascii_uppercase() as u32 - 'A' as u32 + 1;
        col = col
            .checked_mul(26)
            .and_then(|c| c.checked_add(d))
            .ok_or_else(|| Error::Reference(format!("column '{letters}' out of range")))?;
    }
    let row: u32 = digits
        .parse()
        .map_err(|_| Error::Reference(format!("row '{digits}' out of range")))?;
    CellRef::new(col, row)
}

/// Parse an A1 range: a single cell yields a 1x1 range, "A4:A1003" a
/// column slice. Pure A1 interpretation; named ranges resolve through
/// [`Workbook::resolve_ref`].
pub fn parse_range(text: &str) -> Result<RangeRef> {
    if text.is_empty() {
        return Err(Error::Reference("empty range reference".into()));
    }
    match text.split_once(':') {
        None => Ok(RangeRef::cell(parse_cell(text)?)),
        Some((a, b)) => {
            if b.contains(':') {
                return Err(Error::Reference(format!("too many ':' in '{text}'")));
            }
            Ok(RangeRef::new(parse_cell(a)?, parse_cell(b)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Number(f64),
    Text(String),
}

/// Sparse cell grid plus named ranges. Absent cells are empty; there is no
/// built-in dimension limit.
#[derive(Debug, Clone, Default)]
pub struct Workbook {
    // keyed (row, col) so iteration matches CSV row order
    cells: BTreeMap<(u32, u32), CellValue>,
    names: BTreeMap<String, RangeRef>,
}

impl Workbook {
    pub fn new() -> Workbook {
        Workbook::default()
    }

    pub fn get(&self, cell: CellRef) -> Option<&CellValue> {
        self.cells.get(&(cell.row, cell.col))
    }

    pub fn set(&mut self, cell: CellRef, value: CellValue) {
        self.cells.insert((cell.row, cell.col), value);
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Resolve reference text: named ranges take precedence, then A1.
    /// `define_name` guarantees the two namespaces never overlap.
    pub fn resolve_ref(&self, text: &str) -> Result<RangeRef> {
        if let Some(range) = self.names.get(text) {
            return Ok(*range);
        }
        parse_range(text)
    }

    /// Bind `name` to `range`. Names that would shadow a valid A1
    /// reference are rejected as ambiguous; redefinition replaces the old
    /// binding.
    pub fn define_name(&mut self, name: &str, range: RangeRef) -> Result<()> {
        if !is_identifier(name) {
            return Err(Error::Reference(format!(
                "'{name}' is not a valid range name"
            )));
        }
        if parse_range(name).is_ok() {
            return Err(Error::Reference(format!(
                "name '{name}' is ambiguous with a cell reference"
            )));
        }
        self.names.insert(name.to_string(), range);
        Ok(())
    }

    /// Read a rectangular range as a typed value. All-numeric blocks
    /// become a Matrix; all-text blocks a row-major string list. Mixing
    /// the two, or an empty cell inside a numeric block, is an error
    /// rather than a silent zero.
    pub fn read_range(&self, range: RangeRef) -> Result<Value> {
        let mut numbers = Vec::new();
        let mut texts = Vec::new();
        let mut saw_number = false;
        let mut saw_text = false;
        let mut first_empty: Option<CellRef> = None;
        for row in range.start.row..=range.end.row {
            for col in range.start.col..=range.end.col {
                let cell = CellRef { col, row };
                match self.get(cell) {
                    Some(CellValue::Number(v)) => {
                        saw_number = true;
                        numbers.push(*v);
                    }
                    Some(CellValue::Text(t)) => {
                        saw_text = true;
                        texts.push(t.clone());
                    }
                    None => {
                        if first_empty.is_none() {
                            first_empty = Some(cell);
                        }
                    }
                }
            }
        }
        if saw_number && saw_text {
            return Err(Error::TypeDim(format!(
                "range {} mixes text and numbers",
                range.format()
            )));
        }
        if saw_text {
            if let Some(cell) = first_empty {
                return Err(Error::TypeDim(format!(
                    "missing data: cell {} in range {} is empty",
                    cell.format(),
                    range.format()
                )));
            }
            return Ok(Value::Strings(texts));
        }
        if let Some(cell) = first_empty {
            return Err(Error::TypeDim(format!(
                "missing data: cell {} in range {} is empty",
                cell.format(),
                range.format()
            )));
        }
        Ok(Value::Matrix(Matrix::new(
            range.height() as usize,
            range.width() as usize,
            numbers,
        )?))
    }

    /// Overwrite the block anchored at `anchor` with the matrix entries.
    /// Cells outside the block are untouched.
    pub fn write_matrix(&mut self, anchor: CellRef, value: &Matrix) {
        for r in 0..value.rows() {
            for c in 0..value.cols() {
                self.set(
                    CellRef {
                        col: anchor.col + c as u32,
                        row: anchor.row + r as u32,
                    },
                    CellValue::Number(value.get(r, c)),
                );
            }
        }
    }

    /// Load a workbook from an RFC 4180 CSV file anchored at A1. Fields
    /// parsing as finite decimal numbers become Number, others Text,
    /// empty fields stay Empty. Ragged rows are permitted.
    pub fn load_csv(path: &Path) -> Result<Workbook> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(path)
            .map_err(csv_error)?;
        let mut wb = Workbook::new();
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(csv_error)?;
            for (c, field) in record.iter().enumerate() {
                if field.is_empty() {
                    continue;
                }
                let cell = CellRef {
                    col: c as u32 + 1,
                    row: r as u32 + 1,
                };
                match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => wb.set(cell, CellValue::Number(v)),
                    _ => wb.set(cell, CellValue::Text(field.to_string())),
                }
            }
        }
        Ok(wb)
    }

    /// Write the occupied bounding box as CSV. Numbers use the shortest
    /// round-trip decimal so repeated runs are byte-identical.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .flexible(true)
            .from_path(path)
            .map_err(csv_error)?;
        let max_row = self.cells.keys().map(|(r, _)| *r).max().unwrap_or(0);
        let max_col = self.cells.keys().map(|(_, c)| *c).max().unwrap_or(0);
        for row in 1..=max_row {
            let mut record = Vec::with_capacity(max_col as usize);
            for col in 1..=max_col {
                record.push(match self.cells.get(&(row, col)) {
                    Some(CellValue::Number(v)) => format_f64(*v),
                    Some(CellValue::Text(t)) => t.clone(),
                    None => String::new(),
                });
            }
            writer.write_record(&record).map_err(csv_error)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Content digest over cells and names, used by the audit trail to
    /// pin the initial grid state.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for ((row, col), value) in &self.cells {
            hasher.update(format!("{row},{col}="));
            match value {
                CellValue::Number(v) => hasher.update(format!("n{}\n", format_f64(*v))),
                CellValue::Text(t) => hasher.update(format!("t{t}\n")),
            }
        }
        for (name, range) in &self.names {
            hasher.update(format!("name {name}={}\n", range.format()));
        }
        hex::encode(hasher.finalize())
    }
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn csv_error(err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("csv: {other:?}")),
    }
}
