//! CSV interchange for matrices and masks.
//!
//! Matrix files have no header: one line per row, comma-separated decimal
//! numbers, with an empty cell marking an unobserved entry. Mask files have a
//! `row,col` header followed by zero-based index pairs.
//!
//! Numbers are written with [`format_f64`], the shortest decimal string that
//! parses back to the same `f64`, so emit followed by ingest is exact.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, ObservationMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmptyCellPolicy {
    /// Empty cells become unobserved entries with a zero placeholder.
    Mask,
    /// Empty cells are a parse error.
    Strict,
}

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e16)`.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn parse_cell(text: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = text.parse().map_err(|_| Error::Parse {
        row,
        col,
        msg: format!("`{text}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            col,
            msg: format!("`{text}` is not finite"),
        });
    }
    Ok(v)
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.record() as usize);
    Error::Parse {
        row,
        col: 0,
        msg: e.to_string(),
    }
}

/// Parses matrix CSV text. The returned mask is full unless empty cells were
/// accepted under [`EmptyCellPolicy::Mask`].
pub fn parse_matrix_csv(text: &str, policy: EmptyCellPolicy) -> Result<(DenseMatrix, ObservationMask)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut entries = Vec::new();
    let mut observed = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let width = *cols.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::Parse {
                row: i,
                col: record.len().min(width),
                msg: format!("row has {} cells, expected {width}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                if policy == EmptyCellPolicy::Strict {
                    return Err(Error::Parse {
                        row: i,
                        col: j,
                        msg: "empty cell in a complete matrix".into(),
                    });
                }
                entries.push(0.0);
            } else {
                entries.push(parse_cell(cell, i, j)?);
                observed.push((i, j));
            }
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(Error::Parse {
            row: 0,
            col: 0,
            msg: "matrix file is empty".into(),
        });
    }
    let matrix = DenseMatrix::from_row_major(rows, cols, entries)?;
    let mask = ObservationMask::new(rows, cols, observed)?;
    Ok((matrix, mask))
}

pub fn ingest_matrix_csv(path: &Path, policy: EmptyCellPolicy) -> Result<(DenseMatrix, ObservationMask)> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_matrix_csv(&text, policy)
}

/// Matrix as CSV text. Entries outside `mask` (when given) are left empty.
pub fn matrix_to_csv(m: &DenseMatrix, mask: Option<&ObservationMask>) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols())
            .map(|j| match mask {
                Some(mask) if !mask.contains(i, j) => String::new(),
                _ => format_f64(m.get(i, j)),
            })
            .collect();
        let line = row.join(",");
        // a blank line would be skipped on read; quote the lone empty cell
        out.push_str(if line.is_empty() { "\"\"" } else { &line });
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix, mask: Option<&ObservationMask>) -> Result<()> {
    File::create(path)?.write_all(matrix_to_csv(m, mask).as_bytes())?;
    Ok(())
}

pub fn mask_to_csv(mask: &ObservationMask) -> String {
    let mut out = String::from("row,col\n");
    for &(i, j) in mask.observed() {
        out.push_str(&format!("{i},{j}\n"));
    }
    out
}

pub fn write_mask_csv(path: &Path, mask: &ObservationMask) -> Result<()> {
    File::create(path)?.write_all(mask_to_csv(mask).as_bytes())?;
    Ok(())
}

pub fn parse_mask_csv(text: &str, rows: usize, cols: usize) -> Result<ObservationMask> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.len() != 2 || &headers[0] != "row" || &headers[1] != "col" {
        return Err(Error::Parse {
            row: 0,
            col: 0,
            msg: "mask file must start with a `row,col` header".into(),
        });
    }
    let mut pairs = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        // data rows are numbered from 1; row 0 is the header
        let line = k + 1;
        let index = |c: usize| -> Result<usize> {
            record[c].parse().map_err(|_| Error::Parse {
                row: line,
                col: c,
                msg: format!("`{}` is not a nonnegative integer", &record[c]),
            })
        };
        let (i, j) = (index(0)?, index(1)?);
        if i >= rows || j >= cols {
            return Err(Error::Parse {
                row: line,
                col: 0,
                msg: format!("index ({i}, {j}) outside a {rows}x{cols} matrix"),
            });
        }
        pairs.push((i, j));
    }
    ObservationMask::new(rows, cols, pairs).map_err(|e| Error::Parse {
        row: 0,
        col: 0,
        msg: e.to_string(),
    })
}

pub fn read_mask_csv(path: &Path, rows: usize, cols: usize) -> Result<ObservationMask> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_mask_csv(&text, rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_complete_matrix() {
        let (m, mask) = parse_matrix_csv("1,2\n3,4\n", EmptyCellPolicy::Mask).unwrap();
        assert_eq!(m.to_row_major(), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(mask.is_full());
    }

    #[test]
    fn empty_cells_become_unobserved() {
        let (m, mask) = parse_matrix_csv("1,\n3,4", EmptyCellPolicy::Mask).unwrap();
        assert_eq!(mask.observed(), &[(0, 0), (1, 0), (1, 1)]);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn strict_policy_reports_location() {
        match parse_matrix_csv("1,\n3,4", EmptyCellPolicy::Strict) {
            Err(Error::Parse { row: 0, col: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_and_non_numeric_rows() {
        assert!(matches!(
            parse_matrix_csv("1,2\n3\n", EmptyCellPolicy::Mask),
            Err(Error::Parse { row: 1, .. })
        ));
        assert!(matches!(
            parse_matrix_csv("1,2\n3,x\n", EmptyCellPolicy::Mask),
            Err(Error::Parse { row: 1, col: 1, .. })
        ));
        assert!(matches!(
            parse_matrix_csv("1,nan\n", EmptyCellPolicy::Mask),
            Err(Error::Parse { row: 0, col: 1, .. })
        ));
        assert!(parse_matrix_csv("", EmptyCellPolicy::Mask).is_err());
    }

    #[test]
    fn emit_with_mask_leaves_blanks() {
        let m = DenseMatrix::from_rows(&[vec![1.5, 2.0], vec![-3.0, 0.25]]).unwrap();
        let mask = ObservationMask::new(2, 2, [(0, 0), (1, 1)]).unwrap();
        assert_eq!(matrix_to_csv(&m, Some(&mask)), "1.5,\n,0.25\n");
        let (back, back_mask) = parse_matrix_csv(&matrix_to_csv(&m, Some(&mask)), EmptyCellPolicy::Mask).unwrap();
        assert_eq!(back_mask, mask);
        assert_eq!(back.get(1, 1), 0.25);
    }

    #[test]
    fn single_column_with_missing_row() {
        let m = DenseMatrix::from_row_major(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let mask = ObservationMask::new(3, 1, [(0, 0), (2, 0)]).unwrap();
        let text = matrix_to_csv(&m, Some(&mask));
        assert_eq!(text, "1\n\"\"\n3\n");
        let (back, back_mask) = parse_matrix_csv(&text, EmptyCellPolicy::Mask).unwrap();
        assert_eq!(back.shape(), (3, 1));
        assert_eq!(back_mask, mask);
    }

    #[test]
    fn mask_csv() {
        let mask = ObservationMask::new(3, 2, [(2, 1), (0, 0)]).unwrap();
        let text = mask_to_csv(&mask);
        assert_eq!(text, "row,col\n0,0\n2,1\n");
        assert_eq!(parse_mask_csv(&text, 3, 2).unwrap(), mask);
        assert!(parse_mask_csv("row,col\n3,0\n", 3, 2).is_err());
        assert!(parse_mask_csv("row,col\n0,0\n0,0\n", 3, 2).is_err());
        assert!(parse_mask_csv("i,j\n0,0\n", 3, 2).is_err());
        assert!(matches!(
            parse_mask_csv("row,col\n0,-1\n", 3, 2),
            Err(Error::Parse { row: 1, col: 1, .. })
        ));
    }

    #[test]
    fn formatting_is_readable() {
        assert_eq!(format_f64(1.0), "1");
        assert_eq!(format_f64(0.1), "0.1");
        assert_eq!(format_f64(0.0), "0");
        assert_eq!(format_f64(1e-10), "1e-10");
        assert_eq!(format_f64(-2.5e20), "-2.5e20");
    }

    proptest! {
        #[test]
        fn emit_then_ingest_is_exact(bits in prop::collection::vec(any::<u64>(), 1..30), cols in 1usize..6) {
            let vals: Vec<f64> = bits.iter().map(|&b| f64::from_bits(b)).filter(|v| v.is_finite()).collect();
            let rows = vals.len() / cols;
            prop_assume!(rows > 0);
            let m = DenseMatrix::from_row_major(rows, cols, vals[..rows * cols].to_vec()).unwrap();
            let (back, mask) = parse_matrix_csv(&matrix_to_csv(&m, None), EmptyCellPolicy::Strict).unwrap();
            prop_assert!(mask.is_full());
            let a: Vec<u64> = m.to_row_major().iter().map(|x| x.to_bits()).collect();
            let b: Vec<u64> = back.to_row_major().iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
