//! Raw little-endian arrays with JSON headers, and the gradient-check CSV.
//!
//! The header of `data.bin` lives next to it in `data.bin.json`.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use occlureg_core::descriptors::DescriptorMatrix;
use occlureg_core::matching::GradCheckEntry;
use serde::{Deserialize, Serialize};

use super::{read_bytes, read_json, write_bytes, write_json};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorHeader {
    pub rows: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub order: String,
}

pub fn header_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Stored as f32, so values round to single precision.
pub fn write_descriptors(path: &Path, d: &DescriptorMatrix) -> Result<()> {
    let bytes: Vec<u8> = d.as_slice().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    write_bytes(path, &bytes)?;
    write_json(&header_path(path), &DescriptorHeader { rows: d.rows(), dim: d.dim() })
}

pub fn read_descriptors(path: &Path) -> Result<DescriptorMatrix> {
    let header: DescriptorHeader = read_json(&header_path(path))?;
    let bytes = read_bytes(path)?;
    if bytes.len() != header.rows * header.dim * 4 {
        return Err(Error::format(path, format!("size does not match header {}×{}", header.rows, header.dim)));
    }
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    Ok(DescriptorMatrix::new(header.rows, header.dim, data)?)
}

/// Row-major f64; exact round trip.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut bytes = Vec::with_capacity(m.len() * 8);
    for r in m.row_iter() {
        for v in r.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_bytes(path, &bytes)?;
    let header = MatrixHeader { rows: m.nrows(), cols: m.ncols(), dtype: "f64".into(), order: "row_major".into() };
    write_json(&header_path(path), &header)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let h: MatrixHeader = read_json(&header_path(path))?;
    if h.dtype != "f64" || h.order != "row_major" {
        return Err(Error::format(path, "only row-major f64 matrices are supported"));
    }
    let bytes = read_bytes(path)?;
    if bytes.len() != h.rows * h.cols * 8 {
        return Err(Error::format(path, format!("size does not match header {}×{}", h.rows, h.cols)));
    }
    let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(DMatrix::from_row_slice(h.rows, h.cols, &vals))
}

#[derive(Debug, Serialize, Deserialize)]
struct GradCheckRow {
    entry: String,
    analytic: f64,
    finite_diff: f64,
    rel_err: f64,
}

/// Columns `entry,analytic,finite_diff,rel_err`; `entry` is `row:col`.
pub fn format_gradcheck_csv(entries: &[GradCheckEntry]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in entries {
        let row = GradCheckRow {
            entry: format!("{}:{}", e.row, e.col),
            analytic: e.analytic,
            finite_diff: e.finite_diff,
            rel_err: e.rel_err,
        };
        w.serialize(row).map_err(|e| Error::format(Path::new("<csv>"), e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(Path::new("<csv>"), e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn parse_gradcheck_csv(text: &str, path: &Path) -> Result<Vec<GradCheckEntry>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize::<GradCheckRow>()
        .map(|row| {
            let row = row.map_err(|e| Error::format(path, e.to_string()))?;
            let (i, j) = row.entry.split_once(':').ok_or_else(|| Error::format(path, "entry must be row:col"))?;
            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::format(path, "bad entry index"));
            Ok(GradCheckEntry {
                row: parse(i)?,
                col: parse(j)?,
                analytic: row.analytic,
                finite_diff: row.finite_diff,
                rel_err: row.rel_err,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let m = DMatrix::from_fn(3, 5, |i, j| (i as f64 + 1.0) / (j as f64 + 3.0) - 0.1);
        write_matrix(&p, &m).unwrap();
        assert_eq!(read_matrix(&p).unwrap(), m);
        assert!(header_path(&p).exists());
    }

    #[test]
    fn descriptors_round_trip_in_single_precision() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.f32");
        let d = DescriptorMatrix::new(2, 3, vec![0.5, 0.25, -1.0, 3.0, 0.125, 0.0]).unwrap();
        write_descriptors(&p, &d).unwrap();
        assert_eq!(read_descriptors(&p).unwrap(), d);
        std::fs::write(&p, [0u8; 4]).unwrap();
        assert!(read_descriptors(&p).is_err());
    }

    #[test]
    fn gradcheck_csv_round_trip() {
        let e = vec![
            GradCheckEntry { row: 0, col: 1, analytic: 0.1, finite_diff: 0.1000001, rel_err: 1e-6 },
            GradCheckEntry { row: 2, col: 0, analytic: -3e-9, finite_diff: 0.0, rel_err: 0.3 },
        ];
        let text = format_gradcheck_csv(&e).unwrap();
        assert!(text.starts_with("entry,analytic,finite_diff,rel_err\n"));
        assert_eq!(parse_gradcheck_csv(&text, Path::new("g.csv")).unwrap(), e);
    }
}
