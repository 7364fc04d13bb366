//! Plain-text 4×4 homogeneous transforms: four rows of four whitespace-separated numbers.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::transform::RigidTransform;

/// Rotation blocks loaded from disk must be orthonormal to this tolerance.
pub const LOAD_TOLERANCE: f64 = 1e-6;

/// A validated homogeneous transform (bottom row `0 0 0 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformRecord(pub RigidTransform);

impl TransformRecord {
    pub fn matrix(&self) -> Matrix4<f64> {
        self.0.to_homogeneous()
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        RigidTransform::from_homogeneous(m, LOAD_TOLERANCE).map(TransformRecord)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if rows.len() != 4 {
            return Err(Error::invalid(format!("expected 4 matrix rows, found {}", rows.len())));
        }
        let mut m = Matrix4::zeros();
        for (r, row) in rows.iter().enumerate() {
            let vals: Vec<f64> = row
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::invalid(format!("row {}: bad number '{t}'", r + 1))))
                .collect::<Result<_>>()?;
            if vals.len() != 4 {
                return Err(Error::invalid(format!("row {} has {} values, expected 4", r + 1, vals.len())));
            }
            for (c, v) in vals.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        Self::from_matrix(&m)
    }

    pub fn to_text(&self) -> String {
        let m = self.matrix();
        let mut s = String::new();
        for r in 0..4 {
            let row: Vec<String> = (0..4).map(|c| format!("{}", m[(r, c)])).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }
}

pub fn read_transform(path: impl AsRef<Path>) -> Result<TransformRecord> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TransformRecord::parse(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        location: "matrix".into(),
        message: e.to_string(),
    })
}

pub fn write_transform(record: &TransformRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, record.to_text()).map_err(|e| Error::io(path, e))
}
