//! Per-point feature vectors.
//!
//! The matcher only ever sees two [`DescriptorMatrix`] values, so any
//! feature extractor can be plugged in through [`PairDescriptor`].

#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::vec::Vec;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

mod fpfh;
mod oracle;

pub use fpfh::{fpfh, spfh, FpfhDescriptor, FpfhParams, Histograms, NormalOrientation};
pub use oracle::{oracle_descriptors, OracleDescriptor};

/// One `dim`-dimensional feature per point, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl DescriptorMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch { expected: rows * dim, found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("descriptor entries must be finite"));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { rows: self.rows, dim: self.dim, data: self.data.iter().map(|v| v * c).collect() }
    }

    /// Rescales every row to L2 norm `gain`; zero rows stay zero.
    pub fn normalized_rows(&self, gain: f64) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_mut(self.dim.max(1)) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v *= gain / norm);
            }
        }
        Self { rows: self.rows, dim: self.dim, data }
    }

    /// Rows in the given order (indices may repeat).
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: indices.len(), dim: self.dim, data }
    }
}

/// Produces descriptors for a source/target pair.
///
/// Most extractors describe each cloud independently; the pair form also
/// admits the oracle, which needs both clouds and the true pose.
pub trait PairDescriptor {
    fn name(&self) -> &str;
    fn describe_pair(&self, x: &PointCloud, y: &PointCloud) -> Result<(DescriptorMatrix, DescriptorMatrix)>;
}
