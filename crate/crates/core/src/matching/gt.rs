use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::cloud::{NeighborIndex, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{apply_transform, RigidTransform};

/// Ground-truth assignment: a partial one-to-one matching plus the points
/// routed to the outlier bins.
#[derive(Debug, Clone, PartialEq)]
pub struct GtCorrespondence {
    pub sources: usize,
    pub targets: usize,
    /// `(i, j)` pairs, ascending in `i`.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_sources: Vec<usize>,
    pub unmatched_targets: Vec<usize>,
}

impl GtCorrespondence {
    /// The `M × N` binary block.
    pub fn inner(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.sources, self.targets);
        for &(i, j) in &self.pairs {
            m[(i, j)] = 1.0;
        }
        m
    }

    /// The `(M+1) × (N+1)` binary matrix with bin entries set.
    pub fn augmented(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.sources + 1, self.targets + 1);
        for &(i, j) in &self.pairs {
            m[(i, j)] = 1.0;
        }
        for &i in &self.unmatched_sources {
            m[(i, self.targets)] = 1.0;
        }
        for &j in &self.unmatched_targets {
            m[(self.sources, j)] = 1.0;
        }
        m
    }
}

/// Pairs `(i, j)` with `‖gt(x_i) − y_j‖ ≤ threshold` that are mutual nearest
/// neighbors, ties going to the lower index. Everything else goes to the
/// bins.
pub fn gt_correspondences(
    x: &PointCloud,
    y: &PointCloud,
    gt: &RigidTransform,
    threshold: f64,
) -> Result<GtCorrespondence> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::degenerate("ground-truth matching needs nonempty clouds"));
    }
    if !(threshold >= 0.0) {
        return Err(Error::invalid("threshold must be nonnegative"));
    }
    let moved = apply_transform(gt, x);
    let y_index = NeighborIndex::new(&y.points);
    let x_index = NeighborIndex::new(&moved.points);
    let backward: Vec<usize> = y.points.iter().map(|q| x_index.nearest(q).expect("nonempty").index).collect();
    let limit = threshold * threshold;
    let mut pairs = Vec::new();
    let mut matched_target = alloc::vec![false; y.len()];
    let mut unmatched_sources = Vec::new();
    for (i, p) in moved.points.iter().enumerate() {
        let fwd = y_index.nearest(p).expect("nonempty");
        if fwd.dist2 <= limit && backward[fwd.index] == i {
            pairs.push((i, fwd.index));
            matched_target[fwd.index] = true;
        } else {
            unmatched_sources.push(i);
        }
    }
    let unmatched_targets = (0..y.len()).filter(|&j| !matched_target[j]).collect();
    Ok(GtCorrespondence { sources: x.len(), targets: y.len(), pairs, unmatched_sources, unmatched_targets })
}
