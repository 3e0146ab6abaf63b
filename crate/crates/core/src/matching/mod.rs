//! Score maps, outlier bins and soft assignment.
//!
//! Index convention: rows are source points (`i < M`), columns are target
//! points (`j < N`). Augmented matrices append the outlier bin as row `M`
//! and column `N`.

#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::descriptors::DescriptorMatrix;
use crate::error::{Error, Result};

mod gt;
mod sinkhorn;

pub use gt::{gt_correspondences, GtCorrespondence};
pub use sinkhorn::{
    gradient_check, sinkhorn_grad, sinkhorn_log, AssignmentMatrix, DualPotentials, GradCheckEntry, SinkhornGradient,
    SinkhornParams, GRADCHECK_FLOOR,
};

/// Score of the outlier bin.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Probabilities are clamped to this before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-30;

/// `M × N` matrix of descriptor inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    scores: DMatrix<f64>,
}

impl ScoreMap {
    pub fn new(scores: DMatrix<f64>) -> Result<Self> {
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScores);
        }
        Ok(Self { scores })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.scores
    }

    pub fn sources(&self) -> usize {
        self.scores.nrows()
    }

    pub fn targets(&self) -> usize {
        self.scores.ncols()
    }

    pub fn transpose(&self) -> ScoreMap {
        ScoreMap { scores: self.scores.transpose() }
    }
}

/// `S[i, j] = ⟨fx_i, fy_j⟩`.
pub fn score_map(fx: &DescriptorMatrix, fy: &DescriptorMatrix) -> Result<ScoreMap> {
    if fx.dim() != fy.dim() {
        return Err(Error::DimensionMismatch { expected: fx.dim(), found: fy.dim() });
    }
    let scores =
        DMatrix::from_fn(fx.rows(), fy.rows(), |i, j| fx.row(i).iter().zip(fy.row(j)).map(|(a, b)| a * b).sum::<f64>());
    ScoreMap::new(scores)
}

/// `(M+1) × (N+1)` scores with the outlier row and column.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedScoreMap {
    matrix: DMatrix<f64>,
    alpha: f64,
}

impl AugmentedScoreMap {
    /// Wraps an arbitrary augmented matrix whose bin entries need not be
    /// equal, e.g. when every entry is perturbed independently.
    pub fn from_matrix(matrix: DMatrix<f64>, alpha: f64) -> Result<Self> {
        if matrix.nrows() < 2 || matrix.ncols() < 2 {
            return Err(Error::invalid("augmented score map needs at least 2x2 entries"));
        }
        if matrix.iter().any(|v| !v.is_finite()) || !alpha.is_finite() {
            return Err(Error::NonFiniteScores);
        }
        Ok(Self { matrix, alpha })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sources(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn targets(&self) -> usize {
        self.matrix.ncols() - 1
    }

    /// The inner `M × N` block.
    pub fn strip(&self) -> ScoreMap {
        ScoreMap { scores: self.matrix.view((0, 0), (self.sources(), self.targets())).into_owned() }
    }
}

/// Appends an outlier row and column filled with `alpha`.
pub fn augment_scores(s: &ScoreMap, alpha: f64) -> Result<AugmentedScoreMap> {
    let (m, n) = (s.sources(), s.targets());
    let mut matrix = DMatrix::from_element(m + 1, n + 1, alpha);
    matrix.view_mut((0, 0), (m, n)).copy_from(&s.scores);
    AugmentedScoreMap::from_matrix(matrix, alpha)
}

/// Row and column sums of a feasible plan: every point carries unit mass
/// and each bin can absorb all points of the other side.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalVectors {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
}

impl MarginalVectors {
    pub fn new(m: usize, n: usize) -> Self {
        let mut a = DVector::from_element(m + 1, 1.0);
        a[m] = n as f64;
        let mut b = DVector::from_element(n + 1, 1.0);
        b[n] = m as f64;
        Self { a, b }
    }
}

/// Softmax along every row, with the row maximum subtracted first.
pub fn row_softmax(s: &ScoreMap) -> DMatrix<f64> {
    let mut out = s.scores.clone();
    for mut row in out.row_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.apply(|v| *v = (*v - max).exp());
        let total: f64 = row.iter().sum();
        row.apply(|v| *v /= total);
    }
    out
}

/// Negative log-likelihood of the ground-truth entries,
/// `−Σ log(max(P, 1e-30))·M / ΣM`.
pub fn nll_loss(p: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<f64> {
    if p.shape() != m.shape() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: m.len() });
    }
    let total: f64 = m.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyGroundTruth);
    }
    let mut acc = 0.0;
    for (pv, mv) in p.iter().zip(m.iter()) {
        if *mv != 0.0 {
            acc += pv.max(LOG_FLOOR).ln() * mv;
        }
    }
    Ok(-acc / total)
}

/// A weighted source/target index pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Default extraction threshold: twice the uniform-plan level `1/(M+N)`.
pub fn default_min_prob(m: usize, n: usize) -> f64 {
    2.0 / (m + n) as f64
}

/// For each source row, its best target column, kept when it beats the
/// row's outlier bin and reaches `min_prob`. Ties go to the lower column.
pub fn extract_correspondences(plan: &AssignmentMatrix, min_prob: f64) -> Vec<Correspondence> {
    let p = &plan.plan;
    let (m, n) = (p.nrows() - 1, p.ncols() - 1);
    let mut out = Vec::new();
    for i in 0..m {
        let mut best = 0;
        for j in 1..n {
            if p[(i, j)] > p[(i, best)] {
                best = j;
            }
        }
        let w = p[(i, best)];
        if n > 0 && w > p[(i, n)] && w >= min_prob {
            out.push(Correspondence { source: i, target: best, weight: w });
        }
    }
    out
}

/// Target-major matching: every target column picks the source with the
/// highest softmax probability over sources. Each softmax row carries unit
/// mass, so every target counts fully: no bin, no threshold, weight 1.
pub fn softmax_correspondences(s: &ScoreMap) -> Vec<Correspondence> {
    let probs = row_softmax(&s.transpose());
    let mut out = Vec::with_capacity(probs.nrows());
    for (j, row) in probs.row_iter().enumerate() {
        let mut best = 0;
        for i in 1..row.len() {
            if row[i] > row[best] {
                best = i;
            }
        }
        out.push(Correspondence { source: best, target: j, weight: 1.0 });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use alloc::vec;
    use rand::Rng;

    fn random_descriptors(seed: u64, rows: usize, dim: usize) -> DescriptorMatrix {
        let mut rng = rng_from_seed(seed);
        DescriptorMatrix::new(rows, dim, (0..rows * dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).unwrap()
    }

    #[test]
    fn score_map_matches_triple_loop() {
        let fx = random_descriptors(1, 5, 3);
        let fy = random_descriptors(2, 4, 3);
        let s = score_map(&fx, &fy).unwrap();
        for i in 0..5 {
            for j in 0..4 {
                let mut acc = 0.0;
                for p in 0..3 {
                    acc += fx.row(i)[p] * fy.row(j)[p];
                }
                assert!((s.matrix()[(i, j)] - acc).abs() < 1e-12);
            }
        }
        assert_eq!(score_map(&fy, &fx).unwrap().matrix(), &s.matrix().transpose());
        assert!(matches!(score_map(&fx, &random_descriptors(3, 4, 2)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn orthonormal_rows_give_identity() {
        let e = DescriptorMatrix::new(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(score_map(&e, &e).unwrap().into_matrix(), DMatrix::identity(3, 3));
    }

    #[test]
    fn augmentation_round_trip() {
        let s = ScoreMap::new(DMatrix::from_element(1, 1, 0.7)).unwrap();
        let a = augment_scores(&s, DEFAULT_ALPHA).unwrap();
        assert_eq!(a.matrix(), &DMatrix::from_row_slice(2, 2, &[0.7, 0.01, 0.01, 0.01]));
        let s = score_map(&random_descriptors(4, 6, 3), &random_descriptors(5, 7, 3)).unwrap();
        assert_eq!(augment_scores(&s, 0.3).unwrap().strip(), s);
    }

    #[test]
    fn marginals_balance() {
        let mv = MarginalVectors::new(7, 4);
        assert_eq!(mv.a.sum(), 11.0);
        assert_eq!(mv.b.sum(), 11.0);
        assert_eq!(mv.a[7], 4.0);
        assert_eq!(mv.b[4], 7.0);
    }

    #[test]
    fn softmax_rows() {
        let s = ScoreMap::new(DMatrix::from_row_slice(2, 4, &[2.0, 2.0, 2.0, 2.0, 0.0, 1.0, 800.0, 0.0])).unwrap();
        let p = row_softmax(&s);
        for j in 0..4 {
            assert!((p[(0, j)] - 0.25).abs() < 1e-15);
        }
        assert_eq!(p[(1, 2)], 1.0);
        let s = score_map(&random_descriptors(6, 9, 4), &random_descriptors(7, 5, 4)).unwrap();
        for row in row_softmax(&s).row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_closed_forms() {
        let m = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(nll_loss(&m, &m).unwrap(), 0.0);
        let uniform = DMatrix::from_element(2, 3, 1.0 / 3.0);
        assert!((nll_loss(&uniform, &m).unwrap() - 3f64.ln()).abs() < 1e-12);
        assert_eq!(nll_loss(&uniform, &DMatrix::zeros(2, 3)), Err(Error::EmptyGroundTruth));
        // Hard zeros are clamped instead of producing infinity.
        assert!((nll_loss(&DMatrix::zeros(2, 3), &m).unwrap() - 1e30f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn loss_matches_naive_sum() {
        let mut rng = rng_from_seed(10);
        for _ in 0..20 {
            let p = DMatrix::from_fn(5, 4, |_, _| rng.random::<f64>());
            let mut m = DMatrix::from_fn(5, 4, |_, _| f64::from(u8::from(rng.random::<f64>() < 0.3)));
            m[(0, 0)] = 1.0;
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..5 {
                for j in 0..4 {
                    num -= p[(i, j)].max(LOG_FLOOR).ln() * m[(i, j)];
                    den += m[(i, j)];
                }
            }
            assert!((nll_loss(&p, &m).unwrap() - num / den).abs() < 1e-12);
        }
    }

    #[test]
    fn extraction_respects_bins_and_threshold() {
        let p = DMatrix::from_row_slice(3, 3, &[0.9, 0.05, 0.05, 0.1, 0.2, 0.7, 0.0, 0.75, 1.25]);
        let plan = AssignmentMatrix { plan: p, iterations_run: 1, marginal_residual: 0.0 };
        let c = extract_correspondences(&plan, 0.01);
        assert_eq!(c, vec![Correspondence { source: 0, target: 0, weight: 0.9 }]);
        assert!(extract_correspondences(&plan, 0.95).is_empty());
    }

    #[test]
    fn descriptor_scale_only_rescales_lambda() {
        let (fx, fy) = (random_descriptors(8, 9, 5), random_descriptors(9, 6, 5));
        let argmax = |p: &DMatrix<f64>| -> Vec<usize> { p.row_iter().map(|r| r.transpose().argmax().0).collect() };
        for c in [0.5, 3.0] {
            let base = score_map(&fx, &fy).unwrap();
            let big = score_map(&fx.scaled(c), &fy.scaled(c)).unwrap();
            assert!((big.matrix() - base.matrix() * (c * c)).norm() < 1e-12);
            assert_eq!(argmax(&row_softmax(&big)), argmax(&row_softmax(&base)));
            assert_eq!(softmax_correspondences(&big), softmax_correspondences(&base));

            let p = |s: &ScoreMap, k: f64| {
                sinkhorn_log(&augment_scores(s, 0.2 * k).unwrap(), &SinkhornParams::new(0.5 * k, 50)).unwrap().0.plan
            };
            assert!((p(&big, c * c) - p(&base, 1.0)).abs().max() < 1e-10);
        }
    }

    #[test]
    fn softmax_matching_is_per_target() {
        let s = ScoreMap::new(DMatrix::from_row_slice(2, 3, &[5.0, 0.0, 5.0, 0.0, 5.0, 0.0])).unwrap();
        let c = softmax_correspondences(&s);
        assert_eq!(c.iter().map(|c| (c.source, c.target)).collect::<Vec<_>>(), vec![(0, 0), (1, 1), (0, 2)]);
        assert!(c.iter().all(|c| c.weight == 1.0));
    }
}
