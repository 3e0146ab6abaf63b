#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{nll_loss, AugmentedScoreMap, MarginalVectors, LOG_FLOOR};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornParams {
    /// Entropic regularization strength.
    pub lambda: f64,
    /// Number of alternating updates; always run in full unless
    /// `tolerance` is set.
    pub iterations: usize,
    /// Optional early stop once the marginal residual drops below this.
    pub tolerance: Option<f64>,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self { lambda: 0.5, iterations: 50, tolerance: None }
    }
}

impl SinkhornParams {
    pub fn new(lambda: f64, iterations: usize) -> Self {
        Self { lambda, iterations, tolerance: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("Sinkhorn needs at least one iteration"));
        }
        Ok(())
    }
}

/// Transport plan over the augmented index set.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    pub plan: DMatrix<f64>,
    pub iterations_run: usize,
    /// `‖P1 − a‖∞ + ‖Pᵀ1 − b‖∞`.
    pub marginal_residual: f64,
}

impl AssignmentMatrix {
    pub fn sources(&self) -> usize {
        self.plan.nrows() - 1
    }

    pub fn targets(&self) -> usize {
        self.plan.ncols() - 1
    }
}

/// Dual potentials in score units.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials {
    pub f: DVector<f64>,
    pub g: DVector<f64>,
}

/// Scaled scores `S̄/λ` in row-major order plus log-marginals. Potentials
/// handled here are scaled by `1/λ` as well.
///
/// The log-sum-exp updates are factored through `e_ij = exp(k_ij − max_j k_ij)`,
/// computed once, so each iteration costs `O(M+N)` exponentials. A row or
/// column whose factored sum underflows is recomputed directly.
struct Kernel {
    rows: usize,
    cols: usize,
    k: Vec<f64>,
    e: Vec<f64>,
    row_max: Vec<f64>,
    log_a: Vec<f64>,
    log_b: Vec<f64>,
}

// Factored sums below this are recomputed term by term.
const UNDERFLOW_GUARD: f64 = 1e-280;

impl Kernel {
    fn new(s_bar: &AugmentedScoreMap, lambda: f64) -> Self {
        let s = s_bar.matrix();
        let (rows, cols) = s.shape();
        let mut k = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                k.push(s[(i, j)] / lambda);
            }
        }
        let row_max: Vec<f64> = k.chunks(cols).map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        let e = k.chunks(cols).zip(&row_max).flat_map(|(r, m)| r.iter().map(move |v| (v - m).exp())).collect();
        let mv = MarginalVectors::new(rows - 1, cols - 1);
        Self {
            rows,
            cols,
            k,
            e,
            row_max,
            log_a: mv.a.iter().map(|v| v.ln()).collect(),
            log_b: mv.b.iter().map(|v| v.ln()).collect(),
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.k[i * self.cols..(i + 1) * self.cols]
    }

    fn e_row(&self, i: usize) -> &[f64] {
        &self.e[i * self.cols..(i + 1) * self.cols]
    }

    /// `f_i = log a_i − LSE_j(k_ij + g_j)`.
    fn update_f(&self, g: &[f64], f: &mut [f64]) {
        let shift = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = g.iter().map(|v| (v - shift).exp()).collect();
        for (i, fi) in f.iter_mut().enumerate() {
            let sum: f64 = self.e_row(i).iter().zip(&w).map(|(e, w)| e * w).sum();
            let lse = if sum > UNDERFLOW_GUARD {
                self.row_max[i] + shift + sum.ln()
            } else {
                let row = self.row(i);
                let max = row.iter().zip(g).map(|(k, g)| k + g).fold(f64::NEG_INFINITY, f64::max);
                max + row.iter().zip(g).map(|(k, g)| (k + g - max).exp()).sum::<f64>().ln()
            };
            *fi = self.log_a[i] - lse;
        }
    }

    /// `g_j = log b_j − LSE_i(k_ij + f_i)`, accumulated row by row.
    fn update_g(&self, f: &[f64], g: &mut [f64], acc: &mut [f64]) {
        let shifted: Vec<f64> = f.iter().zip(&self.row_max).map(|(f, m)| f + m).collect();
        let shift = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        acc.fill(0.0);
        for (i, s) in shifted.iter().enumerate() {
            let u = (s - shift).exp();
            if u == 0.0 {
                continue;
            }
            for (a, e) in acc.iter_mut().zip(self.e_row(i)) {
                *a += e * u;
            }
        }
        for j in 0..self.cols {
            let lse = if acc[j] > UNDERFLOW_GUARD {
                shift + acc[j].ln()
            } else {
                let max = (0..self.rows).map(|i| self.k[i * self.cols + j] + f[i]).fold(f64::NEG_INFINITY, f64::max);
                max + (0..self.rows).map(|i| (self.k[i * self.cols + j] + f[i] - max).exp()).sum::<f64>().ln()
            };
            g[j] = self.log_b[j] - lse;
        }
    }

    fn log_plan(&self, f: &[f64], g: &[f64], i: usize, j: usize) -> f64 {
        self.k[i * self.cols + j] + f[i] + g[j]
    }

    fn plan(&self, f: &[f64], g: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.log_plan(f, g, i, j).exp())
    }

    fn residual(&self, f: &[f64], g: &[f64]) -> f64 {
        let mut col = vec![0.0; self.cols];
        let mut row_err: f64 = 0.0;
        for i in 0..self.rows {
            let mut sum = 0.0;
            for (j, c) in col.iter_mut().enumerate() {
                let p = self.log_plan(f, g, i, j).exp();
                sum += p;
                *c += p;
            }
            row_err = row_err.max((sum - self.log_a[i].exp()).abs());
        }
        let col_err = col.iter().zip(&self.log_b).map(|(c, lb)| (c - lb.exp()).abs()).fold(0.0, f64::max);
        row_err + col_err
    }
}

fn finite_or_err(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteScores)
    }
}

/// Entropic optimal transport between the augmented marginals with cost
/// `−S̄` and regularization `λ`, solved by alternating log-sum-exp updates
/// of the dual potentials. The plan is `exp((S̄_ij + f_i + g_j)/λ)`.
pub fn sinkhorn_log(s_bar: &AugmentedScoreMap, params: &SinkhornParams) -> Result<(AssignmentMatrix, DualPotentials)> {
    params.validate()?;
    let kernel = Kernel::new(s_bar, params.lambda);
    finite_or_err(&kernel.k)?;
    let mut f = vec![0.0; kernel.rows];
    let mut g = vec![0.0; kernel.cols];
    let mut scratch = vec![0.0; kernel.cols];
    let mut iterations_run = 0;
    let mut residual = None;
    for _ in 0..params.iterations {
        kernel.update_f(&g, &mut f);
        kernel.update_g(&f, &mut g, &mut scratch);
        iterations_run += 1;
        if let Some(tol) = params.tolerance {
            let r = kernel.residual(&f, &g);
            residual = Some(r);
            if r < tol {
                break;
            }
        }
    }
    finite_or_err(&f)?;
    finite_or_err(&g)?;
    let marginal_residual = residual.unwrap_or_else(|| kernel.residual(&f, &g));
    let plan = kernel.plan(&f, &g);
    let lambda = params.lambda;
    let duals = DualPotentials {
        f: DVector::from_iterator(f.len(), f.iter().map(|v| v * lambda)),
        g: DVector::from_iterator(g.len(), g.iter().map(|v| v * lambda)),
    };
    Ok((AssignmentMatrix { plan, iterations_run, marginal_residual }, duals))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornGradient {
    pub loss: f64,
    /// `∂loss/∂S̄`, same shape as the augmented scores.
    pub gradient: DMatrix<f64>,
    pub plan: AssignmentMatrix,
}

/// Loss of the plan against `m_bar` and its exact gradient with respect to
/// every augmented score, by reverse-mode differentiation through all
/// `params.iterations` updates. The tolerance is ignored.
pub fn sinkhorn_grad(
    s_bar: &AugmentedScoreMap,
    m_bar: &DMatrix<f64>,
    params: &SinkhornParams,
) -> Result<SinkhornGradient> {
    params.validate()?;
    let kernel = Kernel::new(s_bar, params.lambda);
    finite_or_err(&kernel.k)?;
    let (rows, cols) = (kernel.rows, kernel.cols);
    if m_bar.shape() != (rows, cols) {
        return Err(Error::DimensionMismatch { expected: rows * cols, found: m_bar.len() });
    }
    let total: f64 = m_bar.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyGroundTruth);
    }

    // gs[l] holds g after l iterations, fs[l] holds f after l + 1.
    let iters = params.iterations;
    let mut fs: Vec<Vec<f64>> = Vec::with_capacity(iters);
    let mut gs: Vec<Vec<f64>> = vec![vec![0.0; cols]];
    let mut scratch = vec![0.0; cols];
    for l in 0..iters {
        let mut f = vec![0.0; rows];
        kernel.update_f(&gs[l], &mut f);
        let mut g = vec![0.0; cols];
        kernel.update_g(&f, &mut g, &mut scratch);
        fs.push(f);
        gs.push(g);
    }
    let (f_last, g_last) = (&fs[iters - 1], &gs[iters]);
    finite_or_err(f_last)?;
    finite_or_err(g_last)?;

    // Adjoint of log P; clamped entries contribute a constant.
    let floor = LOG_FLOOR.ln();
    let mut k_bar = vec![0.0; rows * cols];
    let mut f_bar = vec![0.0; rows];
    let mut g_bar = vec![0.0; cols];
    for i in 0..rows {
        for j in 0..cols {
            let m = m_bar[(i, j)];
            if m != 0.0 && kernel.log_plan(f_last, g_last, i, j) > floor {
                let w = -m / total;
                k_bar[i * cols + j] += w;
                f_bar[i] += w;
                g_bar[j] += w;
            }
        }
    }

    for l in (0..iters).rev() {
        let f = &fs[l];
        // g(l+1) = log b − LSE_i(k + f): column softmax weights.
        let g = &gs[l + 1];
        for i in 0..rows {
            let mut acc = 0.0;
            for j in 0..cols {
                let kappa = (kernel.log_plan(f, g, i, j) - kernel.log_b[j]).exp();
                let c = kappa * g_bar[j];
                k_bar[i * cols + j] -= c;
                acc += c;
            }
            f_bar[i] -= acc;
        }
        // f(l+1) = log a − LSE_j(k + g(l)): row softmax weights.
        let g_prev = &gs[l];
        g_bar.fill(0.0);
        for i in 0..rows {
            for j in 0..cols {
                let pi = (kernel.log_plan(f, g_prev, i, j) - kernel.log_a[i]).exp();
                let c = pi * f_bar[i];
                k_bar[i * cols + j] -= c;
                g_bar[j] -= c;
            }
        }
        f_bar.fill(0.0);
    }

    let lambda = params.lambda;
    let gradient = DMatrix::from_fn(rows, cols, |i, j| k_bar[i * cols + j] / lambda);
    let plan_matrix = kernel.plan(f_last, g_last);
    let loss = nll_loss(&plan_matrix, m_bar)?;
    let plan = AssignmentMatrix {
        plan: plan_matrix,
        iterations_run: iters,
        marginal_residual: kernel.residual(f_last, g_last),
    };
    Ok(SinkhornGradient { loss, gradient, plan })
}

/// Relative errors below this magnitude of gradient are measured against
/// it instead, so entries that are zero up to rounding do not dominate.
pub const GRADCHECK_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckEntry {
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub finite_diff: f64,
    /// `|analytic − finite_diff| / max(|analytic|, |finite_diff|, GRADCHECK_FLOOR)`.
    pub rel_err: f64,
}

/// Compares [`sinkhorn_grad`] with central differences of step `h` on every
/// augmented score.
pub fn gradient_check(
    s_bar: &AugmentedScoreMap,
    m_bar: &DMatrix<f64>,
    params: &SinkhornParams,
    h: f64,
) -> Result<Vec<GradCheckEntry>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let analytic = sinkhorn_grad(s_bar, m_bar, params)?.gradient;
    let loss_at = |i: usize, j: usize, delta: f64| -> Result<f64> {
        let mut s = s_bar.matrix().clone();
        s[(i, j)] += delta;
        Ok(sinkhorn_grad(&AugmentedScoreMap::from_matrix(s, s_bar.alpha())?, m_bar, params)?.loss)
    };
    let mut out = Vec::with_capacity(analytic.len());
    for i in 0..analytic.nrows() {
        for j in 0..analytic.ncols() {
            let fd = (loss_at(i, j, h)? - loss_at(i, j, -h)?) / (2.0 * h);
            let a = analytic[(i, j)];
            let rel_err = (a - fd).abs() / a.abs().max(fd.abs()).max(GRADCHECK_FLOOR);
            out.push(GradCheckEntry { row: i, col: j, analytic: a, finite_diff: fd, rel_err });
        }
    }
    Ok(out)
}
