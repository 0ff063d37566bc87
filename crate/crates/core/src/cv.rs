//! k-fold cross-validation residuals of kernel interpolants on a mini-batch,
//! computed from a single inverse of the regularized batch Gram matrix
//! (extended Rippa scheme), together with the analytic gradient of the
//! squared residual norm with respect to the first-layer matrix.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::{gram_symmetric_rows, rows_of, KernelSpec};
use crate::layer::FirstLayer;

/// Transformed pairs closer than this contribute nothing to the gradient.
const COINCIDENT_DISTANCE: f64 = 1e-12;

/// Partition of the batch indices `0..batch_size` into `k` validation folds
/// whose sizes differ by at most one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    batch_size: usize,
    folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Builds a plan from explicit folds, checking the partition invariants.
    pub fn from_folds(batch_size: usize, folds: Vec<Vec<usize>>) -> Result<Self> {
        let k = folds.len();
        if k < 2 || k > batch_size {
            return Err(Error::domain(format!(
                "fold count must satisfy 1 < k <= {batch_size}, got {k}"
            )));
        }
        let mut seen = vec![false; batch_size];
        for &i in folds.iter().flatten() {
            if i >= batch_size || seen[i] {
                return Err(Error::domain(format!("fold index {i} out of range or repeated")));
            }
            seen[i] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::domain("folds do not cover the batch"));
        }
        let max = folds.iter().map(Vec::len).max().unwrap_or(0);
        let min = folds.iter().map(Vec::len).min().unwrap_or(0);
        if max - min > 1 {
            return Err(Error::domain(format!("fold sizes {min}..{max} differ by more than one")));
        }
        Ok(FoldPlan { batch_size, folds })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }
}

/// Uniformly random partition of `0..n_batch` into `k` folds.
///
/// Position `p` of a shuffled index list goes to fold `p mod k`, so the first
/// `n_batch mod k` folds carry one extra index. Each fold is sorted.
pub fn make_folds<R: Rng + ?Sized>(n_batch: usize, k: usize, rng: &mut R) -> Result<FoldPlan> {
    if k < 2 || k > n_batch {
        return Err(Error::domain(format!(
            "fold count must satisfy 1 < k <= {n_batch}, got {k}"
        )));
    }
    let mut idx: Vec<usize> = (0..n_batch).collect();
    idx.shuffle(rng);
    let mut folds = vec![Vec::with_capacity(n_batch / k + 1); k];
    for (p, i) in idx.into_iter().enumerate() {
        folds[p % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan {
        batch_size: n_batch,
        folds,
    })
}

/// Complete cross-validation residual vector of a batch and its squared norm.
#[derive(Clone, Debug, PartialEq)]
pub struct CvLossValue {
    pub loss: f64,
    /// `e_i = f_i - s_{-fold(i)}(x_i)`, indexed like the batch.
    pub residuals: DVector<f64>,
}

struct EraParts {
    /// `(K + lambda I)^{-1}`
    w: DMatrix<f64>,
    /// `W f`
    c: DVector<f64>,
    residuals: DVector<f64>,
}

fn validate(layer: &FirstLayer, x: &DMatrix<f64>, f: &DVector<f64>, plan: &FoldPlan, lambda: f64) -> Result<()> {
    if x.nrows() != f.len() || x.nrows() != plan.batch_size() {
        return Err(Error::domain(format!(
            "batch has {} points, {} targets and a fold plan for {}",
            x.nrows(),
            f.len(),
            plan.batch_size()
        )));
    }
    if x.ncols() != layer.cols() {
        return Err(Error::domain(format!(
            "layer expects {} input columns, got {}",
            layer.cols(),
            x.ncols()
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::domain(format!("regularization must be finite and >= 0, got {lambda}")));
    }
    if !x.iter().chain(f.iter()).all(|v| v.is_finite()) {
        return Err(Error::domain("batch contains non-finite values"));
    }
    Ok(())
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let ev = m.clone().symmetric_eigenvalues();
    let max = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    max / min
}

fn solve_spd(m: DMatrix<f64>, rhs: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.solve(rhs));
    }
    m.clone().lu().solve(rhs).ok_or_else(|| Error::Numerical {
        message: format!("{what} is singular"),
        condition: Some(condition_estimate(&m)),
    })
}

fn era_parts(spec: &KernelSpec, z: &[Vec<f64>], f: &DVector<f64>, plan: &FoldPlan, lambda: f64) -> Result<EraParts> {
    let n = z.len();
    let mut m = gram_symmetric_rows(spec, z);
    for i in 0..n {
        m[(i, i)] += lambda;
    }
    let chol = m.clone().cholesky().ok_or_else(|| Error::Numerical {
        message: format!("regularized batch Gram matrix (lambda = {lambda:e}) is not positive definite"),
        condition: Some(condition_estimate(&m)),
    })?;
    let w = chol.inverse();
    let c = chol.solve(f);
    let mut residuals = DVector::zeros(n);
    for fold in plan.folds() {
        let wvv = w.select_rows(fold).select_columns(fold);
        let cv = DVector::from_iterator(fold.len(), fold.iter().map(|&i| c[i]));
        let ev = solve_spd(wvv, &cv, "validation block of the inverse Gram matrix")?;
        for (p, &i) in fold.iter().enumerate() {
            residuals[i] = ev[p];
        }
    }
    if !residuals.iter().all(|v| v.is_finite()) {
        return Err(Error::numerical("non-finite cross-validation residual"));
    }
    Ok(EraParts { w, c, residuals })
}

fn loss_value(residuals: DVector<f64>) -> CvLossValue {
    // summed in batch-index order, independent of fold order
    let loss = residuals.iter().map(|e| e * e).sum();
    CvLossValue { loss, residuals }
}

/// k-fold cross-validation residuals of the two-layered kernel interpolant on
/// one batch, with Tikhonov regularization `lambda` on the batch Gram matrix.
pub fn era_residuals(
    spec: &KernelSpec,
    layer: &FirstLayer,
    x: &DMatrix<f64>,
    f: &DVector<f64>,
    plan: &FoldPlan,
    lambda: f64,
) -> Result<CvLossValue> {
    validate(layer, x, f, plan, lambda)?;
    let z = rows_of(&layer.apply(x)?);
    Ok(loss_value(era_parts(spec, &z, f, plan, lambda)?.residuals))
}

/// Loss and its gradient with respect to every entry of the layer matrix.
///
/// The adjoint runs backwards through the fold solves `W_VV e_V = c_V`, the
/// solve `c = W f` and the inversion `W = (K + lambda I)^{-1}`, which yields
/// `dL/dK`; the chain rule through `K_ij = phi(|A (x_i - x_j)|)` then gives
/// `dL/dA = Z^T Lap(w) X` with pair weights `w_ij = 2 G_ij phi'(r_ij) / r_ij`.
pub fn cv_loss_grad(
    spec: &KernelSpec,
    layer: &FirstLayer,
    x: &DMatrix<f64>,
    f: &DVector<f64>,
    plan: &FoldPlan,
    lambda: f64,
) -> Result<(CvLossValue, DMatrix<f64>)> {
    validate(layer, x, f, plan, lambda)?;
    let zm = layer.apply(x)?;
    let z = rows_of(&zm);
    let n = z.len();
    let EraParts { w, c, residuals } = era_parts(spec, &z, f, plan, lambda)?;

    // dL/dM with M = K + lambda I, accumulated fold by fold as
    // sum_V (W[:,V] g_V) (W[:,V] e_V - c)^T where g_V = W_VV^{-1} (2 e_V).
    let mut m_bar = DMatrix::<f64>::zeros(n, n);
    for fold in plan.folds() {
        let wv = w.select_columns(fold);
        let wvv = wv.select_rows(fold);
        let ev = DVector::from_iterator(fold.len(), fold.iter().map(|&i| residuals[i]));
        let gv = solve_spd(wvv, &(&ev * 2.0), "validation block of the inverse Gram matrix")?;
        let a = &wv * gv;
        let b = &wv * ev - &c;
        m_bar.ger(1.0, &a, &b, 1.0);
    }

    // Pair weights and the Laplacian of the weighted pair graph.
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let r = crate::kernels::euclidean(&z[i], &z[j]);
            if r < COINCIDENT_DISTANCE {
                continue;
            }
            let g = m_bar[(i, j)] + m_bar[(j, i)];
            let wij = g * spec.dphi(r) / r;
            lap[(i, j)] = -wij;
            lap[(j, i)] = -wij;
            lap[(i, i)] += wij;
            lap[(j, j)] += wij;
        }
    }
    let grad = zm.transpose() * lap * x;
    if !grad.iter().all(|v| v.is_finite()) {
        return Err(Error::numerical("non-finite gradient"));
    }
    Ok((loss_value(residuals), grad))
}
