use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::scalar::{log_sum_exp, Scalar};

use super::batch::EmbeddingBatch;
use super::weights::negatives_lse;
use super::{HnConfig, WeightGradient};

/// Summed loss over both directions and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult<T> {
    pub loss: T,
    pub loss_i2t: T,
    pub loss_t2i: T,
    /// `dL/dS` for the similarity matrix `S = X T^T / tau`.
    pub grad_s: Matrix<T>,
    pub grad_x: Matrix<T>,
    pub grad_t: Matrix<T>,
    pub grad_tau: T,
}

/// `S_ij = x_i . t_j / tau`.
pub fn similarity_matrix<T: Scalar>(batch: &EmbeddingBatch<T>) -> Matrix<T> {
    let n = batch.n();
    let tau = batch.tau();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s.row_mut(i)[j] = dot(batch.x().row(i), batch.t().row(j)) / tau;
        }
    }
    s
}

/// Hard-negative contrastive loss, evaluated in log space.
///
/// Each row's denominator is rewritten as a single log-sum-exp over
/// `log(alpha) + S_ii` and `(1+beta) S_ij + log(n-1) - lse_{k!=i}(beta S_ik)`,
/// so no weight or exponential is formed before max subtraction.
pub fn hn_nce_loss<T: Scalar>(batch: &EmbeddingBatch<T>, cfg: &HnConfig<T>) -> Result<LossResult<T>> {
    cfg.validate()?;
    let log_alpha = cfg.alpha.ln();
    let (beta, mode) = (cfg.beta, cfg.weight_gradient);
    contrastive(batch, |row, i, grad| hn_row(row, i, log_alpha, beta, mode, grad))
}

/// InfoNCE; equal bit for bit to [`hn_nce_loss`] at `alpha = 1, beta = 0`.
pub fn info_nce_loss<T: Scalar>(batch: &EmbeddingBatch<T>) -> Result<LossResult<T>> {
    contrastive(batch, info_row)
}

/// Loss with caller-supplied weights held constant (gradients ignore them).
pub fn hn_nce_loss_with_weights<T: Scalar>(
    batch: &EmbeddingBatch<T>,
    alpha: T,
    w_i2t: &Matrix<T>,
    w_t2i: &Matrix<T>,
) -> Result<LossResult<T>> {
    let n = batch.n();
    for w in [w_i2t, w_t2i] {
        if w.shape() != (n, n) {
            return Err(Error::Shape {
                expected: format!("({n}, {n})"),
                got: format!("{:?}", w.shape()),
            });
        }
    }
    let log_alpha = alpha.ln();
    let s = similarity_matrix(batch);
    let (l1, g1) = directional(&s, |row, i, g| fixed_row(row, i, log_alpha, w_i2t.row(i), g));
    let (l2, g2) = directional(&s.transpose(), |row, i, g| {
        fixed_row(row, i, log_alpha, w_t2i.row(i), g)
    });
    finish(batch, s, l1, l2, g1, g2)
}

fn contrastive<T: Scalar>(
    batch: &EmbeddingBatch<T>,
    row_fn: impl Fn(&[T], usize, &mut [T]) -> T,
) -> Result<LossResult<T>> {
    let s = similarity_matrix(batch);
    let (l1, g1) = directional(&s, &row_fn);
    let (l2, g2) = directional(&s.transpose(), &row_fn);
    finish(batch, s, l1, l2, g1, g2)
}

fn finish<T: Scalar>(
    batch: &EmbeddingBatch<T>,
    s: Matrix<T>,
    loss_i2t: T,
    loss_t2i: T,
    g_i2t: Matrix<T>,
    g_t2i: Matrix<T>,
) -> Result<LossResult<T>> {
    let mut grad_s = g_i2t;
    grad_s
        .axpy(T::one(), &g_t2i.transpose())
        .expect("square matrices of equal size");
    let (grad_x, grad_t, grad_tau) = backprop_similarity(batch, &s, &grad_s);
    let out = LossResult {
        loss: loss_i2t + loss_t2i,
        loss_i2t,
        loss_t2i,
        grad_s,
        grad_x,
        grad_t,
        grad_tau,
    };
    if !out.loss.is_finite() || !out.grad_x.all_finite() || !out.grad_t.all_finite() || !out.grad_tau.is_finite() {
        return Err(Error::NonFinite {
            what: "contrastive loss or gradient".into(),
            iteration: None,
        });
    }
    Ok(out)
}

/// Chain rule through `S = X T^T / tau`: returns `(dX, dT, dtau)`.
pub fn backprop_similarity<T: Scalar>(
    batch: &EmbeddingBatch<T>,
    s: &Matrix<T>,
    grad_s: &Matrix<T>,
) -> (Matrix<T>, Matrix<T>, T) {
    let tau = batch.tau();
    let grad_x = grad_s.matmul(batch.t()).expect("n x n times n x d").map(|v| v / tau);
    let grad_t = grad_s.t_matmul(batch.x()).expect("n x n times n x d").map(|v| v / tau);
    let inner: T = grad_s
        .as_slice()
        .iter()
        .zip(s.as_slice())
        .map(|(&g, &v)| g * v)
        .sum();
    (grad_x, grad_t, -inner / tau)
}

/// Applies `row_fn` to every row of `a` (row `i` anchored at column `i`).
fn directional<T: Scalar>(a: &Matrix<T>, row_fn: impl Fn(&[T], usize, &mut [T]) -> T) -> (T, Matrix<T>) {
    let n = a.rows();
    let mut grad = Matrix::zeros(n, n);
    let mut loss = T::zero();
    for i in 0..n {
        loss += row_fn(a.row(i), i, grad.row_mut(i));
    }
    (loss, grad)
}

fn info_row<T: Scalar>(row: &[T], i: usize, grad: &mut [T]) -> T {
    let log_d = log_sum_exp(row.iter().copied());
    for (g, &v) in grad.iter_mut().zip(row) {
        *g = (v - log_d).exp();
    }
    grad[i] -= T::one();
    log_d - row[i]
}

fn hn_row<T: Scalar>(row: &[T], i: usize, log_alpha: T, beta: T, mode: WeightGradient, grad: &mut [T]) -> T {
    let n = row.len();
    let lse_neg = negatives_lse(row, i, beta);
    let shift = T::from_usize_lossy(n - 1).ln() - lse_neg;
    let logits: Vec<T> = row
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            if j == i {
                log_alpha + v
            } else {
                (T::one() + beta) * v + shift
            }
        })
        .collect();
    let log_d = log_sum_exp(logits.iter().copied());
    for (g, &c) in grad.iter_mut().zip(&logits) {
        *g = (c - log_d).exp();
    }
    if mode == WeightGradient::Full {
        // d/da_k of the weights couples every negative through the softmax
        // normaliser: subtract beta * q_k * (total negative responsibility).
        let r_neg: T = grad
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &r)| r)
            .sum();
        for k in (0..n).filter(|&k| k != i) {
            let q = (beta * row[k] - lse_neg).exp();
            grad[k] = (T::one() + beta) * grad[k] - beta * q * r_neg;
        }
    }
    grad[i] -= T::one();
    log_d - row[i]
}

fn fixed_row<T: Scalar>(row: &[T], i: usize, log_alpha: T, w: &[T], grad: &mut [T]) -> T {
    let logits: Vec<T> = row
        .iter()
        .zip(w)
        .enumerate()
        .map(|(j, (&v, &wj))| if j == i { log_alpha + v } else { v + wj.ln() })
        .collect();
    let log_d = log_sum_exp(logits.iter().copied());
    for (g, &c) in grad.iter_mut().zip(&logits) {
        *g = (c - log_d).exp();
    }
    grad[i] -= T::one();
    log_d - row[i]
}
