//! Central finite-difference checks of the analytic gradients.
//!
//! Numerical derivatives are taken of straightforward double-loop
//! reference losses, not of the log-space implementation being checked.
//! Under the detached weight mode the reference keeps the hard-negative
//! weights frozen at the unperturbed batch.

use std::fmt;

use crate::concept::{ce_pseudo_loss, topk_sparsify, PseudoLabel};
use crate::error::Result;
use crate::hnnce::{hn_nce_loss, hn_weights, similarity_matrix, EmbeddingBatch, HnConfig, LossResult, WeightGradient};
use crate::matrix::Matrix;
use crate::scalar::softmax;
use crate::synth;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-5;
/// Denominator floor of the relative error, as a fraction of the block's
/// largest gradient entry (at least 1). Finite differences at step 1e-5 carry
/// absolute rounding noise of roughly 1e-11 times the gradient scale, so
/// entries far below this floor carry no relative information.
pub const REL_FLOOR: f64 = 1e-4;
pub const ALPHA_GRID: [f64; 3] = [1.0, 0.999, 0.9];
pub const BETA_GRID: [f64; 3] = [0.0, 0.25, 0.5];

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Fourth-order central differences of `f` at `params`, one coordinate at a
/// time: `(-f(+2h) + 8 f(+h) - 8 f(-h) + f(-2h)) / 12h`.
///
/// The two-point rule's `h^2 f'''/6` term grows like `tau^-3` and swamps
/// near-cancelling temperature gradients at small tau.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, params: &[f64], step: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|k| {
            let orig = p[k];
            let mut at = |offset: f64| {
                p[k] = orig + offset;
                f(&p)
            };
            let (p1, m1, p2, m2) = (at(step), at(-step), at(2.0 * step), at(-2.0 * step));
            p[k] = orig;
            (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * step)
        })
        .collect()
}

/// Hard-negative loss from its defining sums with plain `exp`/`ln`.
/// `frozen` supplies `(w_i2t, w_t2i)`; otherwise they are recomputed.
pub fn reference_hn_nce(
    x: &Matrix<f64>,
    t: &Matrix<f64>,
    tau: f64,
    alpha: f64,
    beta: f64,
    frozen: Option<(&Matrix<f64>, &Matrix<f64>)>,
) -> f64 {
    let n = x.rows();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..x.cols() {
                acc += x[(i, k)] * t[(j, k)];
            }
            s[i][j] = acc / tau;
        }
    }
    let weight = |i: usize, j: usize, image_anchor: bool| -> f64 {
        if let Some((w1, w2)) = frozen {
            return if image_anchor { w1[(i, j)] } else { w2[(i, j)] };
        }
        let sim = |a: usize, b: usize| if image_anchor { s[a][b] } else { s[b][a] };
        let norm: f64 = (0..n).filter(|&k| k != i).map(|k| (beta * sim(i, k)).exp()).sum();
        (n as f64 - 1.0) * (beta * sim(i, j)).exp() / norm
    };
    let mut loss = 0.0;
    for i in 0..n {
        let pos = s[i][i].exp();
        let mut d1 = alpha * pos;
        let mut d2 = alpha * pos;
        for j in (0..n).filter(|&j| j != i) {
            d1 += s[i][j].exp() * weight(i, j, true);
            d2 += s[j][i].exp() * weight(i, j, false);
        }
        loss -= (pos / d1).ln() + (pos / d2).ln();
    }
    loss
}

/// `-sum_j q_j log softmax(z)_j` via an explicit softmax.
pub fn reference_ce(logits: &[f64], label: &PseudoLabel<f64>) -> f64 {
    let p = softmax(logits);
    label.entries().iter().map(|&(j, q)| -q * p[j].ln()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    X,
    T,
    Tau,
    CeLogits,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Block::X => "X",
            Block::T => "T",
            Block::Tau => "tau",
            Block::CeLogits => "ce_logits",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub block: Block,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub mode: WeightGradient,
    pub rows: Vec<CheckRow>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.rows.iter().map(|r| r.max_rel_err).fold(0.0, f64::max)
    }

    pub fn to_tsv(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
        let mut out = String::from("alpha\tbeta\tblock\tmax_rel_err\tresult\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.3e}\t{}\n",
                fmt_opt(r.alpha),
                fmt_opt(r.beta),
                r.block,
                r.max_rel_err,
                if r.pass { "PASS" } else { "FAIL" }
            ));
        }
        out
    }
}

/// Produces the analytic loss and gradients under test.
pub type AnalyticFn<'a> = dyn Fn(&EmbeddingBatch<f64>, &HnConfig<f64>) -> Result<LossResult<f64>> + 'a;

fn compare(alpha: Option<f64>, beta: Option<f64>, block: Block, analytic: &[f64], numeric: &[f64], tol: f64) -> CheckRow {
    let scale = numeric.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let floor = REL_FLOOR * scale;
    let (worst_index, max_rel_err) = analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_error(a, n, floor))
        .enumerate()
        .fold((0, 0.0), |(bi, be), (i, e)| if e > be || e.is_nan() { (i, e) } else { (bi, be) });
    CheckRow {
        alpha,
        beta,
        block,
        max_rel_err,
        worst_index,
        pass: max_rel_err < tol,
    }
}

/// Checks `dL/dX`, `dL/dT` and `dL/dtau` for one configuration.
pub fn check_hn_nce_with(
    batch: &EmbeddingBatch<f64>,
    cfg: &HnConfig<f64>,
    step: f64,
    tol: f64,
    analytic: &AnalyticFn<'_>,
) -> Result<Vec<CheckRow>> {
    let res = analytic(batch, cfg)?;
    let frozen = match cfg.weight_gradient {
        WeightGradient::Detached => Some(hn_weights(&similarity_matrix(batch), cfg.beta)),
        WeightGradient::Full => None,
    };
    let frozen_ref = frozen.as_ref().map(|(a, b)| (a, b));
    let (n, d) = (batch.n(), batch.dim());
    let (x, t, tau) = (batch.x(), batch.t(), batch.tau());
    let as_matrix = |p: &[f64]| Matrix::from_vec(n, d, p.to_vec()).expect("shape");

    let num_x = central_difference(
        |p| reference_hn_nce(&as_matrix(p), t, tau, cfg.alpha, cfg.beta, frozen_ref),
        x.as_slice(),
        step,
    );
    let num_t = central_difference(
        |p| reference_hn_nce(x, &as_matrix(p), tau, cfg.alpha, cfg.beta, frozen_ref),
        t.as_slice(),
        step,
    );
    let num_tau = central_difference(|p| reference_hn_nce(x, t, p[0], cfg.alpha, cfg.beta, frozen_ref), &[tau], step);
    let (a, b) = (Some(cfg.alpha), Some(cfg.beta));
    Ok(vec![
        compare(a, b, Block::X, res.grad_x.as_slice(), &num_x, tol),
        compare(a, b, Block::T, res.grad_t.as_slice(), &num_t, tol),
        compare(a, b, Block::Tau, &[res.grad_tau], &num_tau, tol),
    ])
}

pub fn check_hn_nce(batch: &EmbeddingBatch<f64>, cfg: &HnConfig<f64>, step: f64, tol: f64) -> Result<Vec<CheckRow>> {
    check_hn_nce_with(batch, cfg, step, tol, &hn_nce_loss)
}

/// Checks the pseudo-label cross-entropy gradient wrt the logits.
pub fn check_ce(logits: &[f64], label: &PseudoLabel<f64>, step: f64, tol: f64) -> Result<CheckRow> {
    let (_, grad) = ce_pseudo_loss(logits, label)?;
    let numeric = central_difference(|z| reference_ce(z, label), logits, step);
    Ok(compare(None, None, Block::CeLogits, &grad, &numeric, tol))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub d: usize,
    pub tau: f64,
    pub vocab: usize,
    pub top_k: usize,
    pub step: f64,
    pub tol: f64,
    pub mode: WeightGradient,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 6,
            d: 5,
            tau: 0.07,
            vocab: 12,
            top_k: 4,
            step: FD_STEP,
            tol: REL_TOL,
            mode: WeightGradient::Detached,
        }
    }
}

/// Runs every (alpha, beta) cell of the grid on one seeded batch, plus the
/// cross-entropy check on seeded logits and a top-k label.
pub fn run_grid_with(seed: u64, spec: &GridSpec, analytic: &AnalyticFn<'_>) -> Result<GradcheckReport> {
    let mut rng = synth::rng(seed);
    let batch = synth::correlated_batch(&mut rng, spec.n, spec.d, 0.5, spec.tau)?;
    run_grid_on(&batch, &mut rng, spec, analytic)
}

/// Grid on a given batch; `rng` draws the cross-entropy logits.
pub fn run_grid_on(
    batch: &EmbeddingBatch<f64>,
    rng: &mut rand_chacha::ChaCha8Rng,
    spec: &GridSpec,
    analytic: &AnalyticFn<'_>,
) -> Result<GradcheckReport> {
    let mut rows = Vec::new();
    for &alpha in &ALPHA_GRID {
        for &beta in &BETA_GRID {
            let cfg = HnConfig::new(alpha, beta)?.with_weight_gradient(spec.mode);
            rows.extend(check_hn_nce_with(batch, &cfg, spec.step, spec.tol, analytic)?);
        }
    }
    let logits = synth::gaussian_matrix::<f64>(rng, 2, spec.vocab);
    let label = topk_sparsify(&softmax(logits.row(1)), spec.top_k)?;
    rows.push(check_ce(logits.row(0), &label, spec.step, spec.tol)?);
    Ok(GradcheckReport { mode: spec.mode, rows })
}

pub fn run_grid(seed: u64, spec: &GridSpec) -> Result<GradcheckReport> {
    run_grid_with(seed, spec, &hn_nce_loss)
}
