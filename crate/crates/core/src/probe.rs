//! Prompt-initialized linear probe trained by projected gradient descent.
//!
//! Logits are `x^T (W0 + W) + b`, where `W0` holds the class-prompt
//! embeddings as columns. Only the offset `W` and the bias `b` are learned,
//! inside a Frobenius ball of radius `delta` and a Euclidean ball of radius
//! `delta_b`.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::{l2_norm, Matrix};
use crate::scalar::{log_sum_exp, softmax, Scalar};
use crate::synth;

/// Scales `m` onto the Frobenius ball of the given radius if it lies outside.
pub fn project_l2<T: Scalar>(m: &Matrix<T>, radius: T) -> Result<Matrix<T>> {
    check_radius(radius)?;
    let norm = m.frobenius_norm();
    if norm <= radius {
        return Ok(m.clone());
    }
    if radius == T::zero() {
        return Ok(Matrix::zeros(m.rows(), m.cols()));
    }
    Ok(m.scale(radius / norm))
}

/// Vector form of [`project_l2`].
pub fn project_l2_vec<T: Scalar>(v: &[T], radius: T) -> Result<Vec<T>> {
    check_radius(radius)?;
    let norm = l2_norm(v);
    if norm <= radius {
        return Ok(v.to_vec());
    }
    if radius == T::zero() {
        return Ok(vec![T::zero(); v.len()]);
    }
    Ok(v.iter().map(|&x| x * (radius / norm)).collect())
}

fn check_radius<T: Scalar>(radius: T) -> Result<()> {
    if !(radius >= T::zero()) || radius.is_nan() {
        return Err(invalid(format!("projection radius {radius} must be >= 0")));
    }
    Ok(())
}

/// `W0 = P^T` for class prompts `P` (one unit-norm row per class).
pub fn zero_shot_init<T: Scalar>(prompts: &Matrix<T>) -> Matrix<T> {
    prompts.transpose()
}

/// Row-wise argmax, ties to the lower class.
pub fn predict<T: Scalar>(logits: &Matrix<T>) -> Vec<usize> {
    logits
        .iter_rows()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeProblem<T> {
    features: Matrix<T>,
    labels: Vec<usize>,
    w0: Matrix<T>,
    delta: T,
    delta_b: T,
}

impl<T: Scalar> ProbeProblem<T> {
    pub fn new(features: Matrix<T>, labels: Vec<usize>, w0: Matrix<T>, delta: T, delta_b: T) -> Result<Self> {
        if features.rows() == 0 {
            return Err(invalid("probe needs at least one training example"));
        }
        if features.rows() != labels.len() {
            return Err(Error::Shape {
                expected: format!("{} labels", features.rows()),
                got: format!("{} labels", labels.len()),
            });
        }
        if w0.rows() != features.cols() {
            return Err(Error::Shape {
                expected: format!("W0 with {} rows", features.cols()),
                got: format!("{:?}", w0.shape()),
            });
        }
        if w0.cols() < 2 {
            return Err(invalid(format!("probe needs >= 2 classes, got {}", w0.cols())));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= w0.cols()) {
            return Err(invalid(format!("label {y} outside {} classes", w0.cols())));
        }
        check_radius(delta)?;
        check_radius(delta_b)?;
        if !features.all_finite() || !w0.all_finite() {
            return Err(Error::NonFinite {
                what: "probe features or initialization".into(),
                iteration: None,
            });
        }
        Ok(Self {
            features,
            labels,
            w0,
            delta,
            delta_b,
        })
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn w0(&self) -> &Matrix<T> {
        &self.w0
    }

    pub fn n_classes(&self) -> usize {
        self.w0.cols()
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn delta_b(&self) -> T {
        self.delta_b
    }

    pub fn with_radii(&self, delta: T, delta_b: T) -> Result<Self> {
        check_radius(delta)?;
        check_radius(delta_b)?;
        Ok(Self {
            delta,
            delta_b,
            ..self.clone()
        })
    }

    /// `X (W0 + W) + b` for arbitrary features.
    pub fn logits_for(&self, features: &Matrix<T>, w: &Matrix<T>, b: &[T]) -> Result<Matrix<T>> {
        let mut full = self.w0.clone();
        full.axpy(T::one(), w)?;
        let mut z = features.matmul(&full)?;
        for i in 0..z.rows() {
            for (v, &bj) in z.row_mut(i).iter_mut().zip(b) {
                *v += bj;
            }
        }
        Ok(z)
    }

    pub fn logits(&self, w: &Matrix<T>, b: &[T]) -> Result<Matrix<T>> {
        self.logits_for(&self.features, w, b)
    }

    /// Mean cross-entropy over `rows` (all rows if `None`) and its gradients
    /// with respect to `W` and `b`.
    pub fn loss_and_grad(&self, w: &Matrix<T>, b: &[T], rows: Option<&[usize]>) -> Result<(T, Matrix<T>, Vec<T>)> {
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..self.labels.len()).collect();
                &all
            }
        };
        let (d, c) = self.w0.shape();
        let mut full = self.w0.clone();
        full.axpy(T::one(), w)?;
        let mut gw = Matrix::zeros(d, c);
        let mut gb = vec![T::zero(); c];
        let mut loss = T::zero();
        let inv = T::one() / T::from_usize_lossy(rows.len());
        let mut z = vec![T::zero(); c];
        for &i in rows {
            let x = self.features.row(i);
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = b[j] + (0..d).map(|k| x[k] * full[(k, j)]).sum::<T>();
            }
            let y = self.labels[i];
            loss += log_sum_exp(z.iter().copied()) - z[y];
            let mut p = softmax(&z);
            p[y] -= T::one();
            for k in 0..d {
                let row = gw.row_mut(k);
                for j in 0..c {
                    row[j] += x[k] * p[j] * inv;
                }
            }
            for j in 0..c {
                gb[j] += p[j] * inv;
            }
        }
        Ok((loss * inv, gw, gb))
    }

    pub fn loss(&self, w: &Matrix<T>, b: &[T]) -> Result<T> {
        Ok(self.loss_and_grad(w, b, None)?.0)
    }

    /// Upper bound on the gradient's Lipschitz constant of the full-batch loss:
    /// the softmax cross-entropy Hessian in the logits is at most 1/2, and
    /// the affine map contributes `mean(|x|^2 + 1)`.
    pub fn lipschitz_bound(&self) -> T {
        let n = T::from_usize_lossy(self.labels.len());
        let total: T = self
            .features
            .iter_rows()
            .map(|x| x.iter().map(|&v| v * v).sum::<T>() + T::one())
            .sum();
        T::lit(0.5) * total / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub step: f64,
    pub iterations: usize,
    /// Mini-batch size; `None` uses the full batch.
    pub batch_size: Option<usize>,
    /// Cosine-anneal the step to zero over the run.
    pub cosine_decay: bool,
    pub seed: u64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            step: 0.1,
            iterations: 500,
            batch_size: None,
            cosine_decay: false,
            seed: 0,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid(format!("step size {} must be > 0", self.step)));
        }
        if self.batch_size == Some(0) {
            return Err(invalid("batch size must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint<T> {
    pub iteration: usize,
    /// Full-batch training loss at this iterate.
    pub loss: T,
    pub w_norm: T,
    pub b_norm: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSolution<T> {
    pub w: Matrix<T>,
    pub b: Vec<T>,
    /// Iterate 0 (the zero-shot point) through the final iterate.
    pub trajectory: Vec<TrajectoryPoint<T>>,
}

impl<T: Scalar> ProbeSolution<T> {
    pub fn final_loss(&self) -> T {
        self.trajectory.last().expect("trajectory holds iterate 0").loss
    }

    pub fn trajectory_tsv(&self) -> String {
        let mut out = String::from("iteration\tloss\tw_norm\tb_norm\n");
        for p in &self.trajectory {
            out.push_str(&format!("{}\t{:.12e}\t{:.12e}\t{:.12e}\n", p.iteration, p.loss.as_f64(), p.w_norm.as_f64(), p.b_norm.as_f64()));
        }
        out
    }
}

/// Projected gradient descent from `W = 0, b = 0`.
pub fn pgd_fit<T: Scalar>(problem: &ProbeProblem<T>, cfg: &PgdConfig) -> Result<ProbeSolution<T>> {
    cfg.validate()?;
    let (d, c) = problem.w0.shape();
    let n = problem.labels.len();
    let mut w = Matrix::zeros(d, c);
    let mut b = vec![T::zero(); c];
    let mut rng = synth::rng(cfg.seed);
    let mut trajectory = Vec::with_capacity(cfg.iterations + 1);
    let record = |k: usize, loss: T, w: &Matrix<T>, b: &[T]| -> Result<TrajectoryPoint<T>> {
        if !loss.is_finite() || !w.all_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("probe iterate (loss {loss})"),
                iteration: Some(k),
            });
        }
        Ok(TrajectoryPoint {
            iteration: k,
            loss,
            w_norm: w.frobenius_norm(),
            b_norm: l2_norm(b),
        })
    };
    let (mut loss, mut gw, mut gb) = problem.loss_and_grad(&w, &b, None)?;
    trajectory.push(record(0, loss, &w, &b)?);
    for k in 0..cfg.iterations {
        let mut eta = cfg.step;
        if cfg.cosine_decay {
            let frac = k as f64 / cfg.iterations as f64;
            eta *= 0.5 * (1.0 + (std::f64::consts::PI * frac).cos());
        }
        let eta = T::lit(eta);
        if let Some(bs) = cfg.batch_size.filter(|&bs| bs < n) {
            let rows = sample(&mut rng, n, bs).into_vec();
            let (_, g, h) = problem.loss_and_grad(&w, &b, Some(&rows))?;
            gw = g;
            gb = h;
        }
        w.axpy(-eta, &gw)?;
        w = project_l2(&w, problem.delta)?;
        for (bj, &g) in b.iter_mut().zip(&gb) {
            *bj -= eta * g;
        }
        b = project_l2_vec(&b, problem.delta_b)?;
        (loss, gw, gb) = problem.loss_and_grad(&w, &b, None)?;
        trajectory.push(record(k + 1, loss, &w, &b)?);
    }
    Ok(ProbeSolution { w, b, trajectory })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub delta: f64,
    pub delta_b: f64,
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub eval_accuracy: Option<f64>,
}

/// Fits every `(delta, delta_b)` pair in parallel; results keep input order.
pub fn grid_search<T: Scalar>(
    problem: &ProbeProblem<T>,
    radii: &[(T, T)],
    cfg: &PgdConfig,
    eval: Option<(&Matrix<T>, &[usize])>,
) -> Result<Vec<GridPoint>> {
    radii
        .par_iter()
        .map(|&(delta, delta_b)| {
            let p = problem.with_radii(delta, delta_b)?;
            let sol = pgd_fit(&p, cfg)?;
            let train = accuracy(&predict(&p.logits(&sol.w, &sol.b)?), p.labels());
            let eval_accuracy = match eval {
                Some((x, y)) => Some(accuracy(&predict(&p.logits_for(x, &sol.w, &sol.b)?), y)),
                None => None,
            };
            Ok(GridPoint {
                delta: delta.as_f64(),
                delta_b: delta_b.as_f64(),
                final_loss: sol.final_loss().as_f64(),
                train_accuracy: train,
                eval_accuracy,
            })
        })
        .collect()
}

/// Seeded split taking `k` examples per class for training (fewer if a class
/// is smaller) and the rest for evaluation. Both index lists are sorted.
pub fn k_shot_split(labels: &[usize], k: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = synth::rng(seed);
    let mut train = Vec::new();
    for c in 0..classes {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let take = k.min(members.len());
        train.extend(sample(&mut rng, members.len(), take).into_iter().map(|j| members[j]));
    }
    train.sort_unstable();
    let test = (0..labels.len()).filter(|i| train.binary_search(i).is_err()).collect();
    (train, test)
}

/// Rows of `m` at `idx`.
pub fn select_rows<T: Scalar>(m: &Matrix<T>, idx: &[usize]) -> Matrix<T> {
    let rows: Vec<&[T]> = idx.iter().map(|&i| m.row(i)).collect();
    if rows.is_empty() {
        return Matrix::zeros(0, m.cols());
    }
    Matrix::from_rows(&rows).expect("rows share a width")
}
