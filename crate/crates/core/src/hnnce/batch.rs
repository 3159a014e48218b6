use crate::error::{invalid, Error, Result};
use crate::matrix::{l2_norm, Matrix};
use crate::scalar::Scalar;

/// Initial similarity scale `1/tau`.
pub const LOGIT_SCALE_INIT: f64 = 1.0 / 0.07;
/// Upper bound on the similarity scale `1/tau`.
pub const LOGIT_SCALE_MAX: f64 = 100.0;
/// Smallest admissible temperature, `1 / LOGIT_SCALE_MAX`.
pub const MIN_TAU: f64 = 1.0 / LOGIT_SCALE_MAX;

const UNIT_NORM_TOL: f64 = 1e-6;

/// Paired image (`x`) and text (`t`) embeddings with a temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch<T> {
    x: Matrix<T>,
    t: Matrix<T>,
    tau: T,
}

impl<T: Scalar> EmbeddingBatch<T> {
    /// Requires unit-norm rows (tolerance 1e-6).
    pub fn new(x: Matrix<T>, t: Matrix<T>, tau: T) -> Result<Self> {
        let batch = Self::unnormalized(x, t, tau)?;
        for (side, m) in [("image", &batch.x), ("text", &batch.t)] {
            for (i, row) in m.iter_rows().enumerate() {
                let n = l2_norm(row).as_f64();
                if (n - 1.0).abs() > UNIT_NORM_TOL {
                    return Err(invalid(format!("{side} row {i} has norm {n}, expected 1")));
                }
            }
        }
        Ok(batch)
    }

    /// Same checks as [`EmbeddingBatch::new`] except row norms; used where
    /// embeddings are perturbed off the sphere (finite differences).
    pub fn unnormalized(x: Matrix<T>, t: Matrix<T>, tau: T) -> Result<Self> {
        if x.shape() != t.shape() {
            return Err(Error::Shape {
                expected: format!("{:?}", x.shape()),
                got: format!("{:?}", t.shape()),
            });
        }
        if x.rows() < 2 {
            return Err(invalid(format!(
                "batch of {} pairs has no negatives; need n >= 2",
                x.rows()
            )));
        }
        check_tau(tau)?;
        if !x.all_finite() || !t.all_finite() {
            return Err(Error::NonFinite {
                what: "embeddings".into(),
                iteration: None,
            });
        }
        Ok(Self { x, t, tau })
    }

    /// Normalizes rows of both sides, then builds the batch.
    pub fn from_raw(mut x: Matrix<T>, mut t: Matrix<T>, tau: T) -> Result<Self> {
        x.normalize_rows();
        t.normalize_rows();
        Self::new(x, t, tau)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn t(&self) -> &Matrix<T> {
        &self.t
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn with_tau(&self, tau: T) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self { tau, ..self.clone() })
    }

    /// Image and text sides exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.t.clone(),
            t: self.x.clone(),
            tau: self.tau,
        }
    }

    pub fn x_mut(&mut self) -> &mut Matrix<T> {
        &mut self.x
    }

    pub fn t_mut(&mut self) -> &mut Matrix<T> {
        &mut self.t
    }

    /// Sets tau without the lower bound; finite-difference probes step around it.
    pub fn set_tau_unchecked(&mut self, tau: T) {
        self.tau = tau;
    }
}

fn check_tau<T: Scalar>(tau: T) -> Result<()> {
    // scale = 1/tau may not exceed the cap; allow rounding of 1/100.
    let min = T::lit(MIN_TAU) * (T::one() - T::lit(1e-12));
    if !(tau.is_finite() && tau >= min) {
        return Err(invalid(format!(
            "temperature {tau} outside [{MIN_TAU}, inf): similarity scale would exceed {LOGIT_SCALE_MAX}"
        )));
    }
    Ok(())
}

/// Learnable temperature stored as `log(1/tau)` and capped at `log(100)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitScale<T> {
    log_scale: T,
}

impl<T: Scalar> Default for LogitScale<T> {
    fn default() -> Self {
        Self::from_scale(T::lit(LOGIT_SCALE_INIT))
    }
}

impl<T: Scalar> LogitScale<T> {
    pub fn from_scale(scale: T) -> Self {
        let mut s = Self {
            log_scale: scale.ln(),
        };
        s.clamp();
        s
    }

    fn clamp(&mut self) {
        let cap = T::lit(LOGIT_SCALE_MAX).ln();
        if self.log_scale > cap {
            self.log_scale = cap;
        }
    }

    pub fn log_scale(&self) -> T {
        self.log_scale
    }

    pub fn scale(&self) -> T {
        self.log_scale.exp().min(T::lit(LOGIT_SCALE_MAX))
    }

    pub fn tau(&self) -> T {
        T::one() / self.scale()
    }

    /// Chain rule from `dL/dtau` to `dL/dlog_scale` (`tau = e^{-log_scale}`).
    pub fn grad_log_scale(&self, grad_tau: T) -> T {
        -grad_tau * self.tau()
    }

    /// Gradient step on the log-scale followed by the cap.
    pub fn step(&mut self, lr: T, grad_tau: T) {
        self.log_scale -= lr * self.grad_log_scale(grad_tau);
        self.clamp();
    }
}
