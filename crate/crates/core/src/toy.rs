//! Desk-scale contrastive trainer on planted-alignment synthetic pairs.
//!
//! Each sample draws an object concept and an attribute concept; its latent
//! is the sum of their prototypes plus noise. The image input is a random
//! linear view of the latent, the text input a view of a partially aligned
//! copy. A duplication rate re-uses the previous sample's concepts, planting
//! in-batch false negatives. Two linear encoders with unit-normalized outputs
//! and two linear concept heads on the image embedding are trained by
//! full-batch gradient descent on the per-pair mean of the chosen objective.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::concept::{topk_sparsify, PseudoLabel};
use crate::error::{invalid, Error, Result};
use crate::hnnce::{
    concept_ce_term, hn_nce_loss, info_nce_loss, ConceptHead, EmbeddingBatch, HnConfig, LogitScale, LossResult,
};
use crate::matrix::Matrix;
use crate::scalar::softmax;
use crate::synth::{gaussian_matrix, rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPairSpec {
    pub n_concepts: usize,
    pub n_attributes: usize,
    /// Latent and input dimension.
    pub input_dim: usize,
    /// Embedding dimension of both encoders.
    pub d: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub noise: f64,
    /// Share of the text latent copied from the image latent, in `[0, 1]`.
    pub alignment: f64,
    /// Probability that a sample repeats the previous sample's concepts.
    pub duplicate_rate: f64,
}

impl Default for SyntheticPairSpec {
    fn default() -> Self {
        Self {
            n_concepts: 8,
            n_attributes: 4,
            input_dim: 16,
            d: 8,
            n_train: 48,
            n_test: 48,
            noise: 0.3,
            alignment: 0.8,
            duplicate_rate: 0.1,
        }
    }
}

impl SyntheticPairSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || self.input_dim < 2 {
            return Err(invalid("embedding and input dimensions must be >= 2"));
        }
        if self.n_concepts < 2 || self.n_attributes < 2 {
            return Err(invalid("need >= 2 object and >= 2 attribute concepts"));
        }
        if self.n_train < 2 || self.n_test < 2 {
            return Err(invalid("train and test splits need >= 2 pairs"));
        }
        for (name, v) in [("alignment", self.alignment), ("duplicate_rate", self.duplicate_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} {v} outside [0, 1]")));
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(invalid(format!("noise {} must be finite and >= 0", self.noise)));
        }
        Ok(())
    }
}

/// Raw inputs for one split plus teacher pseudo-labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSplit {
    pub images: Matrix<f64>,
    pub texts: Matrix<f64>,
    pub obj_labels: Vec<Option<PseudoLabel<f64>>>,
    pub attr_labels: Vec<Option<PseudoLabel<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train: PairSplit,
    pub test: PairSplit,
}

/// Draws both splits from one seeded stream.
pub fn generate(spec: &SyntheticPairSpec, top_k: usize, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let mut r = rng(seed);
    let m = spec.input_dim;
    let obj_protos = gaussian_matrix::<f64>(&mut r, spec.n_concepts, m);
    let attr_protos = gaussian_matrix::<f64>(&mut r, spec.n_attributes, m).scale(0.5);
    let scale = 1.0 / (m as f64).sqrt();
    let img_view = gaussian_matrix::<f64>(&mut r, m, m).scale(scale);
    let txt_view = gaussian_matrix::<f64>(&mut r, m, m).scale(scale);
    let split = |n: usize, r: &mut ChaCha8Rng| -> Result<PairSplit> {
        let mut latent = Matrix::zeros(n, m);
        let mut text_latent = Matrix::zeros(n, m);
        let mut obj_labels = Vec::with_capacity(n);
        let mut attr_labels = Vec::with_capacity(n);
        let (mut c, mut a) = (0, 0);
        let keep = spec.alignment;
        let fresh = (1.0 - keep * keep).sqrt();
        for i in 0..n {
            if i == 0 || r.random::<f64>() >= spec.duplicate_rate {
                c = r.random_range(0..spec.n_concepts);
                a = r.random_range(0..spec.n_attributes);
            }
            let noise = gaussian_matrix::<f64>(r, 2, m);
            for k in 0..m {
                let u = obj_protos[(c, k)] + attr_protos[(a, k)] + spec.noise * noise[(0, k)];
                latent.row_mut(i)[k] = u;
                text_latent.row_mut(i)[k] = keep * u + fresh * spec.noise * noise[(1, k)];
            }
            let u = latent.row(i);
            obj_labels.push(Some(teacher(u, &obj_protos, top_k)?));
            attr_labels.push(Some(teacher(u, &attr_protos, top_k)?));
        }
        Ok(PairSplit {
            images: latent.matmul_t(&img_view)?,
            texts: text_latent.matmul_t(&txt_view)?,
            obj_labels,
            attr_labels,
        })
    };
    let train = split(spec.n_train, &mut r)?;
    let test = split(spec.n_test, &mut r)?;
    Ok(SyntheticData { train, test })
}

/// Top-k sparsified softmax of prototype affinities.
fn teacher(u: &[f64], protos: &Matrix<f64>, top_k: usize) -> Result<PseudoLabel<f64>> {
    let scores: Vec<f64> = protos
        .iter_rows()
        .map(|p| -p.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .collect();
    topk_sparsify(&softmax(&scores), top_k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastiveKind {
    InfoNce,
    HnNce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub spec: SyntheticPairSpec,
    pub steps: usize,
    pub lr: f64,
    pub alpha: f64,
    pub beta: f64,
    pub init_scale: f64,
    pub learn_temperature: bool,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        let cfg = HnConfig::<f64>::small_clean();
        Self {
            spec: SyntheticPairSpec::default(),
            steps: 200,
            lr: 0.02,
            alpha: cfg.alpha,
            beta: cfg.beta,
            init_scale: crate::hnnce::LOGIT_SCALE_INIT,
            learn_temperature: true,
            top_k: crate::concept::DEFAULT_TOP_K,
            seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        HnConfig::new(self.alpha, self.beta)?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid(format!("learning rate {} must be > 0", self.lr)));
        }
        if !(self.init_scale > 0.0 && self.init_scale <= crate::hnnce::LOGIT_SCALE_MAX) {
            return Err(invalid(format!(
                "initial similarity scale {} outside (0, {}]",
                self.init_scale,
                crate::hnnce::LOGIT_SCALE_MAX
            )));
        }
        if self.top_k == 0 {
            return Err(invalid("top-k needs k >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRun {
    pub name: String,
    pub kind: ContrastiveKind,
    pub with_ce: bool,
    /// Per-pair objective before each step, then after the last.
    pub losses: Vec<f64>,
    /// Similarity scale `1/tau` alongside `losses`.
    pub scales: Vec<f64>,
    pub r1_i2t: f64,
    pub r1_t2i: f64,
}

impl ToyRun {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least the initial loss")
    }
}

struct Params {
    enc_img: Matrix<f64>,
    enc_txt: Matrix<f64>,
    head_obj: Matrix<f64>,
    head_attr: Matrix<f64>,
    scale: LogitScale<f64>,
}

/// Unit-normalized `inputs W^T`, with the pre-normalization norms.
fn encode(inputs: &Matrix<f64>, w: &Matrix<f64>) -> Result<(Matrix<f64>, Vec<f64>)> {
    let mut y = inputs.matmul_t(w)?;
    let norms: Vec<f64> = y.iter_rows().map(crate::matrix::l2_norm).collect();
    y.normalize_rows();
    Ok((y, norms))
}

/// Gradient of `W` for `e = normalize(inputs W^T)` given `dL/de`.
fn encoder_grad(inputs: &Matrix<f64>, e: &Matrix<f64>, norms: &[f64], grad_e: &Matrix<f64>) -> Result<Matrix<f64>> {
    let mut grad_y = grad_e.clone();
    for i in 0..e.rows() {
        let ei = e.row(i);
        let proj: f64 = ei.iter().zip(grad_e.row(i)).map(|(a, b)| a * b).sum();
        for (g, &v) in grad_y.row_mut(i).iter_mut().zip(ei) {
            *g = (*g - v * proj) / norms[i];
        }
    }
    grad_y.t_matmul(inputs)
}

/// Trains one configuration and evaluates R@1 on the held-out split.
pub fn train(
    cfg: &ToyConfig,
    data: &SyntheticData,
    kind: ContrastiveKind,
    with_ce: bool,
) -> Result<ToyRun> {
    cfg.validate()?;
    let name = format!(
        "{}{}",
        match kind {
            ContrastiveKind::InfoNce => "infonce",
            ContrastiveKind::HnNce => "hnnce",
        },
        if with_ce { "+ce" } else { "" }
    );
    let hn = HnConfig::new(cfg.alpha, cfg.beta)?;
    let spec = &cfg.spec;
    // parameters are seeded separately from the data
    let mut r = rng(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let init = 1.0 / (spec.input_dim as f64).sqrt();
    let mut p = Params {
        enc_img: gaussian_matrix(&mut r, spec.d, spec.input_dim).scale(init),
        enc_txt: gaussian_matrix(&mut r, spec.d, spec.input_dim).scale(init),
        head_obj: Matrix::zeros(spec.n_concepts, spec.d),
        head_attr: Matrix::zeros(spec.n_attributes, spec.d),
        scale: LogitScale::from_scale(cfg.init_scale),
    };
    let train = &data.train;
    let inv_n = 1.0 / spec.n_train as f64;
    let mut losses = Vec::with_capacity(cfg.steps + 1);
    let mut scales = Vec::with_capacity(cfg.steps + 1);
    for step in 0..=cfg.steps {
        let (x, x_norms) = encode(&train.images, &p.enc_img)?;
        let (t, t_norms) = encode(&train.texts, &p.enc_txt)?;
        let batch = EmbeddingBatch::new(x.clone(), t.clone(), p.scale.tau()).map_err(|e| diverged(&name, step, e))?;
        let contrastive: LossResult<f64> = match kind {
            ContrastiveKind::InfoNce => info_nce_loss(&batch),
            ContrastiveKind::HnNce => hn_nce_loss(&batch, &hn),
        }
        .map_err(|e| diverged(&name, step, e))?;
        let mut loss = contrastive.loss;
        let mut grad_x = contrastive.grad_x;
        let grad_t = contrastive.grad_t;
        let mut grads_heads = None;
        if with_ce {
            let obj_logits = x.matmul_t(&p.head_obj)?;
            let attr_logits = x.matmul_t(&p.head_attr)?;
            let (lo, go) = concept_ce_term(
                spec.n_train,
                ConceptHead { logits: &obj_logits, labels: &train.obj_labels },
            )?;
            let (la, ga) = concept_ce_term(
                spec.n_train,
                ConceptHead { logits: &attr_logits, labels: &train.attr_labels },
            )?;
            loss += lo + la;
            grad_x.axpy(1.0, &go.matmul(&p.head_obj)?)?;
            grad_x.axpy(1.0, &ga.matmul(&p.head_attr)?)?;
            grads_heads = Some((go.t_matmul(&x)?, ga.t_matmul(&x)?));
        }
        let loss = loss * inv_n;
        if !loss.is_finite() {
            return Err(diverged(&name, step, Error::NonFinite { what: "loss".into(), iteration: Some(step) }));
        }
        losses.push(loss);
        scales.push(p.scale.scale());
        if step == cfg.steps {
            break;
        }
        let g_img = encoder_grad(&train.images, &x, &x_norms, &grad_x)?;
        let g_txt = encoder_grad(&train.texts, &t, &t_norms, &grad_t)?;
        let lr = cfg.lr;
        p.enc_img.axpy(-lr * inv_n, &g_img)?;
        p.enc_txt.axpy(-lr * inv_n, &g_txt)?;
        if let Some((go, ga)) = grads_heads {
            p.head_obj.axpy(-lr * inv_n, &go)?;
            p.head_attr.axpy(-lr * inv_n, &ga)?;
        }
        if cfg.learn_temperature {
            p.scale.step(lr, contrastive.grad_tau * inv_n);
        }
    }
    let (x, _) = encode(&data.test.images, &p.enc_img)?;
    let (t, _) = encode(&data.test.texts, &p.enc_txt)?;
    let sims = x.matmul_t(&t)?;
    Ok(ToyRun {
        name,
        kind,
        with_ce,
        losses,
        scales,
        r1_i2t: recall_at_1(&sims),
        r1_t2i: recall_at_1(&sims.transpose()),
    })
}

fn diverged(name: &str, step: usize, err: Error) -> Error {
    invalid(format!("configuration {name} diverged at step {step}: {err}"))
}

/// Fraction of rows whose largest entry is on the diagonal (ties count as misses).
pub fn recall_at_1(sims: &Matrix<f64>) -> f64 {
    let hits = sims
        .iter_rows()
        .enumerate()
        .filter(|(i, row)| row.iter().enumerate().all(|(j, &v)| j == *i || v < row[*i]))
        .count();
    hits as f64 / sims.rows() as f64
}

/// The four {InfoNCE, HN-NCE} x {without, with CE} runs on shared data.
pub fn train_all(cfg: &ToyConfig) -> Result<Vec<ToyRun>> {
    cfg.validate()?;
    let data = generate(&cfg.spec, cfg.top_k, cfg.seed)?;
    let mut runs = Vec::with_capacity(4);
    for kind in [ContrastiveKind::InfoNce, ContrastiveKind::HnNce] {
        for with_ce in [false, true] {
            runs.push(train(cfg, &data, kind, with_ce)?);
        }
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recall_counts_strict_diagonal_maxima() {
        let s = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(recall_at_1(&s), 0.5);
    }

    #[test]
    fn spec_validation() {
        let bad = SyntheticPairSpec { duplicate_rate: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SyntheticPairSpec { d: 1, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn encoder_gradient_matches_finite_differences() {
        let mut r = rng(4);
        let inputs = gaussian_matrix::<f64>(&mut r, 3, 4);
        let w = gaussian_matrix::<f64>(&mut r, 2, 4);
        let probe = gaussian_matrix::<f64>(&mut r, 3, 2);
        let f = |w: &Matrix<f64>| {
            let (e, _) = encode(&inputs, w).unwrap();
            e.as_slice().iter().zip(probe.as_slice()).map(|(a, b)| a * b).sum::<f64>()
        };
        let (e, norms) = encode(&inputs, &w).unwrap();
        let g = encoder_grad(&inputs, &e, &norms, &probe).unwrap();
        let h = 1e-6;
        for k in 0..w.as_slice().len() {
            let mut up = w.clone();
            up.as_mut_slice()[k] += h;
            let mut down = w.clone();
            down.as_mut_slice()[k] -= h;
            let num = (f(&up) - f(&down)) / (2.0 * h);
            assert!((num - g.as_slice()[k]).abs() < 1e-8, "{k}: {num} vs {}", g.as_slice()[k]);
        }
    }
}
