//! Independent reference computations for the numerical tests: direct
//! double-loop formulas on nested vectors, with no log-space tricks.
#![allow(dead_code)]

pub type Rows = Vec<Vec<f64>>;

pub fn rows_of(m: &catkit::Matrix<f64>) -> Rows {
    m.iter_rows().map(|r| r.to_vec()).collect()
}

pub fn similarity(x: &Rows, t: &Rows, tau: f64) -> Rows {
    x.iter()
        .map(|xi| t.iter().map(|tj| xi.iter().zip(tj).map(|(a, b)| a * b).sum::<f64>() / tau).collect())
        .collect()
}

/// `(w_i2t, w_t2i)` straight from the definitions.
pub fn weights(s: &Rows, beta: f64) -> (Rows, Rows) {
    let n = s.len();
    let mut w1 = vec![vec![0.0; n]; n];
    let mut w2 = vec![vec![0.0; n]; n];
    for i in 0..n {
        let z1: f64 = (0..n).filter(|&k| k != i).map(|k| (beta * s[i][k]).exp()).sum();
        let z2: f64 = (0..n).filter(|&k| k != i).map(|k| (beta * s[k][i]).exp()).sum();
        for j in (0..n).filter(|&j| j != i) {
            w1[i][j] = (n as f64 - 1.0) * (beta * s[i][j]).exp() / z1;
            w2[i][j] = (n as f64 - 1.0) * (beta * s[j][i]).exp() / z2;
        }
    }
    (w1, w2)
}

pub fn hn_nce(x: &Rows, t: &Rows, tau: f64, alpha: f64, beta: f64, frozen: Option<&(Rows, Rows)>) -> f64 {
    let s = similarity(x, t, tau);
    let owned;
    let (w1, w2) = match frozen {
        Some(w) => (&w.0, &w.1),
        None => {
            owned = weights(&s, beta);
            (&owned.0, &owned.1)
        }
    };
    let n = s.len();
    let mut loss = 0.0;
    for i in 0..n {
        let pos = s[i][i].exp();
        let mut d1 = alpha * pos;
        let mut d2 = alpha * pos;
        for j in (0..n).filter(|&j| j != i) {
            d1 += s[i][j].exp() * w1[i][j];
            d2 += s[j][i].exp() * w2[i][j];
        }
        loss += -(pos / d1).ln() - (pos / d2).ln();
    }
    loss
}

pub fn info_nce(x: &Rows, t: &Rows, tau: f64) -> f64 {
    let s = similarity(x, t, tau);
    let n = s.len();
    let mut loss = 0.0;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| s[i][j].exp()).sum();
        let col: f64 = (0..n).map(|j| s[j][i].exp()).sum();
        loss += -(s[i][i].exp() / row).ln() - (s[i][i].exp() / col).ln();
    }
    loss
}

/// `-sum_j q_j log softmax(z)_j`.
pub fn cross_entropy(z: &[f64], q: &[(usize, f64)]) -> f64 {
    let norm: f64 = z.iter().map(|v| v.exp()).sum();
    q.iter().map(|&(j, p)| -p * (z[j].exp() / norm).ln()).sum()
}

/// Fourth-order central differences.
pub fn fd(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    (0..at.len())
        .map(|k| {
            let eval = |o: f64| {
                let mut p = at.to_vec();
                p[k] += o;
                f(&p)
            };
            (8.0 * (eval(h) - eval(-h)) - (eval(2.0 * h) - eval(-2.0 * h))) / (12.0 * h)
        })
        .collect()
}

/// Largest elementwise `|a - n| / max(|a|, |n|, 1e-4 * max(1, max|n|))`.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let floor = 1e-4 * numeric.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn flatten(r: &Rows) -> Vec<f64> {
    r.iter().flatten().copied().collect()
}

pub fn unflatten(v: &[f64], cols: usize) -> Rows {
    v.chunks(cols).map(|c| c.to_vec()).collect()
}

/// n = 4 batch at tau = 1 whose similarity rows and columns are cyclic
/// shifts of (0.7, 0.4, 0.3, 0.2): the hardest negative leads the next by
/// 0.1, which leads the last by another 0.1. Text rows are basis vectors
/// in 5 dimensions; image rows carry the similarities plus a fifth
/// coordinate completing the unit norm.
pub fn margin_fixture() -> (Rows, Rows) {
    let c = [0.7, 0.4, 0.3, 0.2];
    let rest = (1.0 - c.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let x = (0..4)
        .map(|i| {
            let mut row: Vec<f64> = (0..4).map(|j| c[(j + 4 - i) % 4]).collect();
            row.push(rest);
            row
        })
        .collect();
    let t = (0..4)
        .map(|j| (0..5).map(|k| if k == j { 1.0 } else { 0.0 }).collect())
        .collect();
    (x, t)
}

pub fn to_matrix(r: &Rows) -> catkit::Matrix<f64> {
    catkit::Matrix::from_rows(r).unwrap()
}

/// Worst relative error of the HN-NCE gradients (X, T, tau) against
/// differences of the double-loop loss. Detached mode freezes the weights
/// at the given batch.
pub fn hn_grad_err(b: &catkit::hnnce::EmbeddingBatch<f64>, cfg: &catkit::hnnce::HnConfig<f64>) -> f64 {
    use catkit::hnnce::{hn_nce_loss, WeightGradient};
    let r = hn_nce_loss(b, cfg).unwrap();
    let (x, t, tau) = (rows_of(b.x()), rows_of(b.t()), b.tau());
    let frozen = match cfg.weight_gradient {
        WeightGradient::Detached => Some(weights(&similarity(&x, &t, tau), cfg.beta)),
        WeightGradient::Full => None,
    };
    let d = b.dim();
    let (a, be) = (cfg.alpha, cfg.beta);
    let f = frozen.as_ref();
    let nx = fd(|p| hn_nce(&unflatten(p, d), &t, tau, a, be, f), &flatten(&x), 1e-5);
    let nt = fd(|p| hn_nce(&x, &unflatten(p, d), tau, a, be, f), &flatten(&t), 1e-5);
    let ntau = fd(|p| hn_nce(&x, &t, p[0], a, be, f), &[tau], 1e-5);
    [
        max_rel_err(r.grad_x.as_slice(), &nx),
        max_rel_err(r.grad_t.as_slice(), &nt),
        max_rel_err(&[r.grad_tau], &ntau),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Whether any confident spot shares a window of `min_chars` or more
/// normalized characters with the caption, by scanning every substring.
pub fn textspot_scan(caption: &str, spots: &[(String, f64)], conf: f64, min_chars: usize) -> bool {
    let norm = |s: &str| -> String {
        s.chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect()
    };
    let cap: Vec<char> = norm(caption).chars().collect();
    spots.iter().filter(|(_, c)| *c >= conf).any(|(t, _)| {
        let s: Vec<char> = norm(t).chars().collect();
        (0..s.len()).any(|i| {
            (i + min_chars..=s.len()).any(|j| {
                let needle = &s[i..j];
                cap.len() >= needle.len() && (0..=cap.len() - needle.len()).any(|k| &cap[k..k + needle.len()] == needle)
            })
        })
    })
}

/// Unit prompts plus unit features drawn around them:
/// `(prompts, features, labels)`.
pub fn cluster_fixture(
    classes: usize,
    d: usize,
    per_class: usize,
    spread: f64,
    seed: u64,
) -> (catkit::Matrix<f64>, catkit::Matrix<f64>, Vec<usize>) {
    use catkit::synth;
    let mut r = synth::rng(seed);
    let prompts = synth::random_unit_matrix::<f64>(&mut r, classes, d);
    let noise = synth::gaussian_matrix::<f64>(&mut r, classes * per_class, d);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..classes {
        for k in 0..per_class {
            let i = c * per_class + k;
            rows.push((0..d).map(|j| prompts[(c, j)] + spread * noise[(i, j)]).collect::<Vec<f64>>());
            labels.push(c);
        }
    }
    let mut x = catkit::Matrix::from_rows(&rows).unwrap();
    x.normalize_rows();
    (prompts, x, labels)
}

/// Argmax cosine between each feature and each prompt, ties to the lower class.
pub fn nearest_prompt(prompts: &catkit::Matrix<f64>, x: &catkit::Matrix<f64>) -> Vec<usize> {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    x.iter_rows()
        .map(|f| {
            let mut best = (0, f64::NEG_INFINITY);
            for (c, p) in prompts.iter_rows().enumerate() {
                let cos = f.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() / (norm(f) * norm(p));
                if cos > best.1 {
                    best = (c, cos);
                }
            }
            best.0
        })
        .collect()
}

/// Mean cross-entropy of logits x^T V + b, with its gradients.
pub fn probe_loss_grad(x: &Rows, y: &[usize], v: &Rows, b: &[f64]) -> (f64, Rows, Vec<f64>) {
    let (d, c) = (v.len(), b.len());
    let n = x.len() as f64;
    let mut gv = vec![vec![0.0; c]; d];
    let mut gb = vec![0.0; c];
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let z: Vec<f64> = (0..c).map(|j| b[j] + (0..d).map(|k| xi[k] * v[k][j]).sum::<f64>()).collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = z.iter().map(|v| (v - m).exp()).sum();
        loss += m + norm.ln() - z[yi];
        for j in 0..c {
            let g = (z[j] - m).exp() / norm - if j == yi { 1.0 } else { 0.0 };
            gb[j] += g / n;
            for k in 0..d {
                gv[k][j] += xi[k] * g / n;
            }
        }
    }
    (loss / n, gv, gb)
}

/// Unconstrained probe minimum by plain gradient descent to gradient norm < 1e-8.
pub fn probe_reference_optimum(x: &catkit::Matrix<f64>, y: &[usize], w0: &catkit::Matrix<f64>) -> f64 {
    let xr = rows_of(x);
    let mut v = rows_of(w0);
    let mut b = vec![0.0; w0.cols()];
    let lip = 0.5 * xr.iter().map(|r| r.iter().map(|a| a * a).sum::<f64>() + 1.0).sum::<f64>() / xr.len() as f64;
    for _ in 0..2_000_000 {
        let (loss, gv, gb) = probe_loss_grad(&xr, y, &v, &b);
        let gnorm = (gv.iter().flatten().chain(&gb).map(|g| g * g).sum::<f64>()).sqrt();
        if gnorm < 1e-8 {
            return loss;
        }
        for (vr, gr) in v.iter_mut().zip(&gv) {
            for (a, g) in vr.iter_mut().zip(gr) {
                *a -= g / lip;
            }
        }
        for (a, g) in b.iter_mut().zip(&gb) {
            *a -= g / lip;
        }
    }
    panic!("reference gradient descent did not converge");
}
