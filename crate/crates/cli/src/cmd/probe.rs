use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{ensure, Context};
use catkit::matrix::l2_norm;
use catkit::probe::{grid_search, k_shot_split, pgd_fit, select_rows, zero_shot_init, PgdConfig, ProbeProblem};
use catkit::{matfile, Matrix};

use crate::output::Artifacts;
use crate::settings::{Common, ProbeSettings};

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn read_matrix(path: &Path) -> anyhow::Result<Matrix<f64>> {
    matfile::read_matrix(open(path)?).with_context(|| format!("reading matrix {}", path.display()))
}

fn read_labels(path: &Path) -> anyhow::Result<Vec<usize>> {
    matfile::read_labels(open(path)?).with_context(|| format!("reading labels {}", path.display()))
}

pub fn run(common: &Common, s: ProbeSettings) -> anyhow::Result<()> {
    let features = read_matrix(s.features.as_deref().expect("validated"))?;
    let labels = read_labels(s.labels.as_deref().expect("validated"))?;
    let prompts = read_matrix(s.prompts.as_deref().expect("validated"))?;
    for (j, row) in prompts.iter_rows().enumerate() {
        let n = l2_norm(row);
        ensure!((n - 1.0).abs() <= 1e-6, "prompt row {j} has norm {n}; prompts must be unit-normalized");
    }
    let eval = match (&s.eval_features, &s.eval_labels) {
        (Some(f), Some(y)) => Some((read_matrix(f)?, read_labels(y)?)),
        _ => None,
    };
    let (delta, delta_b) = (s.delta.expect("validated"), s.delta_b.expect("validated"));
    let problem = ProbeProblem::new(features, labels, zero_shot_init(&prompts), delta, delta_b)?;
    if let Some((x, y)) = &eval {
        ensure!(x.rows() == y.len(), "eval features have {} rows but {} labels", x.rows(), y.len());
        ensure!(x.cols() == problem.features().cols(), "eval features have the wrong width");
        ensure!(y.iter().all(|&c| c < problem.n_classes()), "eval label outside the prompt classes");
    }
    let cfg = PgdConfig {
        step: s.lr.unwrap_or_else(|| 1.0 / problem.lipschitz_bound()),
        iterations: s.iters(),
        batch_size: s.batch_size,
        cosine_decay: s.cosine,
        seed: common.seed,
    };
    let out = Artifacts::new(&common.out, "probe", &(common, &s))?;

    let sol = pgd_fit(&problem, &cfg)?;
    out.write(&out.path(s.trajectory_out.as_deref(), "probe_trajectory.tsv"), &sol.trajectory_tsv())?;
    out.write(&out.path(None, "probe_w.txt"), &matfile::write_matrix(&sol.w))?;
    let b = Matrix::from_vec(1, sol.b.len(), sol.b.clone())?;
    out.write(&out.path(None, "probe_b.txt"), &matfile::write_matrix(&b))?;

    let deltas = if s.delta_grid.is_empty() { vec![delta] } else { s.delta_grid.clone() };
    let deltas_b = if s.delta_b_grid.is_empty() { vec![delta_b] } else { s.delta_b_grid.clone() };
    let radii: Vec<(f64, f64)> = deltas.iter().flat_map(|&d| deltas_b.iter().map(move |&db| (d, db))).collect();
    let mut table = String::from("shots\tdelta\tdelta_b\tfinal_loss\ttrain_acc\teval_acc\n");
    let shots: Vec<Option<usize>> = if s.k_shot.is_empty() { vec![None] } else { s.k_shot.iter().map(|&k| Some(k)).collect() };
    for k in shots {
        let (sub, held): (ProbeProblem<f64>, Option<(Matrix<f64>, Vec<usize>)>) = match k {
            None => (problem.clone(), eval.clone()),
            Some(k) => {
                let (train, rest) = k_shot_split(problem.labels(), k, common.seed);
                let x = select_rows(problem.features(), &train);
                let y = train.iter().map(|&i| problem.labels()[i]).collect();
                let held = eval.clone().or_else(|| {
                    (!rest.is_empty()).then(|| {
                        (select_rows(problem.features(), &rest), rest.iter().map(|&i| problem.labels()[i]).collect())
                    })
                });
                (ProbeProblem::new(x, y, problem.w0().clone(), delta, delta_b)?, held)
            }
        };
        let sub_cfg = PgdConfig {
            step: s.lr.unwrap_or_else(|| 1.0 / sub.lipschitz_bound()),
            ..cfg
        };
        let grid = grid_search(&sub, &radii, &sub_cfg, held.as_ref().map(|(x, y)| (x, y.as_slice())))?;
        let shot = k.map_or_else(|| "all".to_string(), |k| k.to_string());
        for g in grid {
            let _ = writeln!(
                table,
                "{shot}\t{}\t{}\t{:.12e}\t{:.6}\t{}",
                g.delta,
                g.delta_b,
                g.final_loss,
                g.train_accuracy,
                g.eval_accuracy.map_or_else(|| "-".to_string(), |a| format!("{a:.6}"))
            );
        }
    }
    out.write(&out.path(None, "probe_table.tsv"), &table)?;
    print!("{table}");
    Ok(())
}
