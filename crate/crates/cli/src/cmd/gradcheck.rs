use std::fs::File;
use std::io::BufReader;

use anyhow::{bail, Context};
use catkit::gradcheck::{run_grid_on, AnalyticFn, GridSpec};
use catkit::hnnce::{hn_nce_loss, EmbeddingBatch, HnConfig};
use catkit::{matfile, synth};

use crate::output::Artifacts;
use crate::settings::{Common, GradcheckSettings};

pub fn run(common: &Common, s: GradcheckSettings) -> anyhow::Result<()> {
    let modes = s.modes()?;
    let batch = match s.batch.as_deref() {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Some(matfile::read_batch::<f64>(BufReader::new(f)).with_context(|| format!("reading batch {}", p.display()))?)
        }
        None => None,
    };
    let out = Artifacts::new(&common.out, "gradcheck", &(common, &s))?;
    let flipped = |b: &EmbeddingBatch<f64>, c: &HnConfig<f64>| {
        let mut r = hn_nce_loss(b, c)?;
        r.grad_t = r.grad_t.scale(-1.0);
        Ok(r)
    };
    let analytic: &AnalyticFn<'_> = if s.inject_sign_flip { &flipped } else { &hn_nce_loss };
    let mut body = String::from("mode\talpha\tbeta\tblock\tmax_rel_err\tresult\n");
    let mut failures = Vec::new();
    for mode in modes {
        let spec = GridSpec {
            n: s.n,
            d: s.d,
            tau: s.tau,
            step: s.step,
            tol: s.tol,
            mode,
            ..GridSpec::default()
        };
        let mut rng = synth::rng(common.seed);
        let batch = match &batch {
            Some(b) => b.clone(),
            None => synth::correlated_batch(&mut rng, spec.n, spec.d, 0.5, spec.tau)?,
        };
        let report = run_grid_on(&batch, &mut rng, &spec, analytic)?;
        let mode_name = match mode {
            catkit::hnnce::WeightGradient::Detached => "detached",
            catkit::hnnce::WeightGradient::Full => "full",
        };
        for line in report.to_tsv().lines().skip(1) {
            body.push_str(mode_name);
            body.push('\t');
            body.push_str(line);
            body.push('\n');
        }
        failures.extend(report.failures().map(|r| {
            format!(
                "{mode_name} alpha={} beta={} block {} (max rel err {:.3e})",
                r.alpha.map_or("-".into(), |v| v.to_string()),
                r.beta.map_or("-".into(), |v| v.to_string()),
                r.block,
                r.max_rel_err
            )
        }));
    }
    let path = out.path(s.report_out.as_deref(), "gradcheck.tsv");
    out.write(&path, &body)?;
    print!("{body}");
    if !failures.is_empty() {
        bail!("{} gradient block(s) failed:\n  {}", failures.len(), failures.join("\n  "));
    }
    Ok(())
}
