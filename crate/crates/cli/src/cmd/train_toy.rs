use std::fmt::Write as _;

use catkit::toy::train_all;

use crate::output::Artifacts;
use crate::settings::{Common, TrainToySettings};

pub fn run(common: &Common, s: TrainToySettings) -> anyhow::Result<()> {
    let cfg = s.config(common.seed);
    let out = Artifacts::new(&common.out, "train-toy", &(common, &s))?;
    let runs = train_all(&cfg)?;
    let mut curves = String::from("run\tstep\tloss\tscale\n");
    let mut metrics = String::from("run\tfinal_loss\tfinal_scale\tr1_i2t\tr1_t2i\n");
    for r in &runs {
        for (k, (l, sc)) in r.losses.iter().zip(&r.scales).enumerate() {
            let _ = writeln!(curves, "{}\t{k}\t{l:.12e}\t{sc:.12e}", r.name);
        }
        let _ = writeln!(
            metrics,
            "{}\t{:.12e}\t{:.12e}\t{:.6}\t{:.6}",
            r.name,
            r.final_loss(),
            r.scales.last().copied().unwrap_or(f64::NAN),
            r.r1_i2t,
            r.r1_t2i
        );
    }
    out.write(&out.path(None, "toy_curves.tsv"), &curves)?;
    out.write(&out.path(None, "toy_metrics.tsv"), &metrics)?;
    print!("{metrics}");
    Ok(())
}
