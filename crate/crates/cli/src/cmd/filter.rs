use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use anyhow::Context;
use catkit::catfilter::{run_pipeline, Pipeline};

use crate::output::Artifacts;
use crate::settings::{Common, FilterSettings};

pub fn run(common: &Common, s: FilterSettings) -> anyhow::Result<()> {
    let pipeline = Pipeline::new(s.filters()?)?;
    let out = Artifacts::new(&common.out, "filter", &(common, &s))?;
    let input_path = s.input.as_deref().expect("validated");
    let input = File::open(input_path).with_context(|| format!("opening {}", input_path.display()))?;
    let kept_path = out.path(s.output.as_deref(), "filtered.jsonl");
    let file = File::create(&kept_path).with_context(|| format!("creating {}", kept_path.display()))?;
    let mut writer = BufWriter::new(file);
    writer.write_all(out.header().as_bytes())?;
    let stats = run_pipeline(&pipeline, BufReader::new(input), &mut writer)?;
    writer.flush()?;
    let stats_path = out.path(s.stats_out.as_deref(), "filter_stats.tsv");
    out.write(&stats_path, &stats.to_tsv())?;
    println!(
        "kept {} of {} records ({} malformed); stats in {}",
        stats.kept,
        stats.examined,
        stats.malformed,
        stats_path.display()
    );
    Ok(())
}
