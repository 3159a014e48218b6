use std::cell::OnceCell;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use super::{CaptionRecord, Filter, FilterStats, Reason};
use crate::error::{invalid, Result};

const CHUNK_LINES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum PipelineOutcome {
    Kept,
    /// Dropped by the filter at this position in the pipeline.
    Dropped { filter: usize, reason: Reason },
    Malformed(String),
}

/// An ordered conjunction of filters.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    filters: Vec<Filter>,
}

impl Pipeline {
    pub fn new(filters: Vec<Filter>) -> Result<Self> {
        for (i, f) in filters.iter().enumerate() {
            f.validate()?;
            if filters[..i].iter().any(|g| g.name() == f.name()) {
                return Err(invalid(format!("filter {} listed twice", f.name())));
            }
        }
        Ok(Self { filters })
    }

    pub fn filters(&self) -> &[Filter] {
        &self.filters
    }

    pub fn empty_stats(&self) -> FilterStats {
        FilterStats::new(self.filters.iter().map(Filter::name))
    }

    pub fn evaluate(&self, record: &CaptionRecord) -> PipelineOutcome {
        let graph = OnceCell::new();
        for (i, f) in self.filters.iter().enumerate() {
            let d = f.apply_cached(record, &graph);
            if !d.keep {
                return PipelineOutcome::Dropped {
                    filter: i,
                    reason: d.reason,
                };
            }
        }
        PipelineOutcome::Kept
    }

    /// In-memory run; output keeps input order.
    pub fn run<I>(&self, records: I) -> (Vec<CaptionRecord>, FilterStats)
    where
        I: IntoIterator<Item = CaptionRecord>,
    {
        let mut stats = self.empty_stats();
        let mut kept = Vec::new();
        for r in records {
            let outcome = match r.validate() {
                Ok(()) => self.evaluate(&r),
                Err(e) => PipelineOutcome::Malformed(e.to_string()),
            };
            stats.record(&outcome);
            if outcome == PipelineOutcome::Kept {
                kept.push(r);
            }
        }
        (kept, stats)
    }

    fn evaluate_line(&self, line: &str) -> PipelineOutcome {
        match CaptionRecord::from_json_line(line) {
            Ok(r) => self.evaluate(&r),
            Err(e) => PipelineOutcome::Malformed(e.to_string()),
        }
    }
}

/// Streams line-delimited records from `input` to `output`, writing kept
/// lines verbatim and in input order. Blank lines and `#` comment lines are
/// skipped. Records are evaluated in parallel per chunk; statistics are
/// merged with [`FilterStats::merge`].
pub fn run_pipeline<R: BufRead, W: Write>(
    pipeline: &Pipeline,
    input: R,
    output: &mut W,
) -> Result<FilterStats> {
    let mut stats = pipeline.empty_stats();
    let mut lines = input.lines();
    loop {
        let mut chunk = Vec::with_capacity(CHUNK_LINES);
        for line in lines.by_ref() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            chunk.push(line);
            if chunk.len() == CHUNK_LINES {
                break;
            }
        }
        if chunk.is_empty() {
            break;
        }
        let outcomes: Vec<PipelineOutcome> =
            chunk.par_iter().map(|l| pipeline.evaluate_line(l)).collect();
        let chunk_stats = outcomes
            .par_iter()
            .fold(
                || pipeline.empty_stats(),
                |mut s, o| {
                    s.record(o);
                    s
                },
            )
            .reduce(|| pipeline.empty_stats(), |a, b| a.merge(&b));
        stats = stats.merge(&chunk_stats);
        for (line, outcome) in chunk.iter().zip(&outcomes) {
            if *outcome == PipelineOutcome::Kept {
                writeln!(output, "{line}")?;
            }
        }
    }
    Ok(stats)
}
