use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::pipeline::PipelineOutcome;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCounts {
    pub name: String,
    pub examined: u64,
    pub kept: u64,
    pub dropped: u64,
}

/// Pipeline counters. Every record reaching a filter is either kept or
/// dropped there; a drop is charged to the first failing filter only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    /// All records read, including malformed ones.
    pub examined: u64,
    pub malformed: u64,
    pub kept: u64,
    pub filters: Vec<FilterCounts>,
}

impl FilterStats {
    pub fn new<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            examined: 0,
            malformed: 0,
            kept: 0,
            filters: names
                .into_iter()
                .map(|n| FilterCounts {
                    name: n.to_string(),
                    examined: 0,
                    kept: 0,
                    dropped: 0,
                })
                .collect(),
        }
    }

    pub fn record(&mut self, outcome: &PipelineOutcome) {
        self.examined += 1;
        let reached = match outcome {
            PipelineOutcome::Malformed(_) => {
                self.malformed += 1;
                return;
            }
            PipelineOutcome::Kept => {
                self.kept += 1;
                self.filters.len()
            }
            PipelineOutcome::Dropped { filter, .. } => {
                self.filters[*filter].examined += 1;
                self.filters[*filter].dropped += 1;
                *filter
            }
        };
        for f in &mut self.filters[..reached] {
            f.examined += 1;
            f.kept += 1;
        }
    }

    /// Adds `other` into `self`. Both must describe the same filter list.
    pub fn merge(mut self, other: &Self) -> Self {
        assert_eq!(
            self.filters.len(),
            other.filters.len(),
            "merging stats of different pipelines"
        );
        self.examined += other.examined;
        self.malformed += other.malformed;
        self.kept += other.kept;
        for (a, b) in self.filters.iter_mut().zip(&other.filters) {
            debug_assert_eq!(a.name, b.name);
            a.examined += b.examined;
            a.kept += b.kept;
            a.dropped += b.dropped;
        }
        self
    }

    pub fn dropped(&self) -> u64 {
        self.filters.iter().map(|f| f.dropped).sum()
    }

    /// Fraction of all examined records that survived the whole pipeline.
    pub fn retained_fraction(&self) -> f64 {
        fraction(self.kept, self.examined)
    }

    pub fn is_conserved(&self) -> bool {
        self.examined == self.kept + self.dropped() + self.malformed
            && self.filters.iter().all(|f| f.examined == f.kept + f.dropped)
    }

    /// Tab-separated report. `retained_pct` is the share of all input
    /// records still present after each stage.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("filter\texamined\tkept\tdropped\tretained_pct\n");
        let full = self.examined;
        let wellformed = self.examined - self.malformed;
        let _ = writeln!(
            out,
            "parse\t{full}\t{wellformed}\t{}\t{:.2}",
            self.malformed,
            100.0 * fraction(wellformed, full)
        );
        for f in &self.filters {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.2}",
                f.name,
                f.examined,
                f.kept,
                f.dropped,
                100.0 * fraction(f.kept, full)
            );
        }
        let _ = writeln!(
            out,
            "total\t{full}\t{}\t{}\t{:.2}",
            self.kept,
            full - self.kept,
            100.0 * self.retained_fraction()
        );
        out
    }
}

fn fraction(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
