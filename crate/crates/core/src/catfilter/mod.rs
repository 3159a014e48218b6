//! Complexity / action / text-spot / alignment-score filtering of caption
//! records, individually and as a streaming pipeline.

mod pipeline;
mod record;
mod stats;
pub mod textspot;

use std::cell::OnceCell;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::semgraph::{action_count, build_graph, complexity, SemanticGraph};

pub use pipeline::{run_pipeline, Pipeline, PipelineOutcome};
pub use record::{CaptionRecord, OcrSpot};
pub use stats::{FilterCounts, FilterStats};

pub const DEFAULT_MIN_COMPLEXITY: usize = 1;
pub const DEFAULT_SPOT_CONFIDENCE: f64 = 0.8;
pub const DEFAULT_SPOT_CHARS: usize = 5;
pub const DEFAULT_MIN_SCORE: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    Pass,
    FailComplexity,
    FailAction,
    FailTextspot,
    FailScore,
    FailNoParse,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Pass => "PASS",
            Reason::FailComplexity => "FAIL_COMPLEXITY",
            Reason::FailAction => "FAIL_ACTION",
            Reason::FailTextspot => "FAIL_TEXTSPOT",
            Reason::FailScore => "FAIL_SCORE",
            Reason::FailNoParse => "FAIL_NO_PARSE",
        }
    }
}

/// `keep` is true iff `reason` is [`Reason::Pass`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub keep: bool,
    pub reason: Reason,
}

impl FilterDecision {
    pub const PASS: Self = Self {
        keep: true,
        reason: Reason::Pass,
    };

    pub fn fail(reason: Reason) -> Self {
        debug_assert!(reason != Reason::Pass);
        Self {
            keep: false,
            reason,
        }
    }

    fn from_bool(keep: bool, failure: Reason) -> Self {
        if keep {
            Self::PASS
        } else {
            Self::fail(failure)
        }
    }
}

pub fn complexity_filter(record: &CaptionRecord, min_level: usize) -> FilterDecision {
    match &record.parse {
        None => FilterDecision::fail(Reason::FailNoParse),
        Some(p) => complexity_decision(&build_graph(p), min_level),
    }
}

pub fn action_filter(record: &CaptionRecord) -> FilterDecision {
    match &record.parse {
        None => FilterDecision::fail(Reason::FailNoParse),
        Some(p) => action_decision(&build_graph(p)),
    }
}

fn complexity_decision(g: &SemanticGraph, min_level: usize) -> FilterDecision {
    FilterDecision::from_bool(complexity(g).0 >= min_level, Reason::FailComplexity)
}

fn action_decision(g: &SemanticGraph) -> FilterDecision {
    FilterDecision::from_bool(action_count(g) >= 1, Reason::FailAction)
}

/// Drops the record if any sufficiently confident spot shares a run of at
/// least `min_match_chars` normalized characters with the caption.
pub fn textspot_filter(
    record: &CaptionRecord,
    conf_threshold: f64,
    min_match_chars: usize,
) -> FilterDecision {
    let hit = record.spots.iter().any(|s| {
        s.confidence >= conf_threshold
            && textspot::spot_matches_caption(&s.text, &record.caption, min_match_chars)
    });
    FilterDecision::from_bool(!hit, Reason::FailTextspot)
}

/// Keeps scores `>= min_score`; records without a score pass.
pub fn score_filter(record: &CaptionRecord, min_score: f64) -> FilterDecision {
    match record.alignment_score {
        None => FilterDecision::PASS,
        Some(s) => FilterDecision::from_bool(s >= min_score, Reason::FailScore),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Filter {
    Score { min_score: f64 },
    Complexity { min_level: usize },
    Action,
    Textspot { conf_threshold: f64, min_match_chars: usize },
}

impl Filter {
    pub fn name(&self) -> &'static str {
        match self {
            Filter::Score { .. } => "score",
            Filter::Complexity { .. } => "complexity",
            Filter::Action => "action",
            Filter::Textspot { .. } => "textspot",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Filter::Score { min_score } if !(0.0..=1.0).contains(&min_score) => {
                Err(invalid(format!("min score {min_score} outside [0, 1]")))
            }
            Filter::Textspot { conf_threshold, .. } if !(0.0..=1.0).contains(&conf_threshold) => {
                Err(invalid(format!("spot confidence {conf_threshold} outside [0, 1]")))
            }
            Filter::Textspot { min_match_chars: 0, .. } => {
                Err(invalid("spot match length must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, record: &CaptionRecord) -> FilterDecision {
        self.apply_cached(record, &OnceCell::new())
    }

    /// Applies the filter, building the record's graph at most once across calls sharing `graph`.
    pub(crate) fn apply_cached(
        &self,
        record: &CaptionRecord,
        graph: &OnceCell<Option<SemanticGraph>>,
    ) -> FilterDecision {
        let graph = || graph.get_or_init(|| record.parse.as_ref().map(build_graph)).as_ref();
        match *self {
            Filter::Score { min_score } => score_filter(record, min_score),
            Filter::Textspot {
                conf_threshold,
                min_match_chars,
            } => textspot_filter(record, conf_threshold, min_match_chars),
            Filter::Complexity { min_level } => match graph() {
                None => FilterDecision::fail(Reason::FailNoParse),
                Some(g) => complexity_decision(g, min_level),
            },
            Filter::Action => match graph() {
                None => FilterDecision::fail(Reason::FailNoParse),
                Some(g) => action_decision(g),
            },
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Filter::Score { min_score } => write!(f, "score(min={min_score})"),
            Filter::Complexity { min_level } => write!(f, "complexity(min=C{min_level})"),
            Filter::Action => f.write_str("action"),
            Filter::Textspot {
                conf_threshold,
                min_match_chars,
            } => write!(f, "textspot(conf={conf_threshold},chars={min_match_chars})"),
        }
    }
}

/// Names accepted in filter lists; parameters come from [`FilterParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Score,
    Complexity,
    Action,
    Textspot,
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "score" | "s" | "clip" => Ok(FilterKind::Score),
            "c" | "complexity" => Ok(FilterKind::Complexity),
            "a" | "action" => Ok(FilterKind::Action),
            "t" | "textspot" | "text" => Ok(FilterKind::Textspot),
            other => Err(invalid(format!("unknown filter {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub min_complexity: usize,
    pub spot_confidence: f64,
    pub spot_chars: usize,
    pub min_score: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            min_complexity: DEFAULT_MIN_COMPLEXITY,
            spot_confidence: DEFAULT_SPOT_CONFIDENCE,
            spot_chars: DEFAULT_SPOT_CHARS,
            min_score: DEFAULT_MIN_SCORE,
        }
    }
}

impl FilterParams {
    /// Checks every parameter, whether or not its filter is in use.
    pub fn validate(&self) -> Result<()> {
        [FilterKind::Score, FilterKind::Complexity, FilterKind::Action, FilterKind::Textspot]
            .into_iter()
            .try_for_each(|k| self.filter(k).validate())
    }

    pub fn filter(&self, kind: FilterKind) -> Filter {
        match kind {
            FilterKind::Score => Filter::Score {
                min_score: self.min_score,
            },
            FilterKind::Complexity => Filter::Complexity {
                min_level: self.min_complexity,
            },
            FilterKind::Action => Filter::Action,
            FilterKind::Textspot => Filter::Textspot {
                conf_threshold: self.spot_confidence,
                min_match_chars: self.spot_chars,
            },
        }
    }
}

/// Parses a comma-separated list such as `score,c,a,t`. An empty string
/// yields no filters.
pub fn parse_filter_list(spec: &str, params: &FilterParams) -> Result<Vec<Filter>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<FilterKind>().map(|k| params.filter(k)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::DependencyParse;

    fn parsed(conllu: &str, caption: &str) -> CaptionRecord {
        CaptionRecord::new("x", caption).with_parse(DependencyParse::from_conllu(conllu).unwrap())
    }

    const RED_CAR: &str = "1\tred\tred\tADJ\t_\t_\t2\tamod\t_\t_\n2\tcar\tcar\tNOUN\t_\t_\t0\troot\t_\t_\n";

    #[test]
    fn missing_parse_fails_graph_filters_without_error() {
        let r = CaptionRecord::new("x", "whatever");
        assert_eq!(complexity_filter(&r, 1).reason, Reason::FailNoParse);
        assert_eq!(action_filter(&r).reason, Reason::FailNoParse);
        assert!(score_filter(&r, 0.35).keep);
        assert!(textspot_filter(&r, 0.8, 5).keep);
    }

    #[test]
    fn empty_caption_fails_complexity() {
        let r = CaptionRecord::new("x", "").with_parse(DependencyParse::empty());
        assert_eq!(complexity_filter(&r, 1), FilterDecision::fail(Reason::FailComplexity));
    }

    #[test]
    fn red_car_levels() {
        let r = parsed(RED_CAR, "red car");
        assert!(complexity_filter(&r, 1).keep);
        assert_eq!(complexity_filter(&r, 2).reason, Reason::FailComplexity);
        assert_eq!(action_filter(&r).reason, Reason::FailAction);
    }

    #[test]
    fn textspot_examples() {
        let r = CaptionRecord::new("x", "Big SALE 50% off today").with_spot("SALE50", 0.9);
        assert_eq!(textspot_filter(&r, 0.8, 5).reason, Reason::FailTextspot);
        let r = CaptionRecord::new("x", "Big SALE 50% off today").with_spot("SALE50", 0.5);
        assert!(textspot_filter(&r, 0.8, 5).keep);
        let r = CaptionRecord::new("x", "Big SALE 50% off today");
        assert!(textspot_filter(&r, 0.8, 5).keep);
        // confidence exactly at the threshold counts
        let r = CaptionRecord::new("x", "Big SALE 50% off today").with_spot("SALE50", 0.8);
        assert!(!textspot_filter(&r, 0.8, 5).keep);
    }

    #[test]
    fn score_boundary_is_kept() {
        let base = CaptionRecord::new("x", "c");
        assert!(score_filter(&base.clone().with_score(0.40), 0.35).keep);
        assert!(score_filter(&base.clone().with_score(0.35), 0.35).keep);
        assert_eq!(
            score_filter(&base.with_score(0.10), 0.35).reason,
            Reason::FailScore
        );
    }

    #[test]
    fn filter_lists() {
        let p = FilterParams::default();
        let fs = parse_filter_list("score,c,a,t", &p).unwrap();
        assert_eq!(
            fs.iter().map(Filter::name).collect::<Vec<_>>(),
            ["score", "complexity", "action", "textspot"]
        );
        assert!(parse_filter_list("", &p).unwrap().is_empty());
        assert!(parse_filter_list("c,x", &p).is_err());
        assert!(Filter::Textspot { conf_threshold: 0.8, min_match_chars: 0 }.validate().is_err());
        assert!(Filter::Score { min_score: 1.5 }.validate().is_err());
    }
}
