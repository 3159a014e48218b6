use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::semgraph::{NodeKind, SemanticGraph};

pub const DEFAULT_MIN_COUNT: u64 = 250;

/// Lemma -> canonical concept key. Unmapped lemmas map to themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    map: HashMap<String, String>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, lemma: &str, key: &str) {
        self.map.insert(lemma.to_lowercase(), key.to_string());
    }

    pub fn canonical<'a>(&'a self, lemma: &'a str) -> &'a str {
        self.map.get(&lemma.to_lowercase()).map_or(lemma, String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Reads `lemma<TAB>key` lines; blank and `#` lines are ignored.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lex = Self::new();
        for (n, line) in data_lines(text) {
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(l), Some(k), None) if !l.is_empty() && !k.is_empty() => lex.insert(l, k),
                _ => return Err(invalid(format!("lexicon line {n}: expected lemma<TAB>key"))),
            }
        }
        Ok(lex)
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: usize,
    pub key: String,
    pub frequency: u64,
}

/// Dense concept index ordered by descending frequency, ties by key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptVocab {
    kind: NodeKind,
    concepts: Vec<Concept>,
    index: HashMap<String, usize>,
}

impl ConceptVocab {
    fn from_sorted(kind: NodeKind, concepts: Vec<Concept>) -> Self {
        let index = concepts.iter().map(|c| (c.key.clone(), c.id)).collect();
        Self {
            kind,
            concepts,
            index,
        }
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn get(&self, key: &str) -> Option<&Concept> {
        self.index.get(key).map(|&i| &self.concepts[i])
    }

    pub fn frequency(&self, id: usize) -> Option<u64> {
        self.concepts.get(id).map(|c| c.frequency)
    }

    /// Distinct vocabulary ids of the graph's nodes of this vocabulary's kind, ascending.
    pub fn present_ids(&self, graph: &SemanticGraph, lexicon: &Lexicon) -> Vec<usize> {
        keys_in(graph, lexicon, self.kind)
            .into_iter()
            .filter_map(|k| self.index.get(&k).copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for c in &self.concepts {
            let _ = writeln!(out, "{}\t{}\t{}", c.id, c.key, c.frequency);
        }
        out
    }

    pub fn from_tsv(kind: NodeKind, text: &str) -> Result<Self> {
        let mut concepts = Vec::new();
        for (n, line) in data_lines(text) {
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = || invalid(format!("vocabulary line {n}: expected id<TAB>key<TAB>frequency"));
            if cols.len() != 3 || cols[1].is_empty() {
                return Err(bad());
            }
            let id: usize = cols[0].parse().map_err(|_| bad())?;
            let frequency: u64 = cols[2].parse().map_err(|_| bad())?;
            if id != concepts.len() {
                return Err(invalid(format!("vocabulary line {n}: ids must be dense from 0")));
            }
            if frequency == 0 {
                return Err(invalid(format!("vocabulary line {n}: zero frequency")));
            }
            concepts.push(Concept {
                id,
                key: cols[1].to_string(),
                frequency,
            });
        }
        let vocab = Self::from_sorted(kind, concepts);
        if vocab.index.len() != vocab.concepts.len() {
            return Err(invalid("vocabulary keys are not unique"));
        }
        Ok(vocab)
    }
}

fn keys_in(graph: &SemanticGraph, lexicon: &Lexicon, kind: NodeKind) -> BTreeSet<String> {
    graph
        .nodes_of(kind)
        .map(|n| lexicon.canonical(&n.lemma).to_string())
        .collect()
}

/// Per-key caption counts; each caption contributes at most once per key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConceptCounter {
    counts: BTreeMap<String, u64>,
}

impl ConceptCounter {
    pub fn add(&mut self, graph: &SemanticGraph, lexicon: &Lexicon, kind: NodeKind) {
        for k in keys_in(graph, lexicon, kind) {
            *self.counts.entry(k).or_default() += 1;
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_default() += v;
        }
        self
    }

    pub fn count(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    /// Keeps keys seen at least `min_count` times and assigns ids.
    pub fn finish(self, kind: NodeKind, min_count: u64) -> ConceptVocab {
        let mut kept: Vec<(String, u64)> = self
            .counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let concepts = kept
            .into_iter()
            .enumerate()
            .map(|(id, (key, frequency))| Concept { id, key, frequency })
            .collect();
        ConceptVocab::from_sorted(kind, concepts)
    }
}

/// Counts canonical keys of `kind` nodes over the corpus in parallel, then
/// drops keys seen in fewer than `min_count` captions.
pub fn build_vocab(
    graphs: &[SemanticGraph],
    lexicon: &Lexicon,
    kind: NodeKind,
    min_count: u64,
) -> Result<ConceptVocab> {
    if kind == NodeKind::Action {
        return Err(invalid("concept vocabularies cover objects or attributes"));
    }
    let counter = graphs
        .par_iter()
        .fold(ConceptCounter::default, |mut c, g| {
            c.add(g, lexicon, kind);
            c
        })
        .reduce(ConceptCounter::default, ConceptCounter::merge);
    Ok(counter.finish(kind, min_count))
}
