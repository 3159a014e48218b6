//! Dependency parses and a CoNLL-U reader/writer.
//!
//! Only the columns the graph rules need are kept: FORM, LEMMA, UPOS, HEAD
//! and DEPREL. Multiword-token ranges (`1-2`) and empty nodes (`1.1`) are
//! skipped, as are comment lines.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coarse part-of-speech tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Upos {
    Noun,
    Propn,
    Adj,
    Verb,
    Num,
    Adp,
    Det,
    Other(String),
}

impl Upos {
    pub fn parse(tag: &str) -> Self {
        match tag {
            "NOUN" => Upos::Noun,
            "PROPN" => Upos::Propn,
            "ADJ" => Upos::Adj,
            "VERB" => Upos::Verb,
            "NUM" => Upos::Num,
            "ADP" => Upos::Adp,
            "DET" => Upos::Det,
            other => Upos::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Upos::Noun => "NOUN",
            Upos::Propn => "PROPN",
            Upos::Adj => "ADJ",
            Upos::Verb => "VERB",
            Upos::Num => "NUM",
            Upos::Adp => "ADP",
            Upos::Det => "DET",
            Upos::Other(s) => s,
        }
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    pub lemma: String,
    pub upos: Upos,
    /// 0-based index of the head token; `None` for the root.
    pub head: Option<usize>,
    pub deprel: String,
}

impl Token {
    pub fn new(form: &str, lemma: &str, upos: Upos, head: Option<usize>, deprel: &str) -> Self {
        Self {
            form: form.to_string(),
            lemma: lemma.to_string(),
            upos,
            head,
            deprel: deprel.to_string(),
        }
    }

    /// Relation label without its subtype (`nsubj:pass` -> `nsubj`).
    pub fn base_rel(&self) -> &str {
        self.deprel.split(':').next().unwrap_or("")
    }
}

/// A validated single-rooted dependency tree.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DependencyParse {
    tokens: Vec<Token>,
}

impl DependencyParse {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        validate(&tokens)?;
        Ok(Self { tokens })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Indices of the direct dependents of `head`, in token order.
    pub fn children(&self, head: usize) -> impl Iterator<Item = usize> + '_ {
        self.tokens
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.head == Some(head))
            .map(|(i, _)| i)
    }

    /// Parses exactly one sentence block.
    pub fn from_conllu(text: &str) -> Result<Self> {
        let mut blocks = parse_conllu(text)?;
        match blocks.len() {
            0 => Ok(Self::empty()),
            1 => Ok(blocks.remove(0)),
            n => Err(Error::Conllu {
                line: 0,
                reason: format!("expected one sentence, found {n}"),
            }),
        }
    }

    pub fn to_conllu(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            let head = t.head.map_or(0, |h| h + 1);
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_\n",
                i + 1,
                t.form,
                t.lemma,
                t.upos,
                head,
                t.deprel
            ));
        }
        out
    }
}

fn validate(tokens: &[Token]) -> Result<()> {
    let n = tokens.len();
    let mut root = None;
    for (i, t) in tokens.iter().enumerate() {
        if t.deprel.is_empty() {
            return Err(Error::MalformedParse {
                token: i,
                reason: "empty relation label".into(),
            });
        }
        match t.head {
            None => {
                if let Some(r) = root {
                    return Err(Error::MalformedParse {
                        token: i,
                        reason: format!("second root (first root is token {r})"),
                    });
                }
                root = Some(i);
            }
            Some(h) if h >= n => {
                return Err(Error::MalformedParse {
                    token: i,
                    reason: format!("head {h} out of range"),
                })
            }
            Some(h) if h == i => {
                return Err(Error::MalformedParse {
                    token: i,
                    reason: "token is its own head".into(),
                })
            }
            Some(_) => {}
        }
    }
    if n > 0 && root.is_none() {
        return Err(Error::MalformedParse {
            token: 0,
            reason: "no root".into(),
        });
    }
    // With one root and in-range heads, any path longer than n revisits a token.
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while let Some(h) = tokens[cur].head {
            cur = h;
            steps += 1;
            if steps > n {
                return Err(Error::MalformedParse {
                    token: start,
                    reason: "cycle in head chain".into(),
                });
            }
        }
    }
    Ok(())
}

/// Parses every sentence block in `text`. Blocks are separated by blank lines.
pub fn parse_conllu(text: &str) -> Result<Vec<DependencyParse>> {
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut block_start = 1;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !tokens.is_empty() {
                out.push(finish_block(std::mem::take(&mut tokens), block_start)?);
            }
            block_start = lineno + 2;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 8 {
            return Err(Error::Conllu {
                line: lineno + 1,
                reason: format!("expected at least 8 tab-separated columns, got {}", cols.len()),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id: usize = id.parse().map_err(|_| Error::Conllu {
            line: lineno + 1,
            reason: format!("bad token id {id:?}"),
        })?;
        if id != tokens.len() + 1 {
            return Err(Error::Conllu {
                line: lineno + 1,
                reason: format!("token id {id} out of sequence"),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| Error::Conllu {
            line: lineno + 1,
            reason: format!("bad head {:?}", cols[6]),
        })?;
        tokens.push(Token {
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: Upos::parse(cols[3]),
            head: head.checked_sub(1),
            deprel: cols[7].to_string(),
        });
    }
    if !tokens.is_empty() {
        out.push(finish_block(tokens, block_start)?);
    }
    Ok(out)
}

fn finish_block(tokens: Vec<Token>, line: usize) -> Result<DependencyParse> {
    DependencyParse::new(tokens).map_err(|e| match e {
        Error::MalformedParse { token, reason } => Error::MalformedParse {
            token,
            reason: format!("{reason} (sentence starting at line {line})"),
        },
        other => other,
    })
}
