use serde::{Deserialize, Serialize};

use crate::conllu::DependencyParse;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrSpot {
    pub text: String,
    pub confidence: f64,
}

impl OcrSpot {
    pub fn new(text: &str, confidence: f64) -> Self {
        Self {
            text: text.to_string(),
            confidence,
        }
    }
}

/// One image-text sample. The image itself is represented only by its
/// precomputed text spots.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionRecord {
    pub id: String,
    pub caption: String,
    pub parse: Option<DependencyParse>,
    pub spots: Vec<OcrSpot>,
    pub alignment_score: Option<f64>,
}

/// Line-delimited JSON form of a record; the parse travels as CoNLL-U text.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: String,
    caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conllu: Option<String>,
    #[serde(default)]
    spots: Vec<OcrSpot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alignment_score: Option<f64>,
}

impl CaptionRecord {
    pub fn new(id: &str, caption: &str) -> Self {
        Self {
            id: id.to_string(),
            caption: caption.to_string(),
            parse: None,
            spots: Vec::new(),
            alignment_score: None,
        }
    }

    pub fn with_parse(mut self, parse: DependencyParse) -> Self {
        self.parse = Some(parse);
        self
    }

    pub fn with_spot(mut self, text: &str, confidence: f64) -> Self {
        self.spots.push(OcrSpot::new(text, confidence));
        self
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.alignment_score = Some(score);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(invalid("record id is empty"));
        }
        for s in &self.spots {
            if !(0.0..=1.0).contains(&s.confidence) {
                return Err(invalid(format!(
                    "record {}: spot confidence {} outside [0, 1]",
                    self.id, s.confidence
                )));
            }
        }
        if let Some(a) = self.alignment_score {
            if !(0.0..=1.0).contains(&a) {
                return Err(invalid(format!(
                    "record {}: alignment score {a} outside [0, 1]",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let raw: RecordLine = serde_json::from_str(line)?;
        let parse = raw
            .conllu
            .as_deref()
            .map(DependencyParse::from_conllu)
            .transpose()?;
        let rec = Self {
            id: raw.id,
            caption: raw.caption,
            parse,
            spots: raw.spots,
            alignment_score: raw.alignment_score,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn to_json_line(&self) -> String {
        let raw = RecordLine {
            id: self.id.clone(),
            caption: self.caption.clone(),
            conllu: self.parse.as_ref().map(DependencyParse::to_conllu),
            spots: self.spots.clone(),
            alignment_score: self.alignment_score,
        };
        serde_json::to_string(&raw).expect("record serializes")
    }
}
