use std::fs::{self, File};
use std::io::{BufRead, BufReader};

use anyhow::Context;
use catkit::concept::{ConceptVocab, PredictionRecord};
use catkit::semgraph::NodeKind;

use crate::output::Artifacts;
use crate::settings::{Common, PseudolabelSettings};

fn load_vocab(path: &std::path::Path, kind: NodeKind) -> anyhow::Result<ConceptVocab> {
    let text = fs::read_to_string(path).with_context(|| format!("reading vocabulary {}", path.display()))?;
    ConceptVocab::from_tsv(kind, &text).with_context(|| format!("parsing vocabulary {}", path.display()))
}

pub fn run(common: &Common, s: PseudolabelSettings) -> anyhow::Result<()> {
    let obj = load_vocab(s.obj_vocab.as_deref().expect("validated"), NodeKind::Object)?;
    let attr = load_vocab(s.attr_vocab.as_deref().expect("validated"), NodeKind::Attribute)?;
    let out = Artifacts::new(&common.out, "pseudolabel", &(common, &s))?;
    let pred_path = s.predictions.as_deref().expect("validated");
    let reader = BufReader::new(File::open(pred_path).with_context(|| format!("opening {}", pred_path.display()))?);
    let mut body = String::new();
    let mut count = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let rec: PredictionRecord =
            serde_json::from_str(t).with_context(|| format!("{}:{}: malformed prediction", pred_path.display(), i + 1))?;
        let label = rec
            .sparsify(s.k, obj.len(), attr.len())
            .with_context(|| format!("{}:{}", pred_path.display(), i + 1))?;
        body.push_str(&serde_json::to_string(&label)?);
        body.push('\n');
        count += 1;
    }
    let path = out.path(s.output.as_deref(), "pseudolabels.jsonl");
    out.write(&path, &body)?;
    println!("wrote {count} pseudo-labels (k = {}) to {}", s.k, path.display());
    Ok(())
}
