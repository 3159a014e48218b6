//! Rule-based extraction of an object/attribute/action graph from a
//! dependency parse, plus the caption complexity measure and action count
//! used by the caption filters.
//!
//! Rule inventory (UD labels; the common spaCy/ClearNLP aliases are accepted
//! where noted):
//!
//! * a NOUN becomes an OBJECT unless it is a `compound` modifier of another
//!   node, in which case it is an ATTRIBUTE of that node. PROPN tokens never
//!   produce nodes.
//! * ADJ/NUM modifiers (`amod`, `nummod`, `advmod`, `compound`) of a node
//!   become ATTRIBUTEs of it (`has_attr`); this covers attribute-of-attribute
//!   chains such as "dark green". Coordinated adjectives (`conj`) attach to
//!   the same node as the adjective they coordinate with.
//! * predicative adjectives attach to the subject: a copular ADJ clause head
//!   or an `xcomp`/`acomp` of an excluded linking verb.
//! * a noun introduced by the adposition "with" (`nmod` + `case`, or
//!   `prep`/`pobj`) is a part of the noun it modifies (`has_part`), as is the
//!   direct object of "have".
//! * VERBs whose lemma is not one of be/look/seem/have become ACTIONs.
//!   Subjects (`nsubj`, `obl:agent`) and objects (`obj`, `dobj`,
//!   `nsubj:pass`) that resolve to OBJECT nodes are linked with
//!   `act_has_subj`/`act_has_obj` and the mirrored `is_act_subj`/`is_act_obj`.
//!   Clausal noun modifiers (`acl`, `acl:relcl`) take the modified noun as
//!   their missing argument. Participial `amod` verbs are emitted both as an
//!   attribute and as an argument-less action.
//! * determiners, adpositions, pronouns and punctuation produce no nodes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::conllu::{DependencyParse, Token, Upos};
use crate::error::{invalid, Result};

/// Verb lemmas that describe attributes or parts rather than actions.
pub const EXCLUDED_VERBS: [&str; 4] = ["be", "look", "seem", "have"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Object,
    Attribute,
    Action,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Object => "object",
            NodeKind::Attribute => "attribute",
            NodeKind::Action => "action",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    HasAttr,
    HasPart,
    ActHasSubj,
    ActHasObj,
    IsActSubj,
    IsActObj,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::HasAttr => "has_attr",
            Relation::HasPart => "has_part",
            Relation::ActHasSubj => "act_has_subj",
            Relation::ActHasObj => "act_has_obj",
            Relation::IsActSubj => "is_act_subj",
            Relation::IsActObj => "is_act_obj",
        }
    }

    /// The mirrored relation for action arguments.
    pub fn mirror(self) -> Option<Relation> {
        match self {
            Relation::ActHasSubj => Some(Relation::IsActSubj),
            Relation::ActHasObj => Some(Relation::IsActObj),
            Relation::IsActSubj => Some(Relation::ActHasSubj),
            Relation::IsActObj => Some(Relation::ActHasObj),
            Relation::HasAttr | Relation::HasPart => None,
        }
    }

    /// Relations that count toward an object's complexity when the object is the source.
    fn counts_for_object(self) -> bool {
        matches!(
            self,
            Relation::HasAttr | Relation::HasPart | Relation::IsActSubj | Relation::IsActObj
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    pub lemma: String,
    /// Surface form of the head token.
    pub text: String,
    /// Half-open token range in the source parse.
    pub span: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub rel: Relation,
    pub dst: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticGraph {
    nodes: Vec<Node>,
    edges: BTreeSet<Edge>,
}

impl SemanticGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    /// First node of `kind` with the given lemma.
    pub fn find(&self, kind: NodeKind, lemma: &str) -> Option<&Node> {
        self.nodes_of(kind).find(|n| n.lemma == lemma)
    }

    pub fn has_edge(&self, src: usize, rel: Relation, dst: usize) -> bool {
        self.edges.contains(&Edge { src, rel, dst })
    }

    pub fn add_node(&mut self, kind: NodeKind, lemma: &str, text: &str, span: (usize, usize)) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            kind,
            lemma: lemma.to_string(),
            text: text.to_string(),
            span,
        });
        id
    }

    /// Adds an edge after checking endpoint kinds. Action-argument edges are
    /// inserted together with their mirror.
    pub fn add_edge(&mut self, src: usize, rel: Relation, dst: usize) -> Result<()> {
        let kind = |id: usize| {
            self.nodes
                .get(id)
                .map(|n| n.kind)
                .ok_or_else(|| invalid(format!("edge references missing node {id}")))
        };
        let (sk, dk) = (kind(src)?, kind(dst)?);
        let ok = match rel {
            Relation::HasAttr => {
                matches!(sk, NodeKind::Object | NodeKind::Attribute) && dk == NodeKind::Attribute
            }
            Relation::HasPart => sk == NodeKind::Object && dk == NodeKind::Object,
            Relation::ActHasSubj | Relation::ActHasObj => {
                sk == NodeKind::Action && dk == NodeKind::Object
            }
            Relation::IsActSubj | Relation::IsActObj => {
                sk == NodeKind::Object && dk == NodeKind::Action
            }
        };
        if !ok {
            return Err(invalid(format!(
                "{} cannot link {} to {}",
                rel.as_str(),
                sk.as_str(),
                dk.as_str()
            )));
        }
        self.edges.insert(Edge { src, rel, dst });
        if let Some(m) = rel.mirror() {
            self.edges.insert(Edge {
                src: dst,
                rel: m,
                dst: src,
            });
        }
        Ok(())
    }

    /// Checks node ids, endpoint kinds and mirror closure.
    pub fn validate(&self) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(invalid(format!("node at position {i} has id {}", n.id)));
            }
        }
        let mut probe = SemanticGraph {
            nodes: self.nodes.clone(),
            edges: BTreeSet::new(),
        };
        for e in &self.edges {
            probe.add_edge(e.src, e.rel, e.dst)?;
        }
        if probe.edges != self.edges {
            return Err(invalid("action-argument edges are not mirror-closed"));
        }
        Ok(())
    }

    /// Stable text form: one `node` line per node in span order, then one
    /// `edge` line per edge in `(src, rel, dst)` order.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&format!(
                "node\t{}\t{}\t{}\t{}\t{}..{}\n",
                n.id,
                n.kind.as_str(),
                n.lemma,
                n.text,
                n.span.0,
                n.span.1
            ));
        }
        for e in &self.edges {
            out.push_str(&format!("edge\t{}\t{}\t{}\n", e.src, e.rel.as_str(), e.dst));
        }
        out
    }

    /// Human-readable facts, e.g. `cat has_attr black`.
    pub fn facts(&self) -> Vec<String> {
        self.edges
            .iter()
            .map(|e| {
                format!(
                    "{} {} {}",
                    self.nodes[e.src].lemma,
                    e.rel.as_str(),
                    self.nodes[e.dst].lemma
                )
            })
            .collect()
    }
}

impl fmt::Display for SemanticGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

/// Caption complexity level `C<k>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct ComplexityLevel(pub usize);

impl fmt::Display for ComplexityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

/// Number of relations attached directly to object `id`: its attributes,
/// parts, and the actions it participates in (one per participation).
pub fn object_relation_count(graph: &SemanticGraph, id: usize) -> usize {
    graph
        .edges
        .iter()
        .filter(|e| e.src == id && e.rel.counts_for_object())
        .count()
}

/// Maximum relation count over all objects; `C0` for a graph without objects.
pub fn complexity(graph: &SemanticGraph) -> ComplexityLevel {
    ComplexityLevel(
        graph
            .nodes_of(NodeKind::Object)
            .map(|o| object_relation_count(graph, o.id))
            .max()
            .unwrap_or(0),
    )
}

pub fn action_count(graph: &SemanticGraph) -> usize {
    graph.nodes_of(NodeKind::Action).count()
}

pub fn is_excluded_verb(lemma: &str) -> bool {
    EXCLUDED_VERBS.contains(&lemma.to_lowercase().as_str())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Object,
    /// Attribute of the node carried by the given token.
    Attribute(usize),
    None,
}

struct Builder<'a> {
    tokens: &'a [Token],
    parse: &'a DependencyParse,
    roles: Vec<Option<Role>>,
}

impl<'a> Builder<'a> {
    fn new(parse: &'a DependencyParse) -> Self {
        Self {
            tokens: parse.tokens(),
            parse,
            roles: vec![None; parse.len()],
        }
    }

    fn lemma(&self, i: usize) -> String {
        let t = &self.tokens[i];
        let l = if t.lemma.is_empty() || t.lemma == "_" {
            &t.form
        } else {
            &t.lemma
        };
        l.to_lowercase()
    }

    fn rel(&self, i: usize) -> &str {
        &self.tokens[i].deprel
    }

    fn children_with(&self, head: usize, rels: &[&str]) -> Vec<usize> {
        self.parse
            .children(head)
            .filter(|&c| rels.contains(&self.rel(c)))
            .collect()
    }

    fn has_node(&mut self, i: usize) -> bool {
        !matches!(self.role(i), Role::None)
    }

    fn is_object(&mut self, i: usize) -> bool {
        self.role(i) == Role::Object
    }

    fn is_action(&self, i: usize) -> bool {
        let t = &self.tokens[i];
        t.upos == Upos::Verb && !is_excluded_verb(&self.lemma(i))
    }

    fn role(&mut self, i: usize) -> Role {
        if let Some(r) = self.roles[i] {
            return r;
        }
        // Provisional value; head chains are acyclic so this is never read
        // during its own resolution.
        self.roles[i] = Some(Role::None);
        let r = self.resolve(i);
        self.roles[i] = Some(r);
        r
    }

    fn resolve(&mut self, i: usize) -> Role {
        let t = &self.tokens[i];
        let head = t.head;
        let rel = t.base_rel().to_string();
        match t.upos {
            Upos::Noun => match head {
                Some(h) if rel == "compound" && self.has_node(h) => Role::Attribute(h),
                _ => Role::Object,
            },
            Upos::Adj | Upos::Num => {
                if let Some(h) = head {
                    match rel.as_str() {
                        "amod" | "nummod" | "advmod" | "compound" if self.has_node(h) => {
                            return Role::Attribute(h)
                        }
                        "conj" => {
                            if let Role::Attribute(target) = self.role(h) {
                                return Role::Attribute(target);
                            }
                        }
                        "xcomp" | "acomp" if self.is_linking_verb(h) => {
                            if let Some(s) = self.subject_object(h) {
                                return Role::Attribute(s);
                            }
                        }
                        _ => {}
                    }
                }
                if t.upos == Upos::Adj && !self.children_with(i, &["cop"]).is_empty() {
                    if let Some(s) = self.subject_object(i) {
                        return Role::Attribute(s);
                    }
                }
                Role::None
            }
            Upos::Verb => match head {
                Some(h) if rel == "amod" && self.has_node(h) => Role::Attribute(h),
                _ => Role::None,
            },
            _ => Role::None,
        }
    }

    fn is_linking_verb(&self, i: usize) -> bool {
        matches!(self.lemma(i).as_str(), "be" | "look" | "seem")
    }

    fn subject_object(&mut self, clause: usize) -> Option<usize> {
        self.children_with(clause, &["nsubj"])
            .into_iter()
            .find(|&s| self.is_object(s))
    }

    /// `i` plus every object coordinated with it through `conj` chains.
    fn with_conjuncts(&mut self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut k = 0;
        while k < out.len() {
            let cur = out[k];
            for c in self.children_with(cur, &["conj"]) {
                if self.is_object(c) && !out.contains(&c) {
                    out.push(c);
                }
            }
            k += 1;
        }
        out.retain(|&x| self.is_object(x));
        out
    }

    /// Nouns under the adposition "with" attached to `i` (UD and spaCy styles).
    fn is_with_part(&mut self, i: usize) -> Option<usize> {
        let t = &self.tokens[i];
        let h = t.head?;
        match t.deprel.as_str() {
            "nmod" => {
                let with = self
                    .children_with(i, &["case"])
                    .into_iter()
                    .any(|c| self.lemma(c) == "with");
                (with && self.is_object(h)).then_some(h)
            }
            "pobj" => {
                let prep = &self.tokens[h];
                let g = prep.head?;
                (prep.upos == Upos::Adp && self.lemma(h) == "with" && self.is_object(g))
                    .then_some(g)
            }
            _ => None,
        }
    }

    fn action_arguments(&mut self, v: usize) -> (Vec<usize>, Vec<usize>) {
        let mut subj = Vec::new();
        let mut obj = Vec::new();
        let mut has_pronoun_subject = false;
        for c in self.parse.children(v).collect::<Vec<_>>() {
            let rel = self.rel(c).to_string();
            match rel.as_str() {
                "nsubj" => {
                    if self.is_object(c) {
                        subj.extend(self.with_conjuncts(c));
                    } else {
                        has_pronoun_subject = true;
                    }
                }
                "nsubj:pass" | "nsubjpass" | "obj" | "dobj" => {
                    if self.is_object(c) {
                        obj.extend(self.with_conjuncts(c));
                    }
                }
                "obl:agent" => {
                    if self.is_object(c) {
                        subj.extend(self.with_conjuncts(c));
                    }
                }
                "agent" => {
                    for p in self.children_with(c, &["pobj"]) {
                        if self.is_object(p) {
                            subj.extend(self.with_conjuncts(p));
                        }
                    }
                }
                _ => {}
            }
        }
        let t = &self.tokens[v];
        if let Some(h) = t.head {
            let rel = t.deprel.as_str();
            let clausal = matches!(rel, "acl" | "acl:relcl" | "relcl");
            if clausal && self.is_object(h) {
                if subj.is_empty() {
                    subj.push(h);
                } else if rel != "acl" && obj.is_empty() && !has_pronoun_subject {
                    obj.push(h);
                }
            }
        }
        (subj, obj)
    }
}

/// Extracts the semantic graph of a parsed caption.
pub fn build_graph(parse: &DependencyParse) -> SemanticGraph {
    let mut b = Builder::new(parse);
    let n = parse.len();

    // (token, kind) for every node; nodes are numbered in this order.
    let mut specs: Vec<(usize, NodeKind)> = Vec::new();
    for i in 0..n {
        match b.role(i) {
            Role::Object => specs.push((i, NodeKind::Object)),
            Role::Attribute(_) => specs.push((i, NodeKind::Attribute)),
            Role::None => {}
        }
        if b.is_action(i) {
            specs.push((i, NodeKind::Action));
        }
    }
    specs.sort();

    let mut graph = SemanticGraph::new();
    let mut ids: BTreeMap<(usize, NodeKind), usize> = BTreeMap::new();
    for &(tok, kind) in &specs {
        let id = graph.add_node(kind, &b.lemma(tok), &parse.tokens()[tok].form, (tok, tok + 1));
        ids.insert((tok, kind), id);
    }
    let entity = |tok: usize| {
        ids.get(&(tok, NodeKind::Object))
            .or_else(|| ids.get(&(tok, NodeKind::Attribute)))
            .copied()
    };

    let mut edges: Vec<(usize, Relation, usize)> = Vec::new();
    for i in 0..n {
        if let Role::Attribute(target) = b.role(i) {
            if let (Some(src), Some(&dst)) = (entity(target), ids.get(&(i, NodeKind::Attribute))) {
                edges.push((src, Relation::HasAttr, dst));
            }
        }
        if b.is_object(i) {
            if let Some(whole) = b.is_with_part(i) {
                for part in b.with_conjuncts(i) {
                    edges.push((ids[&(whole, NodeKind::Object)], Relation::HasPart, ids[&(part, NodeKind::Object)]));
                }
            }
        }
        let t = &parse.tokens()[i];
        if t.upos == Upos::Verb && b.lemma(i) == "have" {
            let (subj, obj) = b.action_arguments(i);
            for &s in &subj {
                for &o in &obj {
                    edges.push((ids[&(s, NodeKind::Object)], Relation::HasPart, ids[&(o, NodeKind::Object)]));
                }
            }
        }
        if let Some(&act) = ids.get(&(i, NodeKind::Action)) {
            if t.base_rel() == "amod" {
                continue;
            }
            let (subj, obj) = b.action_arguments(i);
            for s in subj {
                edges.push((act, Relation::ActHasSubj, ids[&(s, NodeKind::Object)]));
            }
            for o in obj {
                edges.push((act, Relation::ActHasObj, ids[&(o, NodeKind::Object)]));
            }
        }
    }
    for (src, rel, dst) in edges {
        if src == dst {
            continue;
        }
        graph
            .add_edge(src, rel, dst)
            .expect("rule layer only emits well-typed edges");
    }
    graph
}
