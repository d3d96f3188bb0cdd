//! Annotated bilingual sentences and the labeled phrase pairs inside them.

mod bundle;
mod labels;
mod normalize;
pub mod tags;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use bundle::{load_bundle, read_bundle, write_bundle, BUNDLE_FORMAT_VERSION};
pub use labels::{class_census, map_label, Census, ProcessLabel, RawLabel};
pub use normalize::{normalize_sentence, normalize_tokens, Language, NormalizationRules, Normalized};
pub use tags::{DepRel, NodeLabel, PhraseTag, Upos};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("record {record}: malformed field `{field}`: {message}")]
    Malformed {
        record: usize,
        field: String,
        message: String,
    },
    #[error("record {record} (`{id}`): {message}")]
    Invalid {
        record: usize,
        id: String,
        message: String,
    },
    #[error("record {record}: duplicate sentence id `{id}`")]
    DuplicateId { record: usize, id: String },
    #[error("record {record}: unsupported format_version {version}")]
    UnsupportedVersion { record: usize, version: u32 },
    #[error("unknown translation process label `{0}`")]
    UnknownLabel(String),
}

/// Half-open token range `[start, end)`. Serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }

    pub fn covers(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from(a: [usize; 2]) -> Self {
        Span::new(a[0], a[1])
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub upos: Upos,
}

impl Token {
    pub fn new(index: usize, surface: &str, lemma: &str, upos: Upos) -> Self {
        Token {
            index,
            surface: surface.to_string(),
            lemma: lemma.to_string(),
            upos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DependencyArc {
    pub head: usize,
    pub dependent: usize,
    pub relation: DepRel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstituencyNode {
    pub label: NodeLabel,
    pub span: Span,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ConstituencyNode>,
}

impl ConstituencyNode {
    pub fn leaf(label: Upos, index: usize) -> Self {
        ConstituencyNode {
            label: NodeLabel::Word(label),
            span: Span::new(index, index + 1),
            children: Vec::new(),
        }
    }

    pub fn phrase(label: PhraseTag, children: Vec<ConstituencyNode>) -> Self {
        let start = children.first().map_or(0, |c| c.span.start);
        let end = children.last().map_or(0, |c| c.span.end);
        ConstituencyNode {
            label: NodeLabel::Phrase(label),
            span: Span::new(start, end),
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Deepest node whose span covers `target`. Among a unary chain of nodes
    /// sharing that span, `topmost` selects the highest one instead.
    pub fn covering(&self, target: Span, topmost: bool) -> Option<&ConstituencyNode> {
        if !self.span.covers(target) {
            return None;
        }
        for child in &self.children {
            if let Some(found) = child.covering(target, topmost) {
                if topmost && found.span == self.span {
                    return Some(self);
                }
                return Some(found);
            }
        }
        Some(self)
    }

    fn check(&self, n_tokens: usize) -> Result<(), String> {
        if self.span.is_empty() || self.span.end > n_tokens {
            return Err(format!(
                "tree node {} has span [{}, {}) outside 0..{}",
                self.label, self.span.start, self.span.end, n_tokens
            ));
        }
        if self.is_leaf() {
            if self.span.len() != 1 {
                return Err(format!(
                    "tree leaf {} spans {} tokens",
                    self.label,
                    self.span.len()
                ));
            }
            return Ok(());
        }
        let mut cursor = self.span.start;
        for child in &self.children {
            if child.span.start != cursor {
                return Err(format!(
                    "children of {} [{}, {}) do not tile its span",
                    self.label, self.span.start, self.span.end
                ));
            }
            child.check(n_tokens)?;
            cursor = child.span.end;
        }
        if cursor != self.span.end {
            return Err(format!(
                "children of {} [{}, {}) do not tile its span",
                self.label, self.span.start, self.span.end
            ));
        }
        Ok(())
    }
}

/// Word-alignment link between a source and a target token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct AlignmentLink {
    pub src: usize,
    pub tgt: usize,
}

impl From<[usize; 2]> for AlignmentLink {
    fn from(a: [usize; 2]) -> Self {
        AlignmentLink { src: a[0], tgt: a[1] }
    }
}

impl From<AlignmentLink> for [usize; 2] {
    fn from(l: AlignmentLink) -> Self {
        [l.src, l.tgt]
    }
}

/// Everything known about one side (English or French) of a sentence pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideAnnotation {
    pub tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deps: Vec<DependencyArc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<ConstituencyNode>,
}

impl SideAnnotation {
    fn check(&self, side: &str) -> Result<(), String> {
        let n = self.tokens.len();
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i {
                return Err(format!("{side} token {i} carries index {}", t.index));
            }
        }
        for arc in &self.deps {
            if arc.head == arc.dependent {
                return Err(format!("{side} arc {} is a self-loop", arc.head));
            }
            if arc.head >= n || arc.dependent >= n {
                return Err(format!(
                    "{side} arc {}->{} outside 0..{n}",
                    arc.head, arc.dependent
                ));
            }
        }
        if let Some(tree) = &self.tree {
            if tree.span != Span::new(0, n) {
                return Err(format!("{side} tree root does not span the sentence"));
            }
            tree.check(n).map_err(|m| format!("{side} {m}"))?;
        }
        Ok(())
    }
}

/// One labeled phrase pair: an English span and the French span that
/// translates it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhrasePair {
    pub src_span: Span,
    pub tgt_span: Span,
    pub label: RawLabel,
}

impl PhrasePair {
    pub fn process(&self) -> ProcessLabel {
        self.label.process()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentencePair {
    pub id: String,
    pub src: SideAnnotation,
    pub tgt: SideAnnotation,
    #[serde(default)]
    pub alignment: Vec<AlignmentLink>,
    #[serde(default)]
    pub phrase_pairs: Vec<PhrasePair>,
}

impl AnnotatedSentencePair {
    /// Checks every structural invariant, returning a description of the
    /// first violation.
    pub fn validate(&self) -> Result<(), String> {
        self.src.check("src")?;
        self.tgt.check("tgt")?;
        let (ns, nt) = (self.src.tokens.len(), self.tgt.tokens.len());
        let mut seen = std::collections::HashSet::new();
        for link in &self.alignment {
            if link.src >= ns || link.tgt >= nt {
                return Err(format!(
                    "alignment link ({}, {}) outside {ns}x{nt}",
                    link.src, link.tgt
                ));
            }
            if !seen.insert(*link) {
                return Err(format!("duplicate alignment link ({}, {})", link.src, link.tgt));
            }
        }
        for (k, pp) in self.phrase_pairs.iter().enumerate() {
            if pp.src_span.is_empty() || pp.src_span.end > ns {
                return Err(format!(
                    "phrase pair {k}: src span [{}, {}) outside 0..{ns}",
                    pp.src_span.start, pp.src_span.end
                ));
            }
            if pp.tgt_span.is_empty() || pp.tgt_span.end > nt {
                return Err(format!(
                    "phrase pair {k}: tgt span [{}, {}) outside 0..{nt}",
                    pp.tgt_span.start, pp.tgt_span.end
                ));
            }
        }
        Ok(())
    }

    pub fn src_tokens(&self, pp: &PhrasePair) -> &[Token] {
        &self.src.tokens[pp.src_span.range()]
    }

    pub fn tgt_tokens(&self, pp: &PhrasePair) -> &[Token] {
        &self.tgt.tokens[pp.tgt_span.range()]
    }
}

/// Address of a phrase pair inside a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairRef {
    pub sentence: usize,
    pub pair: usize,
}

/// Flattens a corpus into phrase-pair addresses, in corpus order.
pub fn pair_refs(corpus: &[AnnotatedSentencePair]) -> Vec<PairRef> {
    corpus
        .iter()
        .enumerate()
        .flat_map(|(s, sent)| {
            (0..sent.phrase_pairs.len()).map(move |p| PairRef { sentence: s, pair: p })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree() -> ConstituencyNode {
        // (S (NP DET NOUN) (VP VERB))
        ConstituencyNode::phrase(
            PhraseTag::S,
            vec![
                ConstituencyNode::phrase(
                    PhraseTag::Np,
                    vec![
                        ConstituencyNode::leaf(Upos::Det, 0),
                        ConstituencyNode::leaf(Upos::Noun, 1),
                    ],
                ),
                ConstituencyNode::phrase(PhraseTag::Vp, vec![ConstituencyNode::leaf(Upos::Verb, 2)]),
            ],
        )
    }

    #[test]
    fn covering_minimal_and_topmost() {
        let t = tree();
        assert_eq!(t.covering(Span::new(0, 2), false).unwrap().label.as_str(), "NP");
        assert_eq!(t.covering(Span::new(1, 3), false).unwrap().label.as_str(), "S");
        assert_eq!(t.covering(Span::new(2, 3), false).unwrap().label.as_str(), "VERB");
        assert_eq!(t.covering(Span::new(2, 3), true).unwrap().label.as_str(), "VP");
        assert!(t.covering(Span::new(2, 4), false).is_none());
    }

    #[test]
    fn tree_tiling_is_checked() {
        let mut t = tree();
        assert!(t.check(3).is_ok());
        t.children[1].span = Span::new(3, 3);
        assert!(t.check(3).is_err());
    }
}
