//! Hand-engineered features for a phrase pair in its sentence context.
//!
//! Eleven families, each tagged with one of five ablation groups:
//!
//! | family | content                                   | group                |
//! |--------|-------------------------------------------|----------------------|
//! | 1      | POS count vectors and their cosine        | `PoS_tagging`        |
//! | 2      | manual POS-change patterns                | `PoS_tagging`        |
//! | 3      | lengths, length ratios, edit distance     | `surface`            |
//! | 4      | constituency tag comparisons              | `syntactic_analysis` |
//! | 5      | dependency relation counts                | `syntactic_analysis` |
//! | 6      | embedding cosine                          | `external_resource`  |
//! | 7      | concept-graph linkage                     | `external_resource`  |
//! | 8      | derivation ratio                          | `external_resource`  |
//! | 9      | translation entropy                       | `word_alignment`     |
//! | 10     | bidirectional lexical weighting           | `word_alignment`     |
//! | 11     | gap to the most probable translation      | `word_alignment`     |

mod alignment;
mod export;
pub mod math;
mod lexicon;
mod pos;
mod segment;
mod surface;
mod syntax;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedSentencePair, PairRef, PhrasePair};
use crate::resources::ResourceSet;

pub use alignment::{
    f10_lexical_weighting, f11_probability_gap, f9_translation_entropy, lexical_weighting,
    LexicalWeight,
};
pub use export::{read_matrix, write_matrix, FeatureMatrix, MatrixRow};
pub use lexicon::{f6_embedding_similarity, f7_concept_link, f8_derivation_ratio, segment_vector, Linkage};
pub use pos::{f1_pos_profile, f2_pos_pattern};
pub use segment::SegmentView;
pub use surface::f3_surface;
pub use syntax::{f4_constituency, f5_dependency};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    #[serde(rename = "PoS_tagging")]
    PosTagging,
    #[serde(rename = "surface")]
    Surface,
    #[serde(rename = "syntactic_analysis")]
    SyntacticAnalysis,
    #[serde(rename = "external_resource")]
    ExternalResource,
    #[serde(rename = "word_alignment")]
    WordAlignment,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::PosTagging,
        FeatureGroup::Surface,
        FeatureGroup::SyntacticAnalysis,
        FeatureGroup::ExternalResource,
        FeatureGroup::WordAlignment,
    ];

    pub fn of_family(family: u8) -> FeatureGroup {
        match family {
            1 | 2 => FeatureGroup::PosTagging,
            3 => FeatureGroup::Surface,
            4 | 5 => FeatureGroup::SyntacticAnalysis,
            6..=8 => FeatureGroup::ExternalResource,
            9..=11 => FeatureGroup::WordAlignment,
            _ => panic!("no feature family {family}"),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::PosTagging => "PoS_tagging",
            FeatureGroup::Surface => "surface",
            FeatureGroup::SyntacticAnalysis => "syntactic_analysis",
            FeatureGroup::ExternalResource => "external_resource",
            FeatureGroup::WordAlignment => "word_alignment",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown feature group `{s}`"))
    }
}

/// Which feature families take part in a run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureMask {
    families: BTreeSet<u8>,
}

impl FeatureMask {
    pub fn all() -> Self {
        FeatureMask {
            families: (1..=11).collect(),
        }
    }

    pub fn groups(groups: impl IntoIterator<Item = FeatureGroup>) -> Self {
        let groups: BTreeSet<_> = groups.into_iter().collect();
        FeatureMask {
            families: (1..=11)
                .filter(|&f| groups.contains(&FeatureGroup::of_family(f)))
                .collect(),
        }
    }

    pub fn without_group(group: FeatureGroup) -> Self {
        Self::groups(FeatureGroup::ALL.into_iter().filter(|g| *g != group))
    }

    pub fn families(families: impl IntoIterator<Item = u8>) -> Self {
        let families: BTreeSet<u8> = families.into_iter().collect();
        assert!(families.iter().all(|f| (1..=11).contains(f)), "families are 1..=11");
        FeatureMask { families }
    }

    pub fn contains(&self, family: u8) -> bool {
        self.families.contains(&family)
    }

    pub fn family_list(&self) -> Vec<u8> {
        self.families.iter().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.families.is_empty()
    }

    pub fn label(&self) -> String {
        if *self == Self::all() {
            return "all".into();
        }
        for g in FeatureGroup::ALL {
            if *self == Self::groups([g]) {
                return g.to_string();
            }
            if *self == Self::without_group(g) {
                return format!("all-{g}");
            }
        }
        let fams: Vec<String> = self.families.iter().map(|f| format!("f{f}")).collect();
        fams.join("+")
    }
}

impl Default for FeatureMask {
    fn default() -> Self {
        Self::all()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureSpec {
    pub name: String,
    pub family: u8,
    pub group: FeatureGroup,
}

/// Values for one phrase pair, with the shared column description.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub specs: Arc<[FeatureSpec]>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureSpec, f64)> {
        self.specs.iter().zip(self.values.iter().copied())
    }
}

/// Collects feature values, and their names when asked to.
#[derive(Debug, Default)]
pub struct FeatureSink {
    family: u8,
    names: Option<Vec<FeatureSpec>>,
    values: Vec<f64>,
}

impl FeatureSink {
    pub fn new(with_names: bool) -> Self {
        FeatureSink {
            family: 0,
            names: with_names.then(Vec::new),
            values: Vec::new(),
        }
    }

    pub fn family(&mut self, family: u8) -> &mut Self {
        self.family = family;
        self
    }

    pub fn push(&mut self, name: impl FnOnce() -> String, value: f64) {
        debug_assert!(value.is_finite(), "non-finite feature value");
        if let Some(names) = &mut self.names {
            names.push(FeatureSpec {
                name: name(),
                family: self.family,
                group: FeatureGroup::of_family(self.family),
            });
        }
        self.values.push(value);
    }

    pub fn flag(&mut self, name: impl FnOnce() -> String, on: bool) {
        self.push(name, if on { 1.0 } else { 0.0 });
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn specs(&self) -> Option<&[FeatureSpec]> {
        self.names.as_deref()
    }

    /// Value of a named feature; only available on a naming sink.
    pub fn get(&self, name: &str) -> Option<f64> {
        let names = self.names.as_ref()?;
        names.iter().position(|s| s.name == name).map(|i| self.values[i])
    }
}

/// Which constituent stands for a span in family 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverRule {
    /// Deepest node covering the span.
    #[default]
    Minimal,
    /// Highest node of the unary chain that holds the deepest cover.
    Topmost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub cover_rule: CoverRule,
    /// Restrict family 11 to content words.
    pub gap_content_only: bool,
}

/// Computes feature vectors against a fixed resource set.
pub struct FeatureExtractor<'r> {
    resources: &'r ResourceSet,
    config: FeatureConfig,
    mask: FeatureMask,
    specs: Arc<[FeatureSpec]>,
}

impl<'r> FeatureExtractor<'r> {
    pub fn new(resources: &'r ResourceSet, config: FeatureConfig, mask: FeatureMask) -> Self {
        let mut ex = FeatureExtractor {
            resources,
            config,
            mask,
            specs: Arc::from(Vec::new()),
        };
        let mut sink = FeatureSink::new(true);
        ex.fill(&probe_sentence(), &probe_sentence().phrase_pairs[0], &mut sink);
        ex.specs = Arc::from(sink.names.unwrap_or_default());
        ex
    }

    pub fn specs(&self) -> &Arc<[FeatureSpec]> {
        &self.specs
    }

    pub fn mask(&self) -> &FeatureMask {
        &self.mask
    }

    fn fill(&self, sent: &AnnotatedSentencePair, pair: &PhrasePair, sink: &mut FeatureSink) {
        let res = self.resources;
        let lists = &res.lists;
        let src = SegmentView::source(sent, pair, lists);
        let tgt = SegmentView::target(sent, pair, lists);
        for family in 1..=11u8 {
            if !self.mask.contains(family) {
                continue;
            }
            sink.family(family);
            match family {
                1 => f1_pos_profile(&src, &tgt, sink),
                2 => f2_pos_pattern(&src, &tgt, lists, sink),
                3 => f3_surface(&src, &tgt, sink),
                4 => f4_constituency(pair, sent, lists, self.config.cover_rule, sink),
                5 => f5_dependency(pair, sent, sink),
                6 => f6_embedding_similarity(&src, &tgt, &res.embeddings, sink),
                7 => f7_concept_link(&src, &tgt, &res.concepts, lists, sink),
                8 => f8_derivation_ratio(&src, &tgt, &res.concepts, sink),
                9 => f9_translation_entropy(&src, &tgt, &res.translation, sink),
                10 => f10_lexical_weighting(pair, sent, lists, &res.translation, sink),
                11 => f11_probability_gap(&src, &tgt, &res.translation, self.config.gap_content_only, sink),
                _ => unreachable!(),
            }
        }
    }

    /// Features for one phrase pair.
    pub fn assemble(&self, sent: &AnnotatedSentencePair, pair: &PhrasePair) -> FeatureVector {
        let mut sink = FeatureSink::new(false);
        self.fill(sent, pair, &mut sink);
        debug_assert_eq!(sink.values.len(), self.specs.len());
        FeatureVector {
            specs: Arc::clone(&self.specs),
            values: sink.values,
        }
    }

    /// Features for every phrase pair of a corpus, in corpus order.
    pub fn extract_all(&self, corpus: &[AnnotatedSentencePair], refs: &[PairRef]) -> Vec<Vec<f64>> {
        refs.par_iter()
            .map(|r| {
                let sent = &corpus[r.sentence];
                self.assemble(sent, &sent.phrase_pairs[r.pair]).values
            })
            .collect()
    }
}

/// A tiny sentence used to enumerate feature names.
fn probe_sentence() -> AnnotatedSentencePair {
    use crate::corpus::{RawLabel, SideAnnotation, Span, Token, Upos};
    let side = |w: &str| SideAnnotation {
        tokens: vec![Token::new(0, w, w, Upos::Noun)],
        deps: Vec::new(),
        tree: None,
    };
    AnnotatedSentencePair {
        id: "probe".into(),
        src: side("probe"),
        tgt: side("sonde"),
        alignment: Vec::new(),
        phrase_pairs: vec![PhrasePair {
            src_span: Span::new(0, 1),
            tgt_span: Span::new(0, 1),
            label: RawLabel::Literal,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_assignment() {
        let expect = [
            (1, FeatureGroup::PosTagging),
            (2, FeatureGroup::PosTagging),
            (3, FeatureGroup::Surface),
            (4, FeatureGroup::SyntacticAnalysis),
            (5, FeatureGroup::SyntacticAnalysis),
            (6, FeatureGroup::ExternalResource),
            (7, FeatureGroup::ExternalResource),
            (8, FeatureGroup::ExternalResource),
            (9, FeatureGroup::WordAlignment),
            (10, FeatureGroup::WordAlignment),
            (11, FeatureGroup::WordAlignment),
        ];
        for (f, g) in expect {
            assert_eq!(FeatureGroup::of_family(f), g);
        }
    }

    #[test]
    fn mask_labels() {
        assert_eq!(FeatureMask::all().label(), "all");
        assert_eq!(
            FeatureMask::without_group(FeatureGroup::ExternalResource).label(),
            "all-external_resource"
        );
        assert_eq!(FeatureMask::families([10]).label(), "f10");
        assert_eq!(FeatureMask::groups([FeatureGroup::Surface]).label(), "surface");
    }
}
