use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use super::ResourceError;
use crate::corpus::{PhraseTag, Upos};

/// A source-to-target POS sequence change such as `ADV -> ADP NOUN ADJ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PosPattern {
    pub src: Vec<Upos>,
    pub tgt: Vec<Upos>,
}

impl PosPattern {
    pub fn matches(&self, src: &[Upos], tgt: &[Upos]) -> bool {
        self.src == src && self.tgt == tgt
    }
}

impl FromStr for PosPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lhs, rhs) = s
            .split_once('\u{2192}')
            .or_else(|| s.split_once("->"))
            .ok_or_else(|| format!("pattern `{s}` has no arrow"))?;
        let side = |part: &str| -> Result<Vec<Upos>, String> {
            let tags = part
                .split_whitespace()
                .map(|t| t.parse::<Upos>().map_err(|e| format!("pattern `{s}`: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            if tags.is_empty() {
                return Err(format!("pattern `{s}` has an empty side"));
            }
            Ok(tags)
        };
        Ok(PosPattern {
            src: side(lhs)?,
            tgt: side(rhs)?,
        })
    }
}

impl fmt::Display for PosPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |tags: &[Upos]| tags.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(" ");
        write!(f, "{} -> {}", join(&self.src), join(&self.tgt))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManualLists {
    pub pos_change_patterns: Vec<PosPattern>,
    /// Lowercased word forms dropped in the filtered segment view.
    pub filter_list: BTreeSet<String>,
    pub content_tags: BTreeSet<Upos>,
    /// Word tag to the phrase tags it corresponds to (`VERB -> VP`).
    pub category_map: BTreeMap<Upos, BTreeSet<PhraseTag>>,
    pub derivation_relations: Vec<String>,
}

impl ManualLists {
    pub fn content_tag_set() -> BTreeSet<Upos> {
        Upos::CONTENT.into_iter().collect()
    }

    pub fn is_content(&self, tag: Upos) -> bool {
        self.content_tags.contains(&tag)
    }

    pub fn corresponds(&self, word: Upos, phrase: PhraseTag) -> bool {
        self.category_map.get(&word).is_some_and(|s| s.contains(&phrase))
    }

    pub fn filtered(&self, word: &str) -> bool {
        self.filter_list.contains(&word.to_lowercase())
    }
}

impl Default for ManualLists {
    /// The seed lists shipped in `fixtures/resources/manual_lists.toml`.
    fn default() -> Self {
        parse_manual_lists(DEFAULT_LISTS, "<builtin>").expect("builtin lists parse")
    }
}

pub const DEFAULT_LISTS: &str = include_str!("default_lists.toml");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ListsFile {
    content_tags: Vec<String>,
    #[serde(default)]
    filter_list: Vec<String>,
    #[serde(default)]
    pos_change_patterns: Vec<String>,
    #[serde(default)]
    category_map: BTreeMap<String, Vec<String>>,
    #[serde(default = "default_derivation")]
    derivation_relations: Vec<String>,
}

fn default_derivation() -> Vec<String> {
    crate::resources::ConceptGraph::DEFAULT_DERIVATION
        .iter()
        .map(|s| s.to_string())
        .collect()
}

pub fn load_manual_lists(path: impl AsRef<Path>) -> Result<ManualLists, ResourceError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ResourceError::io(&name, e))?;
    parse_manual_lists(&text, &name)
}

pub fn parse_manual_lists(text: &str, name: &str) -> Result<ManualLists, ResourceError> {
    let invalid = |message: String| ResourceError::Invalid {
        file: name.to_string(),
        message,
    };
    let raw: ListsFile = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
    let content_tags = raw
        .content_tags
        .iter()
        .map(|t| t.parse::<Upos>().map_err(|e| invalid(e.to_string())))
        .collect::<Result<BTreeSet<_>, _>>()?;
    if content_tags != ManualLists::content_tag_set() || raw.content_tags.len() != 5 {
        return Err(invalid(
            "content_tags must be exactly ADJ, ADV, NOUN, PROPN, VERB".into(),
        ));
    }
    let pos_change_patterns = raw
        .pos_change_patterns
        .iter()
        .map(|p| p.parse::<PosPattern>().map_err(invalid))
        .collect::<Result<Vec<_>, _>>()?;
    let mut category_map = BTreeMap::new();
    for (word, phrases) in &raw.category_map {
        let word: Upos = word.parse().map_err(|e: crate::corpus::tags::UnknownTag| invalid(e.to_string()))?;
        let set = phrases
            .iter()
            .map(|p| p.parse::<PhraseTag>().map_err(|e| invalid(e.to_string())))
            .collect::<Result<BTreeSet<_>, _>>()?;
        category_map.insert(word, set);
    }
    Ok(ManualLists {
        pos_change_patterns,
        filter_list: raw.filter_list.iter().map(|w| w.to_lowercase()).collect(),
        content_tags,
        category_map,
        derivation_relations: raw.derivation_relations,
    })
}
