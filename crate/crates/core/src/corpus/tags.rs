//! Unified tag inventories shared by both languages.
//!
//! Upstream taggers and parsers emit language-specific tags; the
//! preprocessing adapter maps them onto these closed sets before a bundle
//! is written. Anything outside these sets is rejected at load time.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! closed_tag_set {
    (
        $(#[$meta:meta])*
        $name:ident, $what:literal, { $($variant:ident => $text:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// Position in [`Self::ALL`]; used as a stable feature index.
            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl FromStr for $name {
            type Err = UnknownTag;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(UnknownTag { kind: $what, tag: s.to_string() }),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} tag `{tag}`")]
pub struct UnknownTag {
    pub kind: &'static str,
    pub tag: String,
}

closed_tag_set! {
    /// Universal part-of-speech tags (UD v2 inventory).
    Upos, "POS", {
        Adj => "ADJ",
        Adp => "ADP",
        Adv => "ADV",
        Aux => "AUX",
        Cconj => "CCONJ",
        Det => "DET",
        Intj => "INTJ",
        Noun => "NOUN",
        Num => "NUM",
        Part => "PART",
        Pron => "PRON",
        Propn => "PROPN",
        Punct => "PUNCT",
        Sconj => "SCONJ",
        Sym => "SYM",
        Verb => "VERB",
        X => "X",
    }
}

impl Upos {
    /// Tags that count as content words.
    pub const CONTENT: [Upos; 5] = [Upos::Adj, Upos::Adv, Upos::Noun, Upos::Propn, Upos::Verb];
}

closed_tag_set! {
    /// Universal dependency relations (UD v2 base labels, no subtypes).
    DepRel, "dependency", {
        Acl => "acl",
        Advcl => "advcl",
        Advmod => "advmod",
        Amod => "amod",
        Appos => "appos",
        Aux => "aux",
        Case => "case",
        Cc => "cc",
        Ccomp => "ccomp",
        Clf => "clf",
        Compound => "compound",
        Conj => "conj",
        Cop => "cop",
        Csubj => "csubj",
        Dep => "dep",
        Det => "det",
        Discourse => "discourse",
        Dislocated => "dislocated",
        Expl => "expl",
        Fixed => "fixed",
        Flat => "flat",
        Goeswith => "goeswith",
        Iobj => "iobj",
        List => "list",
        Mark => "mark",
        Nmod => "nmod",
        Nsubj => "nsubj",
        Nummod => "nummod",
        Obj => "obj",
        Obl => "obl",
        Orphan => "orphan",
        Parataxis => "parataxis",
        Punct => "punct",
        Reparandum => "reparandum",
        Root => "root",
        Vocative => "vocative",
        Xcomp => "xcomp",
    }
}

closed_tag_set! {
    /// Unified non-terminal labels for constituency trees.
    PhraseTag, "constituent", {
        S => "S",
        Sbar => "SBAR",
        Np => "NP",
        Vp => "VP",
        Pp => "PP",
        Adjp => "ADJP",
        Advp => "ADVP",
        Qp => "QP",
        Prt => "PRT",
        Intj => "INTJP",
        Frag => "FRAG",
        Xp => "XP",
    }
}

/// Label of a constituency node: a phrase tag for internal nodes, a POS tag
/// for pre-terminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeLabel {
    Phrase(PhraseTag),
    Word(Upos),
}

impl NodeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeLabel::Phrase(p) => p.as_str(),
            NodeLabel::Word(u) => u.as_str(),
        }
    }
}

impl FromStr for NodeLabel {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(p) = s.parse::<PhraseTag>() {
            return Ok(NodeLabel::Phrase(p));
        }
        s.parse::<Upos>().map(NodeLabel::Word).map_err(|_| UnknownTag {
            kind: "constituent",
            tag: s.to_string(),
        })
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for NodeLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for NodeLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        for t in Upos::ALL {
            assert_eq!(t.as_str().parse::<Upos>().unwrap(), *t);
        }
        for t in DepRel::ALL {
            assert_eq!(t.as_str().parse::<DepRel>().unwrap(), *t);
        }
        assert_eq!(Upos::ALL.len(), 17);
        assert_eq!(DepRel::ALL.len(), 37);
    }

    #[test]
    fn unknown_tags_are_rejected() {
        assert!("NN".parse::<Upos>().is_err());
        assert!("nmod:poss".parse::<DepRel>().is_err());
        let err = "VBZ".parse::<NodeLabel>().unwrap_err();
        assert_eq!(err.kind, "constituent");
    }

    #[test]
    fn node_label_prefers_phrase_tags() {
        assert_eq!("VP".parse::<NodeLabel>().unwrap(), NodeLabel::Phrase(PhraseTag::Vp));
        assert_eq!("VERB".parse::<NodeLabel>().unwrap(), NodeLabel::Word(Upos::Verb));
    }
}
