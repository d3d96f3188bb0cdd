//! Text normalization applied before the neural pipelines: lowercasing,
//! clitic expansion and spelling digits out as words.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AlignmentLink, AnnotatedSentencePair, ConstituencyNode, DependencyArc, Span, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Fr,
}

impl Language {
    pub fn prefix(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Fr => "fr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationRules {
    pub lowercase: bool,
    /// Clitic form to its expansion. Keys ending in an apostrophe are
    /// elided prefixes (`l'`); keys starting with one, or `n't`, attach as
    /// suffixes. Expansions may contain several space-separated words.
    pub clitics: BTreeMap<String, String>,
    /// Word for each digit `0`..=`9`.
    pub digits: [String; 10],
}

impl NormalizationRules {
    pub fn english() -> Self {
        let clitics = [
            ("'re", "are"),
            ("'m", "am"),
            ("'ve", "have"),
            ("'ll", "will"),
            ("'d", "would"),
            ("n't", "not"),
            ("can't", "can not"),
            ("won't", "will not"),
        ];
        let digits = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"];
        Self::from_tables(&clitics, digits)
    }

    pub fn french() -> Self {
        let clitics = [
            ("l'", "le"),
            ("j'", "je"),
            ("c'", "ce"),
            ("d'", "de"),
            ("n'", "ne"),
            ("s'", "se"),
            ("m'", "me"),
            ("t'", "te"),
            ("qu'", "que"),
            ("jusqu'", "jusque"),
            ("lorsqu'", "lorsque"),
            ("puisqu'", "puisque"),
        ];
        let digits = ["zéro", "un", "deux", "trois", "quatre", "cinq", "six", "sept", "huit", "neuf"];
        Self::from_tables(&clitics, digits)
    }

    pub fn for_language(lang: Language) -> Self {
        match lang {
            Language::En => Self::english(),
            Language::Fr => Self::french(),
        }
    }

    fn from_tables(clitics: &[(&str, &str)], digits: [&str; 10]) -> Self {
        NormalizationRules {
            lowercase: true,
            clitics: clitics
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            digits: digits.map(str::to_string),
        }
    }

    fn normalize_word(&self, word: &str) -> Vec<String> {
        let mut w = word.replace('\u{2019}', "'");
        if self.lowercase {
            w = w.to_lowercase();
        }
        let pieces = self.expand_clitics(&w);
        pieces
            .into_iter()
            .map(|p| self.spell_digits(&p))
            .filter(|p| !p.is_empty())
            .collect()
    }

    fn expand_clitics(&self, w: &str) -> Vec<String> {
        let split = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        if let Some(exp) = self.clitics.get(w) {
            return split(exp);
        }
        // longest matching key wins
        let mut best: Option<(usize, Vec<String>)> = None;
        for (key, exp) in &self.clitics {
            if w.len() <= key.len() {
                continue;
            }
            let candidate = if key.ends_with('\'') && w.starts_with(key.as_str()) {
                let mut v = split(exp);
                v.extend(self.expand_clitics(&w[key.len()..]));
                Some(v)
            } else if (key.starts_with('\'') || key == "n't") && w.ends_with(key.as_str()) {
                let mut v = self.expand_clitics(&w[..w.len() - key.len()]);
                v.extend(split(exp));
                Some(v)
            } else {
                None
            };
            if let Some(v) = candidate {
                if best.as_ref().is_none_or(|(len, _)| key.len() > *len) {
                    best = Some((key.len(), v));
                }
            }
        }
        best.map(|(_, v)| v).unwrap_or_else(|| vec![w.to_string()])
    }

    fn spell_digits(&self, w: &str) -> String {
        if !w.chars().any(|c| c.is_ascii_digit()) {
            return w.to_string();
        }
        let mut out = String::new();
        for c in w.chars() {
            match c.to_digit(10) {
                Some(d) if c.is_ascii_digit() => {
                    out.push(' ');
                    out.push_str(&self.digits[d as usize]);
                    out.push(' ');
                }
                _ => out.push(c),
            }
        }
        out.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

/// Normalized token sequence plus, for every original token, the range of
/// new tokens it became.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub tokens: Vec<Token>,
    pub origin: Vec<Span>,
}

impl Normalized {
    fn remap_span(&self, span: Span) -> Span {
        if span.is_empty() {
            let at = self.origin.get(span.start).map_or(self.tokens.len(), |s| s.start);
            return Span::new(at, at);
        }
        Span::new(self.origin[span.start].start, self.origin[span.end - 1].end)
    }
}

pub fn normalize_tokens(tokens: &[Token], rules: &NormalizationRules) -> Normalized {
    let mut out = Vec::with_capacity(tokens.len());
    let mut origin = Vec::with_capacity(tokens.len());
    for tok in tokens {
        let start = out.len();
        let surfaces = rules.normalize_word(&tok.surface);
        let lemma = rules.normalize_word(&tok.lemma).join(" ");
        if surfaces.len() <= 1 {
            // digits are spelled inside a single token; a token that
            // normalizes to nothing keeps its (lowercased) form
            let surface = surfaces.into_iter().next().unwrap_or_else(|| tok.surface.to_lowercase());
            out.push(Token {
                index: start,
                surface,
                lemma,
                upos: tok.upos,
            });
        } else {
            for s in surfaces {
                out.push(Token {
                    index: out.len(),
                    lemma: s.clone(),
                    surface: s,
                    upos: tok.upos,
                });
            }
        }
        origin.push(Span::new(start, out.len()));
    }
    Normalized { tokens: out, origin }
}

fn remap_tree(node: &ConstituencyNode, norm: &Normalized) -> ConstituencyNode {
    let span = norm.remap_span(node.span);
    if node.is_leaf() && span.len() > 1 {
        // an expanded token: one leaf per piece under the original label
        let children = span
            .range()
            .map(|i| ConstituencyNode {
                label: node.label,
                span: Span::new(i, i + 1),
                children: Vec::new(),
            })
            .collect();
        return ConstituencyNode {
            label: node.label,
            span,
            children,
        };
    }
    ConstituencyNode {
        label: node.label,
        span,
        children: node.children.iter().map(|c| remap_tree(c, norm)).collect(),
    }
}

fn remap_deps(deps: &[DependencyArc], norm: &Normalized) -> Vec<DependencyArc> {
    deps.iter()
        .map(|a| DependencyArc {
            head: norm.origin[a.head].start,
            dependent: norm.origin[a.dependent].start,
            relation: a.relation,
        })
        .collect()
}

/// Normalizes both sides of a sentence pair. Tokens produced by expanding a
/// clitic inherit the alignment links and span membership of the token they
/// came from; dependency arcs attach to the first piece.
pub fn normalize_sentence(
    sent: &AnnotatedSentencePair,
    en: &NormalizationRules,
    fr: &NormalizationRules,
) -> AnnotatedSentencePair {
    let src = normalize_tokens(&sent.src.tokens, en);
    let tgt = normalize_tokens(&sent.tgt.tokens, fr);
    let mut alignment = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for link in &sent.alignment {
        for s in src.origin[link.src].range() {
            for t in tgt.origin[link.tgt].range() {
                let l = AlignmentLink { src: s, tgt: t };
                if seen.insert(l) {
                    alignment.push(l);
                }
            }
        }
    }
    let phrase_pairs = sent
        .phrase_pairs
        .iter()
        .map(|pp| super::PhrasePair {
            src_span: src.remap_span(pp.src_span),
            tgt_span: tgt.remap_span(pp.tgt_span),
            label: pp.label,
        })
        .collect();
    AnnotatedSentencePair {
        id: sent.id.clone(),
        src: super::SideAnnotation {
            deps: remap_deps(&sent.src.deps, &src),
            tree: sent.src.tree.as_ref().map(|t| remap_tree(t, &src)),
            tokens: src.tokens,
        },
        tgt: super::SideAnnotation {
            deps: remap_deps(&sent.tgt.deps, &tgt),
            tree: sent.tgt.tree.as_ref().map(|t| remap_tree(t, &tgt)),
            tokens: tgt.tokens,
        },
        alignment,
        phrase_pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PhrasePair, RawLabel, SideAnnotation, Upos};

    fn toks(words: &[&str]) -> Vec<Token> {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| Token::new(i, w, w, Upos::X))
            .collect()
    }

    fn surfaces(n: &Normalized) -> Vec<&str> {
        n.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    #[test]
    fn clitic_expansion() {
        let en = NormalizationRules::english();
        let n = normalize_tokens(&toks(&["'re"]), &en);
        assert_eq!(surfaces(&n), ["are"]);
        let n = normalize_tokens(&toks(&["They're", "here"]), &en);
        assert_eq!(surfaces(&n), ["they", "are", "here"]);
        assert_eq!(n.origin, vec![Span::new(0, 2), Span::new(2, 3)]);
        let n = normalize_tokens(&toks(&["can't"]), &en);
        assert_eq!(surfaces(&n), ["can", "not"]);
        let fr = NormalizationRules::french();
        let n = normalize_tokens(&toks(&["l\u{2019}époque"]), &fr);
        assert_eq!(surfaces(&n), ["le", "époque"]);
    }

    #[test]
    fn digits_become_words_in_place() {
        let en = NormalizationRules::english();
        let n = normalize_tokens(&toks(&["42"]), &en);
        assert_eq!(surfaces(&n), ["four two"]);
        assert_eq!(n.tokens.len(), 1);
        let n = normalize_tokens(&toks(&["Hello"]), &en);
        assert_eq!(surfaces(&n), ["hello"]);
    }

    #[test]
    fn sentence_indices_follow_expansion() {
        let sent = AnnotatedSentencePair {
            id: "x".into(),
            src: SideAnnotation {
                tokens: toks(&["we", "'re", "42"]),
                deps: vec![DependencyArc {
                    head: 2,
                    dependent: 0,
                    relation: crate::corpus::DepRel::Nsubj,
                }],
                tree: None,
            },
            tgt: SideAnnotation {
                tokens: toks(&["l'", "homme"]),
                ..Default::default()
            },
            alignment: vec![AlignmentLink { src: 1, tgt: 1 }],
            phrase_pairs: vec![PhrasePair {
                src_span: Span::new(1, 3),
                tgt_span: Span::new(0, 2),
                label: RawLabel::Literal,
            }],
        };
        let fr = NormalizationRules::french();
        let n = normalize_sentence(&sent, &NormalizationRules::english(), &fr);
        assert!(n.validate().is_ok());
        assert_eq!(n.phrase_pairs[0].src_span, Span::new(1, 3));
        assert_eq!(n.src.tokens[2].surface, "four two");
        assert_eq!(n.src.deps[0].head, 2);
    }
}
