use crate::corpus::{AnnotatedSentencePair, Language, PhrasePair, Span, Token, Upos};
use crate::resources::ManualLists;

/// One side of a phrase pair together with the derived views the feature
/// families read.
#[derive(Debug, Clone)]
pub struct SegmentView<'a> {
    pub lang: Language,
    pub span: Span,
    pub tokens: &'a [Token],
    /// Content-word tokens, or every token when the segment has none.
    pub content: Vec<&'a Token>,
    /// Lowercased lemmas with filter-list words removed. May be empty.
    pub filtered_lemmas: Vec<String>,
}

impl<'a> SegmentView<'a> {
    pub fn new(lang: Language, span: Span, tokens: &'a [Token], lists: &ManualLists) -> Self {
        let mut content: Vec<&Token> = tokens.iter().filter(|t| lists.is_content(t.upos)).collect();
        if content.is_empty() {
            content = tokens.iter().collect();
        }
        let filtered_lemmas = tokens
            .iter()
            .map(|t| t.lemma.to_lowercase())
            .filter(|l| !lists.filtered(l))
            .collect();
        SegmentView {
            lang,
            span,
            tokens,
            content,
            filtered_lemmas,
        }
    }

    pub fn source(sent: &'a AnnotatedSentencePair, pair: &PhrasePair, lists: &ManualLists) -> Self {
        Self::new(Language::En, pair.src_span, sent.src_tokens(pair), lists)
    }

    pub fn target(sent: &'a AnnotatedSentencePair, pair: &PhrasePair, lists: &ManualLists) -> Self {
        Self::new(Language::Fr, pair.tgt_span, sent.tgt_tokens(pair), lists)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surface_string(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn surfaces(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.surface.to_lowercase()).collect()
    }

    pub fn lemmas(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.lemma.to_lowercase()).collect()
    }

    pub fn upos(&self) -> Vec<Upos> {
        self.tokens.iter().map(|t| t.upos).collect()
    }

    pub fn content_upos(&self) -> Vec<Upos> {
        self.content.iter().map(|t| t.upos).collect()
    }

    pub fn content_surfaces(&self) -> Vec<String> {
        self.content.iter().map(|t| t.surface.to_lowercase()).collect()
    }

    pub fn content_lemmas(&self) -> Vec<String> {
        self.content.iter().map(|t| t.lemma.to_lowercase()).collect()
    }

    /// Sentence-level indices of the content tokens.
    pub fn content_indices(&self) -> Vec<usize> {
        self.content.iter().map(|t| t.index).collect()
    }

    /// Language-prefixed lookup key for a word sequence: `en/big_enough`.
    pub fn key<S: AsRef<str>>(&self, words: &[S]) -> String {
        let joined = words.iter().map(|w| w.as_ref()).collect::<Vec<_>>().join("_");
        format!("{}/{}", self.lang.prefix(), joined)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_view_falls_back_to_all_tokens() {
        let lists = ManualLists::default();
        let toks = vec![Token::new(0, "the", "the", Upos::Det), Token::new(1, "Cat", "cat", Upos::Noun)];
        let v = SegmentView::new(Language::En, Span::new(0, 2), &toks, &lists);
        assert_eq!(v.content_surfaces(), ["cat"]);
        assert_eq!(v.filtered_lemmas, ["cat"]);
        assert_eq!(v.key(&v.surfaces()), "en/the_cat");

        let toks = vec![Token::new(0, "of", "of", Upos::Adp)];
        let v = SegmentView::new(Language::En, Span::new(0, 1), &toks, &lists);
        assert_eq!(v.content_upos(), [Upos::Adp]);
    }
}
