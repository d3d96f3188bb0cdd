use std::collections::HashSet;

use super::{CoverRule, FeatureSink};
use crate::corpus::{
    AnnotatedSentencePair, ConstituencyNode, DependencyArc, DepRel, NodeLabel, PhrasePair, SideAnnotation, Span,
};
use crate::resources::ManualLists;

fn cover(tree: Option<&ConstituencyNode>, span: Span, rule: CoverRule) -> Option<NodeLabel> {
    tree?
        .covering(span, rule == CoverRule::Topmost)
        .map(|n| n.label)
}

/// Family 4: tag agreement between the two sides. Word/word pairs compare
/// POS tags, segment/segment pairs compare covering constituents, and a word
/// translated by a segment (or the reverse) checks whether its POS projects
/// to the other side's constituent under the category map.
pub fn f4_constituency(
    pair: &PhrasePair,
    sent: &AnnotatedSentencePair,
    lists: &ManualLists,
    rule: CoverRule,
    sink: &mut FeatureSink,
) {
    let (ls, lt) = (pair.src_span.len(), pair.tgt_span.len());
    let word_pos = ls == 1 && lt == 1 && {
        sent.src.tokens[pair.src_span.start].upos == sent.tgt.tokens[pair.tgt_span.start].upos
    };
    let phrase_eq = ls > 1 && lt > 1 && {
        let a = cover(sent.src.tree.as_ref(), pair.src_span, rule);
        let b = cover(sent.tgt.tree.as_ref(), pair.tgt_span, rule);
        a.is_some() && a == b
    };
    let category = (ls == 1) != (lt == 1) && {
        let (word_side, word_span, other_side, other_span) = if ls == 1 {
            (&sent.src, pair.src_span, &sent.tgt, pair.tgt_span)
        } else {
            (&sent.tgt, pair.tgt_span, &sent.src, pair.src_span)
        };
        let word = word_side.tokens[word_span.start].upos;
        match cover(other_side.tree.as_ref(), other_span, rule) {
            Some(NodeLabel::Phrase(p)) => lists.corresponds(word, p),
            Some(NodeLabel::Word(u)) => u == word,
            None => false,
        }
    };
    sink.flag(|| "f4.word_pos_equal".into(), word_pos);
    sink.flag(|| "f4.phrase_label_equal".into(), phrase_eq);
    sink.flag(|| "f4.word_phrase_category".into(), category);
}

fn relation_counts<'a>(arcs: impl Iterator<Item = &'a DependencyArc>) -> Vec<f64> {
    let mut v = vec![0.0; DepRel::ALL.len()];
    for a in arcs {
        v[a.relation.index()] += 1.0;
    }
    v
}

/// Tokens outside `span` joined by an arc to a token inside it.
fn context(side: &SideAnnotation, span: Span) -> HashSet<usize> {
    let mut out = HashSet::new();
    for a in &side.deps {
        match (span.contains(a.head), span.contains(a.dependent)) {
            (true, false) => {
                out.insert(a.dependent);
            }
            (false, true) => {
                out.insert(a.head);
            }
            _ => {}
        }
    }
    out
}

/// Family 5: dependency relations inside each segment, and between each
/// segment and the context words that are themselves aligned to the other
/// segment's context.
pub fn f5_dependency(pair: &PhrasePair, sent: &AnnotatedSentencePair, sink: &mut FeatureSink) {
    let (ss, ts) = (pair.src_span, pair.tgt_span);
    let src_ctx = context(&sent.src, ss);
    let tgt_ctx = context(&sent.tgt, ts);
    let mut kept_src = HashSet::new();
    let mut kept_tgt = HashSet::new();
    for l in &sent.alignment {
        if src_ctx.contains(&l.src) && tgt_ctx.contains(&l.tgt) {
            kept_src.insert(l.src);
            kept_tgt.insert(l.tgt);
        }
    }
    for (name, side, span, kept) in [("src", &sent.src, ss, &kept_src), ("tgt", &sent.tgt, ts, &kept_tgt)] {
        let inside = relation_counts(
            side.deps
                .iter()
                .filter(|a| span.contains(a.head) && span.contains(a.dependent)),
        );
        let outside = relation_counts(side.deps.iter().filter(|a| {
            (span.contains(a.head) && kept.contains(&a.dependent))
                || (span.contains(a.dependent) && kept.contains(&a.head))
        }));
        for (rel, v) in DepRel::ALL.iter().zip(&inside) {
            sink.push(|| format!("f5.{name}.in.{rel}"), *v);
        }
        for (rel, v) in DepRel::ALL.iter().zip(&outside) {
            sink.push(|| format!("f5.{name}.out.{rel}"), *v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AlignmentLink, PhraseTag, RawLabel, Token, Upos};

    fn side(tags: &[Upos], deps: &[(usize, usize, DepRel)], tree: Option<ConstituencyNode>) -> SideAnnotation {
        SideAnnotation {
            tokens: tags.iter().enumerate().map(|(i, t)| Token::new(i, "w", "w", *t)).collect(),
            deps: deps
                .iter()
                .map(|&(head, dependent, relation)| DependencyArc { head, dependent, relation })
                .collect(),
            tree,
        }
    }

    fn pp(s: (usize, usize), t: (usize, usize)) -> PhrasePair {
        PhrasePair {
            src_span: Span::new(s.0, s.1),
            tgt_span: Span::new(t.0, t.1),
            label: RawLabel::Literal,
        }
    }

    fn sentence(src: SideAnnotation, tgt: SideAnnotation, links: &[(usize, usize)]) -> AnnotatedSentencePair {
        AnnotatedSentencePair {
            id: "t".into(),
            src,
            tgt,
            alignment: links.iter().map(|&(s, t)| AlignmentLink { src: s, tgt: t }).collect(),
            phrase_pairs: vec![],
        }
    }

    fn run4(sent: &AnnotatedSentencePair, p: &PhrasePair) -> FeatureSink {
        let mut sink = FeatureSink::new(true);
        sink.family(4);
        f4_constituency(p, sent, &ManualLists::default(), CoverRule::Minimal, &mut sink);
        sink
    }

    #[test]
    fn word_pair_pos_equality() {
        let s = sentence(side(&[Upos::Noun], &[], None), side(&[Upos::Noun], &[], None), &[]);
        let f = run4(&s, &pp((0, 1), (0, 1)));
        assert_eq!(f.values(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn word_against_phrase_category() {
        use ConstituencyNode as N;
        // this is completely unsustainable -> impossible de continuer (VP)
        let src = side(&[Upos::Adj], &[], Some(N::phrase(PhraseTag::Adjp, vec![N::leaf(Upos::Adj, 0)])));
        let vp = N::phrase(
            PhraseTag::Vp,
            vec![N::leaf(Upos::Verb, 0), N::leaf(Upos::Adp, 1), N::leaf(Upos::Noun, 2)],
        );
        let tgt = side(&[Upos::Verb, Upos::Adp, Upos::Noun], &[], Some(vp.clone()));
        let s = sentence(src, tgt, &[]);
        assert_eq!(run4(&s, &pp((0, 1), (0, 3))).get("f4.word_phrase_category"), Some(0.0));

        let src = side(&[Upos::Verb], &[], Some(N::phrase(PhraseTag::Vp, vec![N::leaf(Upos::Verb, 0)])));
        let s = sentence(src, side(&[Upos::Verb, Upos::Adp, Upos::Noun], &[], Some(vp)), &[]);
        assert_eq!(run4(&s, &pp((0, 1), (0, 3))).get("f4.word_phrase_category"), Some(1.0));
    }

    #[test]
    fn phrase_labels_compared() {
        use ConstituencyNode as N;
        let np = |n: usize| {
            N::phrase(
                PhraseTag::Np,
                (0..n).map(|i| N::leaf(if i == 0 { Upos::Det } else { Upos::Noun }, i)).collect(),
            )
        };
        let s = sentence(
            side(&[Upos::Det, Upos::Noun], &[], Some(np(2))),
            side(&[Upos::Det, Upos::Noun, Upos::Noun], &[], Some(np(3))),
            &[],
        );
        let f = run4(&s, &pp((0, 2), (0, 3)));
        assert_eq!(f.values(), &[0.0, 1.0, 0.0]);
    }

    fn run5(sent: &AnnotatedSentencePair, p: &PhrasePair) -> FeatureSink {
        let mut sink = FeatureSink::new(true);
        sink.family(5);
        f5_dependency(p, sent, &mut sink);
        sink
    }

    #[test]
    fn inside_counts() {
        // "the big house": det(house, the), amod(house, big)
        let src = side(
            &[Upos::Det, Upos::Adj, Upos::Noun],
            &[(2, 0, DepRel::Det), (2, 1, DepRel::Amod)],
            None,
        );
        let s = sentence(src, side(&[Upos::Noun], &[], None), &[]);
        let f = run5(&s, &pp((0, 3), (0, 1)));
        assert_eq!(f.get("f5.src.in.amod"), Some(1.0));
        assert_eq!(f.get("f5.src.in.det"), Some(1.0));
        assert_eq!(f.values().iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn whole_sentence_has_no_outside() {
        let src = side(&[Upos::Det, Upos::Noun], &[(1, 0, DepRel::Det)], None);
        let tgt = side(&[Upos::Det, Upos::Noun], &[(1, 0, DepRel::Det)], None);
        let s = sentence(src, tgt, &[(0, 0), (1, 1)]);
        let f = run5(&s, &pp((0, 2), (0, 2)));
        let out: f64 = f
            .specs()
            .unwrap()
            .iter()
            .zip(f.values())
            .filter(|(s, _)| s.name.contains(".out."))
            .map(|(_, v)| v)
            .sum();
        assert_eq!(out, 0.0);
    }

    #[test]
    fn isolated_words_count_nothing() {
        let s = sentence(side(&[Upos::Noun], &[], None), side(&[Upos::Noun], &[], None), &[(0, 0)]);
        assert!(run5(&s, &pp((0, 1), (0, 1))).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn outside_keeps_only_aligned_context() {
        // src: "cats sleep here": nsubj(sleep, cats), advmod(sleep, here); span = [sleep]
        // tgt: "chats dorment": nsubj(dorment, chats); span = [dorment]
        let src = side(
            &[Upos::Noun, Upos::Verb, Upos::Adv],
            &[(1, 0, DepRel::Nsubj), (1, 2, DepRel::Advmod)],
            None,
        );
        let tgt = side(&[Upos::Noun, Upos::Verb], &[(1, 0, DepRel::Nsubj)], None);
        let s = sentence(src, tgt, &[(0, 0), (1, 1)]);
        let f = run5(&s, &pp((1, 2), (1, 2)));
        assert_eq!(f.get("f5.src.out.nsubj"), Some(1.0));
        assert_eq!(f.get("f5.src.out.advmod"), Some(0.0));
        assert_eq!(f.get("f5.tgt.out.nsubj"), Some(1.0));
    }
}
