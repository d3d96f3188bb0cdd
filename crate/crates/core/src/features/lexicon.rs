use super::math::cosine;
use super::{FeatureSink, SegmentView};
use crate::resources::{ConceptGraph, EmbeddingTable, ManualLists};

/// Vector for a segment: the multi-word entry when the whole segment has
/// one, otherwise the mean of its content-word vectors. `None` when nothing
/// resolves.
pub fn segment_vector<S: AsRef<str>>(
    view: &SegmentView,
    whole: &[S],
    content: &[S],
    emb: &EmbeddingTable,
) -> Option<Vec<f64>> {
    if let Some(v) = emb.get(&view.key(whole)) {
        return Some(v.to_vec());
    }
    let mut sum = vec![0.0; emb.dim()];
    let mut hits = 0usize;
    for w in content {
        if let Some(v) = emb.get(&view.key(&[w.as_ref()])) {
            sum.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            hits += 1;
        }
    }
    if hits == 0 {
        return None;
    }
    sum.iter_mut().for_each(|a| *a /= hits as f64);
    Some(sum)
}

/// Family 6: embedding cosine for surface and lemmatized segments, with a
/// miss indicator per side and form.
pub fn f6_embedding_similarity(src: &SegmentView, tgt: &SegmentView, emb: &EmbeddingTable, sink: &mut FeatureSink) {
    let forms: [(&str, fn(&SegmentView) -> (Vec<String>, Vec<String>)); 2] = [
        ("surface", |v| (v.surfaces(), v.content_surfaces())),
        ("lemma", |v| (v.lemmas(), v.content_lemmas())),
    ];
    let mut misses = Vec::with_capacity(4);
    for (form, words) in forms {
        let (sw, sc) = words(src);
        let (tw, tc) = words(tgt);
        let a = segment_vector(src, &sw, &sc, emb);
        let b = segment_vector(tgt, &tw, &tc, emb);
        let cos = match (&a, &b) {
            (Some(a), Some(b)) => cosine(a, b),
            _ => 0.0,
        };
        sink.push(|| format!("f6.cos_{form}"), cos);
        misses.push((form, a.is_none(), b.is_none()));
    }
    for (form, ms, mt) in misses {
        sink.flag(|| format!("f6.miss_src_{form}"), ms);
        sink.flag(|| format!("f6.miss_tgt_{form}"), mt);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Direct,
    /// Through one intermediate French node.
    Indirect,
    Unlinked,
}

impl Linkage {
    pub fn between(graph: &ConceptGraph, en: &str, fr: &str) -> Linkage {
        if graph.linked(en, fr) {
            return Linkage::Direct;
        }
        let via = graph
            .neighbors(en)
            .any(|(x, _)| x.starts_with("fr/") && x != fr && graph.linked(x, fr));
        if via {
            Linkage::Indirect
        } else {
            Linkage::Unlinked
        }
    }
}

/// Family 7: how the two segments are linked in the concept graph, for the
/// original, lemmatized and lemmatized-filtered forms (one-hot each).
pub fn f7_concept_link(
    src: &SegmentView,
    tgt: &SegmentView,
    graph: &ConceptGraph,
    _lists: &ManualLists,
    sink: &mut FeatureSink,
) {
    let forms = [
        ("original", src.surfaces(), tgt.surfaces()),
        ("lemma", src.lemmas(), tgt.lemmas()),
        ("filtered", src.filtered_lemmas.clone(), tgt.filtered_lemmas.clone()),
    ];
    for (form, s, t) in forms {
        let link = if s.is_empty() || t.is_empty() {
            Linkage::Unlinked
        } else {
            Linkage::between(graph, &src.key(&s), &tgt.key(&t))
        };
        sink.flag(|| format!("f7.{form}.direct"), link == Linkage::Direct);
        sink.flag(|| format!("f7.{form}.indirect"), link == Linkage::Indirect);
        sink.flag(|| format!("f7.{form}.unlinked"), link == Linkage::Unlinked);
    }
}

/// Family 8: share of filtered source lemmas with a derivation link (direct
/// or through a shared node) to some filtered target lemma.
pub fn f8_derivation_ratio(src: &SegmentView, tgt: &SegmentView, graph: &ConceptGraph, sink: &mut FeatureSink) {
    let (s, t) = (&src.filtered_lemmas, &tgt.filtered_lemmas);
    if s.is_empty() || t.is_empty() {
        sink.push(|| "f8.derivation_ratio".into(), 0.0);
        sink.flag(|| "f8.miss".into(), true);
        return;
    }
    let tkeys: Vec<String> = t.iter().map(|w| tgt.key(&[w])).collect();
    let linked = s
        .iter()
        .filter(|w| {
            let k = src.key(&[w.as_str()]);
            tkeys.iter().any(|tk| graph.derivation_linked(&k, tk))
        })
        .count();
    sink.push(|| "f8.derivation_ratio".into(), linked as f64 / s.len() as f64);
    sink.flag(|| "f8.miss".into(), false);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Language, Span, Token, Upos};
    use crate::resources::{read_concept_graph, read_embeddings};

    fn toks(words: &[(&str, &str, Upos)]) -> Vec<Token> {
        words
            .iter()
            .enumerate()
            .map(|(i, (s, l, u))| Token::new(i, s, l, *u))
            .collect()
    }

    fn view<'a>(lang: Language, t: &'a [Token], lists: &ManualLists) -> SegmentView<'a> {
        SegmentView::new(lang, Span::new(0, t.len()), t, lists)
    }

    #[test]
    fn embedding_cosine_and_misses() {
        let lists = ManualLists::default();
        let emb = read_embeddings(
            "4 2\nen/cat 1 0\nfr/chat 1 1\nen/big_enough 0 1\nfr/hauteur 0 3\n".as_bytes(),
            "e",
        )
        .unwrap();
        let a = toks(&[("cat", "cat", Upos::Noun)]);
        let b = toks(&[("chat", "chat", Upos::Noun)]);
        let mut sink = FeatureSink::new(true);
        sink.family(6);
        f6_embedding_similarity(&view(Language::En, &a, &lists), &view(Language::Fr, &b, &lists), &emb, &mut sink);
        assert!((sink.get("f6.cos_surface").unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(sink.get("f6.miss_src_surface"), Some(0.0));

        // multi-word entry wins over the content mean
        let a = toks(&[("big", "big", Upos::Adj), ("enough", "enough", Upos::Adv)]);
        let b = toks(&[("hauteur", "hauteur", Upos::Noun)]);
        let mut sink = FeatureSink::new(true);
        sink.family(6);
        f6_embedding_similarity(&view(Language::En, &a, &lists), &view(Language::Fr, &b, &lists), &emb, &mut sink);
        assert!((sink.get("f6.cos_surface").unwrap() - 1.0).abs() < 1e-12);

        // out of vocabulary
        let a = toks(&[("zzz", "zzz", Upos::Noun)]);
        let mut sink = FeatureSink::new(true);
        sink.family(6);
        f6_embedding_similarity(&view(Language::En, &a, &lists), &view(Language::Fr, &b, &lists), &emb, &mut sink);
        assert_eq!(sink.get("f6.cos_surface"), Some(0.0));
        assert_eq!(sink.get("f6.miss_src_surface"), Some(1.0));
        assert_eq!(sink.get("f6.miss_tgt_surface"), Some(0.0));
    }

    const GRAPH: &str = "Synonym\ten/back_then\tfr/à_l'époque\n\
RelatedTo\ten/a\tfr/x\n\
Synonym\tfr/x\tfr/b\n\
DerivedFrom\ten/deceptive\tfr/illusoire\n\
DerivedFrom\tfr/illusion\tfr/illusoire\n";

    fn graph() -> ConceptGraph {
        read_concept_graph(GRAPH.as_bytes(), "g", ConceptGraph::DEFAULT_DERIVATION).unwrap()
    }

    #[test]
    fn linkage_kinds() {
        let g = graph();
        assert_eq!(Linkage::between(&g, "en/back_then", "fr/à_l'époque"), Linkage::Direct);
        assert_eq!(Linkage::between(&g, "en/a", "fr/b"), Linkage::Indirect);
        assert_eq!(Linkage::between(&g, "en/a", "fr/c"), Linkage::Unlinked);
        let empty = ConceptGraph::new(["DerivedFrom"]);
        assert_eq!(Linkage::between(&empty, "en/back_then", "fr/à_l'époque"), Linkage::Unlinked);
    }

    #[test]
    fn concept_features_for_equivalence_example() {
        let lists = ManualLists::default();
        let a = toks(&[("back", "back", Upos::Adv), ("then", "then", Upos::Adv)]);
        let b = toks(&[("à", "à", Upos::Adp), ("l'époque", "l'époque", Upos::Noun)]);
        let (a, b) = (view(Language::En, &a, &lists), view(Language::Fr, &b, &lists));
        let mut sink = FeatureSink::new(true);
        sink.family(7);
        f7_concept_link(&a, &b, &graph(), &lists, &mut sink);
        assert_eq!(sink.get("f7.original.direct"), Some(1.0));
        assert_eq!(sink.values().len(), 9);

        let mut sink = FeatureSink::new(true);
        sink.family(7);
        f7_concept_link(&a, &b, &ConceptGraph::new(["DerivedFrom"]), &lists, &mut sink);
        for form in ["original", "lemma", "filtered"] {
            assert_eq!(sink.get(&format!("f7.{form}.unlinked")), Some(1.0));
        }
    }

    #[test]
    fn derivation_ratio() {
        let lists = ManualLists::default();
        let g = graph();
        let a = toks(&[("deceptive", "deceptive", Upos::Adj)]);
        let b = toks(&[("une", "un", Upos::Det), ("illusion", "illusion", Upos::Noun)]);
        let (va, vb) = (view(Language::En, &a, &lists), view(Language::Fr, &b, &lists));
        let mut sink = FeatureSink::new(true);
        sink.family(8);
        f8_derivation_ratio(&va, &vb, &g, &mut sink);
        assert_eq!(sink.values(), &[1.0, 0.0]);

        let a2 = toks(&[("deceptive", "deceptive", Upos::Adj), ("dreams", "dream", Upos::Noun)]);
        let mut sink = FeatureSink::new(true);
        sink.family(8);
        f8_derivation_ratio(&view(Language::En, &a2, &lists), &vb, &g, &mut sink);
        assert_eq!(sink.get("f8.derivation_ratio"), Some(0.5));

        let mut sink = FeatureSink::new(true);
        sink.family(8);
        f8_derivation_ratio(&va, &vb, &ConceptGraph::new(["DerivedFrom"]), &mut sink);
        assert_eq!(sink.get("f8.derivation_ratio"), Some(0.0));

        // only filtered words on the source side
        let the = toks(&[("the", "the", Upos::Det)]);
        let mut sink = FeatureSink::new(true);
        sink.family(8);
        f8_derivation_ratio(&view(Language::En, &the, &lists), &vb, &g, &mut sink);
        assert_eq!(sink.values(), &[0.0, 1.0]);
    }
}
