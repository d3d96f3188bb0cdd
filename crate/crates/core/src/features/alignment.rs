use std::collections::BTreeSet;

use super::math::entropy;
use super::{FeatureSink, SegmentView};
use crate::corpus::{AnnotatedSentencePair, PhrasePair};
use crate::resources::{DirectionalTable, ManualLists, TranslationProbTable, NULL_WORD};

/// Family 9: mean entropy of the translation distribution of each content
/// word, per side, for surfaces and lemmas. Words missing from the table are
/// skipped and counted.
pub fn f9_translation_entropy(
    src: &SegmentView,
    tgt: &SegmentView,
    table: &TranslationProbTable,
    sink: &mut FeatureSink,
) {
    // English words condition w(f|e); French words condition w(e|f).
    let sides = [("src", src, &table.f_given_e), ("tgt", tgt, &table.e_given_f)];
    let mut misses = Vec::with_capacity(4);
    let forms: [(&str, fn(&SegmentView) -> Vec<String>); 2] =
        [("surface", |v| v.content_surfaces()), ("lemma", |v| v.content_lemmas())];
    for (form, words) in forms {
        for (side, view, dir) in sides {
            let (mut sum, mut hits, mut miss) = (0.0, 0usize, 0usize);
            for w in words(view) {
                match dir.distribution(&w) {
                    Some(d) if !d.is_empty() => {
                        sum += entropy(d.values().copied());
                        hits += 1;
                    }
                    _ => miss += 1,
                }
            }
            let mean = if hits > 0 { sum / hits as f64 } else { 0.0 };
            sink.push(|| format!("f9.{side}.{form}"), mean);
            misses.push((side, form, miss));
        }
    }
    for (side, form, miss) in misses {
        sink.push(|| format!("f9.{side}.{form}.miss"), miss as f64);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexicalWeight {
    pub value: f64,
    /// Generated words with no link and no NULL entry in the table.
    pub unaligned: usize,
}

/// Lexical weighting of `generated` given `conditioning` under `links`
/// (pairs of positions into the two word lists):
///
/// product over generated words `i` of the mean of `w(g_i | c_j)` over the
/// words `c_j` aligned to it. An unaligned word contributes `w(g_i | NULL)`
/// when the table has it and is otherwise left out of the product. Missing
/// table entries count as probability 0.
pub fn lexical_weighting<S: AsRef<str>>(
    generated: &[S],
    conditioning: &[S],
    links: &[(usize, usize)],
    table: &DirectionalTable,
) -> LexicalWeight {
    let links: BTreeSet<(usize, usize)> = links.iter().copied().collect();
    let mut value = 1.0;
    let mut unaligned = 0;
    for (i, g) in generated.iter().enumerate() {
        let g = g.as_ref();
        let aligned: Vec<usize> = links.range((i, 0)..(i + 1, 0)).map(|&(_, j)| j).collect();
        if aligned.is_empty() {
            match table.prob(g, NULL_WORD) {
                Some(p) => value *= p,
                None => unaligned += 1,
            }
            continue;
        }
        let sum: f64 = aligned
            .iter()
            .map(|&j| table.prob(g, conditioning[j].as_ref()).unwrap_or(0.0))
            .sum();
        value *= sum / aligned.len() as f64;
    }
    LexicalWeight { value, unaligned }
}

/// Family 10: bidirectional lexical weighting over content words, for
/// surfaces and lemmas, using the sentence alignment restricted to the two
/// segments.
pub fn f10_lexical_weighting(
    pair: &PhrasePair,
    sent: &AnnotatedSentencePair,
    lists: &ManualLists,
    table: &TranslationProbTable,
    sink: &mut FeatureSink,
) {
    let src = SegmentView::source(sent, pair, lists);
    let tgt = SegmentView::target(sent, pair, lists);
    let si = src.content_indices();
    let ti = tgt.content_indices();
    let links: Vec<(usize, usize)> = sent
        .alignment
        .iter()
        .filter_map(|l| {
            let i = si.iter().position(|&s| s == l.src)?;
            let j = ti.iter().position(|&t| t == l.tgt)?;
            Some((i, j))
        })
        .collect();
    let flipped: Vec<(usize, usize)> = links.iter().map(|&(i, j)| (j, i)).collect();
    let mut unaligned = Vec::with_capacity(4);
    for (form, s, t) in [
        ("surface", src.content_surfaces(), tgt.content_surfaces()),
        ("lemma", src.content_lemmas(), tgt.content_lemmas()),
    ] {
        let e_f = lexical_weighting(&s, &t, &links, &table.e_given_f);
        let f_e = lexical_weighting(&t, &s, &flipped, &table.f_given_e);
        sink.push(|| format!("f10.lex_e_given_f.{form}"), e_f.value);
        sink.push(|| format!("f10.lex_f_given_e.{form}"), f_e.value);
        unaligned.push((form, e_f.unaligned, f_e.unaligned));
    }
    for (form, us, ut) in unaligned {
        sink.push(|| format!("f10.unaligned_src.{form}"), us as f64);
        sink.push(|| format!("f10.unaligned_tgt.{form}"), ut as f64);
    }
}

struct Gap {
    sum: f64,
    unaligned_src: f64,
    unaligned_tgt: f64,
}

fn probability_gap(src: &[String], tgt: &[String], dir: &DirectionalTable) -> Gap {
    let mut sum = 0.0;
    let mut unaligned = 0usize;
    for s in src {
        let best_here = tgt
            .iter()
            .map(|t| dir.prob(t, s).unwrap_or(0.0))
            .fold(0.0, f64::max);
        if best_here > 0.0 {
            let best = dir.max_prob(s).unwrap_or(0.0);
            sum += (best - best_here).max(0.0);
        } else {
            unaligned += 1;
        }
    }
    let tgt_unaligned = tgt
        .iter()
        .filter(|t| src.iter().all(|s| dir.prob(t, s).unwrap_or(0.0) == 0.0))
        .count();
    Gap {
        sum,
        unaligned_src: unaligned as f64 / src.len().max(1) as f64,
        unaligned_tgt: tgt_unaligned as f64 / tgt.len().max(1) as f64,
    }
}

/// Family 11: per translation direction, the summed difference between the
/// table's most probable translation of each word and the best translation
/// found in the other segment, with the share of words left unaligned on
/// each side.
pub fn f11_probability_gap(
    src: &SegmentView,
    tgt: &SegmentView,
    table: &TranslationProbTable,
    content_only: bool,
    sink: &mut FeatureSink,
) {
    let (s, t) = if content_only {
        (src.content_surfaces(), tgt.content_surfaces())
    } else {
        (src.surfaces(), tgt.surfaces())
    };
    for (dir_name, a, b, dir) in [("e2f", &s, &t, &table.f_given_e), ("f2e", &t, &s, &table.e_given_f)] {
        let g = probability_gap(a, b, dir);
        sink.push(|| format!("f11.{dir_name}.gap"), g.sum);
        sink.push(|| format!("f11.{dir_name}.unaligned_from"), g.unaligned_src);
        sink.push(|| format!("f11.{dir_name}.unaligned_to"), g.unaligned_tgt);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Language, Span, Token, Upos};
    use crate::resources::read_directional;

    fn table(rows: &str) -> DirectionalTable {
        read_directional(rows.as_bytes(), "t").unwrap()
    }

    #[test]
    fn single_link() {
        let t = table("f1\te1\t0.5\n");
        let w = lexical_weighting(&["e1"], &["f1"], &[(0, 0)], &t);
        assert_eq!(w.value, 0.5);
        assert_eq!(w.unaligned, 0);
    }

    #[test]
    fn one_to_many_averages() {
        let t = table("f1\te1\t0.4\nf1\te2\t0.2\nf2\te2\t0.6\n");
        let w = lexical_weighting(&["e1", "e2"], &["f1", "f2"], &[(0, 0), (1, 0), (1, 1)], &t);
        assert!((w.value - 0.16).abs() < 1e-15);
    }

    #[test]
    fn certain_links_give_one() {
        let t = table("f1\te1\t1\nf2\te2\t1\n");
        let w = lexical_weighting(&["e1", "e2"], &["f1", "f2"], &[(0, 0), (1, 1)], &t);
        assert_eq!(w.value, 1.0);
    }

    #[test]
    fn unaligned_uses_null_or_is_skipped() {
        let t = table("f1\te1\t0.5\nNULL\te2\t0.1\n");
        let w = lexical_weighting(&["e1", "e2", "e3"], &["f1"], &[(0, 0)], &t);
        assert!((w.value - 0.05).abs() < 1e-15);
        assert_eq!(w.unaligned, 1);
    }

    fn seg<'a>(lang: Language, t: &'a [Token]) -> SegmentView<'a> {
        SegmentView::new(lang, Span::new(0, t.len()), t, &ManualLists::default())
    }

    fn words(ws: &[&str]) -> Vec<Token> {
        ws.iter().enumerate().map(|(i, w)| Token::new(i, w, w, Upos::Noun)).collect()
    }

    #[test]
    fn entropy_feature() {
        let tt = TranslationProbTable {
            e_given_f: table("chat\tcat\t1\n"),
            f_given_e: table("cat\tchat\t0.5\ncat\tmatou\t0.25\ncat\tminou\t0.25\nbig\tgrand\t0.25\nbig\tgros\t0.25\nbig\tvaste\t0.25\nbig\timportant\t0.25\n"),
        };
        let (a, b) = (words(&["cat", "big", "zzz"]), words(&["chat"]));
        let mut sink = FeatureSink::new(true);
        sink.family(9);
        f9_translation_entropy(&seg(Language::En, &a), &seg(Language::Fr, &b), &tt, &mut sink);
        let expect = (1.0397207708399179 + 4f64.ln()) / 2.0;
        assert!((sink.get("f9.src.surface").unwrap() - expect).abs() < 1e-12);
        assert_eq!(sink.get("f9.src.surface.miss"), Some(1.0));
        assert_eq!(sink.get("f9.tgt.surface"), Some(0.0));
        assert_eq!(sink.get("f9.tgt.surface.miss"), Some(0.0));
    }

    #[test]
    fn gap_features() {
        let tt = TranslationProbTable {
            e_given_f: DirectionalTable::default(),
            f_given_e: table("big\tgrand\t0.9\nbig\tgros\t0.06\ncat\tchat\t0.9\n"),
        };
        let (a, b) = (words(&["big"]), words(&["gros"]));
        let mut sink = FeatureSink::new(true);
        sink.family(11);
        f11_probability_gap(&seg(Language::En, &a), &seg(Language::Fr, &b), &tt, false, &mut sink);
        assert!((sink.get("f11.e2f.gap").unwrap() - 0.84).abs() < 1e-12);

        let (a, b) = (words(&["big", "cat", "x", "y"]), words(&["grand", "chat"]));
        let mut sink = FeatureSink::new(true);
        sink.family(11);
        f11_probability_gap(&seg(Language::En, &a), &seg(Language::Fr, &b), &tt, false, &mut sink);
        assert_eq!(sink.get("f11.e2f.gap"), Some(0.0));
        assert_eq!(sink.get("f11.e2f.unaligned_from"), Some(0.5));
        assert_eq!(sink.get("f11.e2f.unaligned_to"), Some(0.0));
        assert_eq!(sink.get("f11.f2e.unaligned_from"), Some(1.0));
    }
}
