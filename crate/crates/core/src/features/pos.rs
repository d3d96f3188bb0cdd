use super::math::cosine;
use super::{FeatureSink, SegmentView};
use crate::corpus::Upos;
use crate::resources::ManualLists;

fn counts(tags: &[Upos]) -> Vec<f64> {
    let mut v = vec![0.0; Upos::ALL.len()];
    for t in tags {
        v[t.index()] += 1.0;
    }
    v
}

/// Family 1: per-tag counts on both sides and their cosine similarity, over
/// all words and over content words.
pub fn f1_pos_profile(src: &SegmentView, tgt: &SegmentView, sink: &mut FeatureSink) {
    let (cs, ct) = (counts(&src.upos()), counts(&tgt.upos()));
    for (side, c) in [("src", &cs), ("tgt", &ct)] {
        for (tag, v) in Upos::ALL.iter().zip(c) {
            sink.push(|| format!("f1.{side}.{tag}"), *v);
        }
    }
    sink.push(|| "f1.cos_all".into(), cosine(&cs, &ct));
    let (ks, kt) = (counts(&src.content_upos()), counts(&tgt.content_upos()));
    sink.push(|| "f1.cos_content".into(), cosine(&ks, &kt));
}

/// Family 2: one indicator per manual POS-change pattern, plus one for "no
/// pattern matched".
pub fn f2_pos_pattern(src: &SegmentView, tgt: &SegmentView, lists: &ManualLists, sink: &mut FeatureSink) {
    let (s, t) = (src.upos(), tgt.upos());
    let mut any = false;
    for (k, p) in lists.pos_change_patterns.iter().enumerate() {
        let hit = p.matches(&s, &t);
        any |= hit;
        sink.flag(|| format!("f2.pattern{k}[{p}]"), hit);
    }
    sink.flag(|| "f2.none".into(), !any);
}
