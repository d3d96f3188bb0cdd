use super::math::levenshtein;
use super::{FeatureSink, SegmentView};

/// Family 3: segment lengths, their ratios and the character-level edit
/// distance between the space-joined surfaces.
pub fn f3_surface(src: &SegmentView, tgt: &SegmentView, sink: &mut FeatureSink) {
    let (le, lf) = (src.len() as f64, tgt.len() as f64);
    sink.push(|| "f3.len_src".into(), le);
    sink.push(|| "f3.len_tgt".into(), lf);
    sink.push(|| "f3.ratio_src_tgt".into(), le / lf);
    sink.push(|| "f3.ratio_tgt_src".into(), lf / le);
    let d = levenshtein(&src.surface_string(), &tgt.surface_string());
    sink.push(|| "f3.levenshtein".into(), d as f64);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Language, Span, Token, Upos};
    use crate::resources::ManualLists;

    fn run(a: &[&str], b: &[&str]) -> FeatureSink {
        let lists = ManualLists::default();
        let mk = |ws: &[&str]| -> Vec<Token> {
            ws.iter().enumerate().map(|(i, w)| Token::new(i, w, w, Upos::Noun)).collect()
        };
        let (ta, tb) = (mk(a), mk(b));
        let mut sink = FeatureSink::new(true);
        sink.family(3);
        f3_surface(
            &SegmentView::new(Language::En, Span::new(0, a.len()), &ta, &lists),
            &SegmentView::new(Language::Fr, Span::new(0, b.len()), &tb, &lists),
            &mut sink,
        );
        sink
    }

    #[test]
    fn identical_segments() {
        let s = run(&["back", "then"], &["back", "then"]);
        assert_eq!(s.get("f3.levenshtein"), Some(0.0));
        assert_eq!(s.get("f3.ratio_src_tgt"), Some(1.0));
        assert_eq!(s.get("f3.ratio_tgt_src"), Some(1.0));
    }

    #[test]
    fn ratios() {
        let s = run(&["a", "b", "c"], &["w", "x", "y", "z"]);
        assert_eq!(s.get("f3.ratio_src_tgt"), Some(0.75));
        assert!((s.get("f3.ratio_tgt_src").unwrap() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn literal_example_distance() {
        let s = run(&["certain", "kinds"], &["certains", "types"]);
        assert_eq!(s.get("f3.levenshtein"), Some(5.0));
    }
}
