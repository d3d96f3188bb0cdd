//! Synthetic annotated corpora and matching resources.
//!
//! Every label has its own generator: literal pairs use cognate translations
//! with one-to-one links, generalization drops a modifier, particularization
//! adds one, modulation swaps in looser translations, transpositions change
//! the part of speech, and equivalences are idiomatic rewrites. A fraction of
//! pairs is generated by another label's rule to keep the task from being
//! trivially separable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    AlignmentLink, AnnotatedSentencePair, ConstituencyNode, DepRel, DependencyArc, PhrasePair, PhraseTag, RawLabel,
    SideAnnotation, Span, Token, Upos,
};
use crate::resources::{
    parse_manual_lists, read_concept_graph, read_directional, read_embeddings, EmbeddingTable, ResourcePaths,
    ResourceSet, TranslationProbTable, DEFAULT_LISTS,
};
use crate::rng;

/// Raw-label counts of the released corpus.
pub const RELEASED_CENSUS: [(RawLabel, usize); 7] = [
    (RawLabel::Literal, 3771),
    (RawLabel::Equivalence, 289),
    (RawLabel::Generalization, 86),
    (RawLabel::Particularization, 215),
    (RawLabel::Modulation, 195),
    (RawLabel::Transposition, 289),
    (RawLabel::ModTrans, 53),
];

const EMBED_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub census: Vec<(RawLabel, usize)>,
    /// Largest number of phrase pairs packed into one sentence.
    pub max_pairs_per_sentence: usize,
    /// Share of pairs generated by another label's rule.
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(census: &[(RawLabel, usize)], seed: u64) -> Self {
        SynthSpec {
            census: census.to_vec(),
            max_pairs_per_sentence: 1,
            noise: 0.1,
            seed,
        }
    }

    /// The released census divided by `divisor`, rounding up.
    pub fn scaled(divisor: usize, seed: u64) -> Self {
        let census: Vec<_> = RELEASED_CENSUS.iter().map(|&(l, n)| (l, n.div_ceil(divisor))).collect();
        Self::new(&census, seed)
    }
}

#[derive(Debug, Clone)]
struct Entry {
    en: String,
    fr: String,
    /// A looser French rendering.
    alt: String,
    upos: Upos,
}

struct Lexicon {
    entries: Vec<Entry>,
}

fn word(r: &mut ChaCha8Rng, syllables: usize) -> String {
    const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "tr"];
    const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ou"];
    (0..syllables)
        .map(|_| format!("{}{}", ONSETS.choose(r).unwrap(), VOWELS.choose(r).unwrap()))
        .collect()
}

impl Lexicon {
    /// Fixed lexicon, independent of the corpus seed.
    fn new() -> Self {
        let mut r = rng::stream(0x5eed, &[]);
        let mut entries = Vec::new();
        let mut used = std::collections::HashSet::new();
        for (upos, n, suffix) in [
            (Upos::Noun, 24, "e"),
            (Upos::Verb, 16, "er"),
            (Upos::Adj, 12, "if"),
            (Upos::Adv, 8, "ment"),
        ] {
            let mut k = 0;
            while k < n {
                let en = word(&mut r, 2);
                let alt = word(&mut r, 3);
                if !used.insert(en.clone()) || !used.insert(alt.clone()) {
                    continue;
                }
                entries.push(Entry {
                    fr: format!("{en}{suffix}"),
                    en,
                    alt,
                    upos,
                });
                k += 1;
            }
        }
        Lexicon { entries }
    }

    fn pick(&self, r: &mut ChaCha8Rng, upos: Upos) -> &Entry {
        let of: Vec<&Entry> = self.entries.iter().filter(|e| e.upos == upos).collect();
        of[r.gen_range(0..of.len())]
    }
}

/// A phrase on both sides with local alignment links.
#[derive(Debug, Default)]
struct Phrase {
    en: Vec<(String, Upos)>,
    fr: Vec<(String, Upos)>,
    links: Vec<(usize, usize)>,
}

fn tok(s: &str, u: Upos) -> (String, Upos) {
    (s.to_string(), u)
}

fn nominal(e: &Entry) -> String {
    format!("{}age", e.en)
}

fn phrase(lex: &Lexicon, label: RawLabel, r: &mut ChaCha8Rng) -> Phrase {
    use Upos::*;
    let mut p = Phrase::default();
    match label {
        RawLabel::Literal => match r.gen_range(0..4) {
            0 => {
                let n = lex.pick(r, Noun);
                p.en = vec![tok(&n.en, Noun)];
                p.fr = vec![tok(&n.fr, Noun)];
                p.links = vec![(0, 0)];
            }
            1 => {
                let (a, n) = (lex.pick(r, Adj), lex.pick(r, Noun));
                p.en = vec![tok(&a.en, Adj), tok(&n.en, Noun)];
                p.fr = vec![tok(&n.fr, Noun), tok(&a.fr, Adj)];
                p.links = vec![(0, 1), (1, 0)];
            }
            2 => {
                let (v, n) = (lex.pick(r, Verb), lex.pick(r, Noun));
                p.en = vec![tok(&v.en, Verb), tok("the", Det), tok(&n.en, Noun)];
                p.fr = vec![tok(&v.fr, Verb), tok("le", Det), tok(&n.fr, Noun)];
                p.links = vec![(0, 0), (1, 1), (2, 2)];
            }
            _ => {
                let d = lex.pick(r, Adv);
                p.en = vec![tok(&d.en, Adv)];
                p.fr = vec![tok(&d.fr, Adv)];
                p.links = vec![(0, 0)];
            }
        },
        RawLabel::Equivalence => {
            let len_en = r.gen_range(2..=3);
            let len_fr = r.gen_range(2..=4);
            let tags = [Noun, Verb, Adj, Adv];
            for _ in 0..len_en {
                let t = *tags.choose(r).unwrap();
                let e = lex.pick(r, t);
                p.en.push(tok(&e.en, e.upos));
            }
            for i in 0..len_fr {
                if i == 1 {
                    p.fr.push(tok("de", Adp));
                    continue;
                }
                let t = *tags.choose(r).unwrap();
                let e = lex.pick(r, t);
                p.fr.push(tok(&e.alt, e.upos));
            }
            p.links = vec![(0, 0), (len_en - 1, len_fr - 1)];
        }
        RawLabel::Generalization => {
            let (a, n) = (lex.pick(r, Adj), lex.pick(r, Noun));
            if r.gen_bool(0.5) {
                p.en = vec![tok(&a.en, Adj), tok(&n.en, Noun)];
                p.fr = vec![tok(&n.fr, Noun)];
                p.links = vec![(1, 0)];
            } else {
                let m = lex.pick(r, Noun);
                p.en = vec![tok(&m.en, Noun), tok(&n.en, Noun)];
                p.fr = vec![tok(&n.alt, Noun)];
                p.links = vec![(1, 0)];
            }
        }
        RawLabel::Particularization => {
            let (a, n) = (lex.pick(r, Adj), lex.pick(r, Noun));
            if r.gen_bool(0.5) {
                p.en = vec![tok(&n.en, Noun)];
                p.fr = vec![tok(&n.fr, Noun), tok(&a.alt, Adj)];
                p.links = vec![(0, 0)];
            } else {
                let m = lex.pick(r, Noun);
                p.en = vec![tok(&n.en, Noun)];
                p.fr = vec![tok(&n.fr, Noun), tok("de", Adp), tok(&m.alt, Noun)];
                p.links = vec![(0, 0)];
            }
        }
        RawLabel::Modulation => {
            if r.gen_bool(0.5) {
                let (a, n) = (lex.pick(r, Adj), lex.pick(r, Noun));
                p.en = vec![tok(&a.en, Adj), tok(&n.en, Noun)];
                p.fr = vec![tok(&n.alt, Noun), tok(&a.alt, Adj)];
                p.links = vec![(0, 1), (1, 0)];
            } else {
                let v = lex.pick(r, Verb);
                p.en = vec![tok(&v.en, Verb)];
                p.fr = vec![tok(&v.alt, Verb)];
                p.links = vec![(0, 0)];
            }
        }
        RawLabel::Transposition | RawLabel::ModTrans => {
            let loose = label == RawLabel::ModTrans;
            match r.gen_range(0..3) {
                0 => {
                    let d = lex.pick(r, Adv);
                    p.en = vec![tok(&d.en, Adv)];
                    let n = if loose { d.alt.clone() } else { nominal(d) };
                    p.fr = vec![tok("de", Adp), tok(&n, Noun)];
                    p.links = vec![(0, 0), (0, 1)];
                }
                1 => {
                    let v = lex.pick(r, Verb);
                    p.en = vec![tok(&v.en, Verb)];
                    let n = if loose { v.alt.clone() } else { nominal(v) };
                    p.fr = vec![tok(&n, Noun)];
                    p.links = vec![(0, 0)];
                }
                _ => {
                    let a = lex.pick(r, Adj);
                    p.en = vec![tok(&a.en, Adj)];
                    let n = if loose { a.alt.clone() } else { nominal(a) };
                    p.fr = vec![tok("de", Adp), tok(&n, Noun)];
                    p.links = vec![(0, 1)];
                }
            }
        }
    }
    p
}

fn phrase_tag(tags: &[Upos]) -> PhraseTag {
    match tags.iter().find(|t| Upos::CONTENT.contains(t)).or(tags.first()) {
        Some(Upos::Verb) => PhraseTag::Vp,
        Some(Upos::Adj) => PhraseTag::Adjp,
        Some(Upos::Adv) => PhraseTag::Advp,
        Some(Upos::Adp) => PhraseTag::Pp,
        _ => PhraseTag::Np,
    }
}

fn relation(u: Upos) -> DepRel {
    match u {
        Upos::Det => DepRel::Det,
        Upos::Adj => DepRel::Amod,
        Upos::Adp => DepRel::Case,
        Upos::Adv => DepRel::Advmod,
        Upos::Verb => DepRel::Xcomp,
        Upos::Cconj => DepRel::Cc,
        _ => DepRel::Nmod,
    }
}

/// One side of a sentence: `PRON VERB phrase (CCONJ phrase)* PUNCT`.
fn side(context: [&str; 3], cc: &str, phrases: &[&[(String, Upos)]]) -> (SideAnnotation, Vec<Span>) {
    let mut tokens = vec![
        Token::new(0, context[0], context[0], Upos::Pron),
        Token::new(1, context[1], context[1], Upos::Verb),
    ];
    let mut deps = vec![DependencyArc {
        head: 1,
        dependent: 0,
        relation: DepRel::Nsubj,
    }];
    let mut vp_children = vec![ConstituencyNode::leaf(Upos::Verb, 1)];
    let mut spans = Vec::new();
    for (k, ph) in phrases.iter().enumerate() {
        if k > 0 {
            let i = tokens.len();
            tokens.push(Token::new(i, cc, cc, Upos::Cconj));
            deps.push(DependencyArc {
                head: 1,
                dependent: i,
                relation: DepRel::Cc,
            });
            vp_children.push(ConstituencyNode::leaf(Upos::Cconj, i));
        }
        let start = tokens.len();
        for (w, u) in ph.iter() {
            tokens.push(Token::new(tokens.len(), w, w, *u));
        }
        let head = (start..tokens.len())
            .find(|&i| Upos::CONTENT.contains(&tokens[i].upos))
            .unwrap_or(start);
        deps.push(DependencyArc {
            head: 1,
            dependent: head,
            relation: if k == 0 { DepRel::Obj } else { DepRel::Conj },
        });
        for i in (start..tokens.len()).filter(|&i| i != head) {
            deps.push(DependencyArc {
                head,
                dependent: i,
                relation: relation(tokens[i].upos),
            });
        }
        let leaves = (start..tokens.len()).map(|i| ConstituencyNode::leaf(tokens[i].upos, i)).collect();
        let tags: Vec<Upos> = ph.iter().map(|t| t.1).collect();
        vp_children.push(ConstituencyNode::phrase(phrase_tag(&tags), leaves));
        spans.push(Span::new(start, tokens.len()));
    }
    let end = tokens.len();
    tokens.push(Token::new(end, context[2], context[2], Upos::Punct));
    deps.push(DependencyArc {
        head: 1,
        dependent: end,
        relation: DepRel::Punct,
    });
    let tree = ConstituencyNode::phrase(
        PhraseTag::S,
        vec![
            ConstituencyNode::phrase(PhraseTag::Np, vec![ConstituencyNode::leaf(Upos::Pron, 0)]),
            ConstituencyNode::phrase(PhraseTag::Vp, vp_children),
            ConstituencyNode::leaf(Upos::Punct, end),
        ],
    );
    (
        SideAnnotation {
            tokens,
            deps,
            tree: Some(tree),
        },
        spans,
    )
}

fn sentence(id: String, lex: &Lexicon, labels: &[RawLabel], generators: &[RawLabel], r: &mut ChaCha8Rng) -> AnnotatedSentencePair {
    let phrases: Vec<Phrase> = generators.iter().map(|&g| phrase(lex, g, r)).collect();
    let en: Vec<&[(String, Upos)]> = phrases.iter().map(|p| p.en.as_slice()).collect();
    let fr: Vec<&[(String, Upos)]> = phrases.iter().map(|p| p.fr.as_slice()).collect();
    let (src, src_spans) = side(["we", "said", "."], "and", &en);
    let (tgt, tgt_spans) = side(["nous", "disons", "."], "et", &fr);
    let mut alignment = vec![AlignmentLink { src: 0, tgt: 0 }, AlignmentLink { src: 1, tgt: 1 }];
    for k in 0..phrases.len() {
        if k > 0 {
            alignment.push(AlignmentLink {
                src: src_spans[k].start - 1,
                tgt: tgt_spans[k].start - 1,
            });
        }
        for &(i, j) in &phrases[k].links {
            alignment.push(AlignmentLink {
                src: src_spans[k].start + i,
                tgt: tgt_spans[k].start + j,
            });
        }
    }
    alignment.push(AlignmentLink {
        src: src.tokens.len() - 1,
        tgt: tgt.tokens.len() - 1,
    });
    let phrase_pairs = labels
        .iter()
        .enumerate()
        .map(|(k, &label)| PhrasePair {
            src_span: src_spans[k],
            tgt_span: tgt_spans[k],
            label,
        })
        .collect();
    AnnotatedSentencePair {
        id,
        src,
        tgt,
        alignment,
        phrase_pairs,
    }
}

/// A corpus with exactly the census of `spec`, labels shuffled.
pub fn corpus(spec: &SynthSpec) -> Vec<AnnotatedSentencePair> {
    let lex = Lexicon::new();
    let mut r = rng::stream(spec.seed, &[]);
    let mut labels: Vec<RawLabel> = spec
        .census
        .iter()
        .flat_map(|&(l, n)| std::iter::repeat_n(l, n))
        .collect();
    labels.shuffle(&mut r);
    let mut out = Vec::new();
    let mut rest = labels.as_slice();
    while !rest.is_empty() {
        let k = r.gen_range(1..=spec.max_pairs_per_sentence.max(1)).min(rest.len());
        let (these, tail) = rest.split_at(k);
        rest = tail;
        let generators: Vec<RawLabel> = these
            .iter()
            .map(|&l| {
                if r.gen_bool(spec.noise) {
                    *RawLabel::ALL.choose(&mut r).unwrap()
                } else {
                    l
                }
            })
            .collect();
        out.push(sentence(format!("syn-{}", out.len()), &lex, these, &generators, &mut r));
    }
    out
}

/// Text contents of the resource files matching the synthetic lexicon.
pub struct ResourceFiles {
    pub embeddings: String,
    pub e_given_f: String,
    pub f_given_e: String,
    pub concept_graph: String,
    pub manual_lists: String,
}

pub fn resource_files() -> ResourceFiles {
    let lex = Lexicon::new();
    let mut r = rng::stream(0x5eed, &[1]);
    let mut vectors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut e_given_f = String::new();
    let mut f_given_e = String::new();
    let mut graph = String::new();
    let noisy = |base: &[f64], amount: f64, r: &mut ChaCha8Rng| -> Vec<f64> {
        base.iter().map(|b| b + amount * r.gen_range(-1.0..1.0)).collect()
    };
    let function = [("we", "nous"), ("said", "disons"), ("the", "le"), ("and", "et"), ("of", "de")];
    for (en, fr) in function {
        let base: Vec<f64> = (0..EMBED_DIM).map(|_| r.gen_range(-1.0..1.0)).collect();
        vectors.insert(format!("en/{en}"), noisy(&base, 0.1, &mut r));
        vectors.insert(format!("fr/{fr}"), noisy(&base, 0.1, &mut r));
        writeln!(f_given_e, "{en}\t{fr}\t0.9").unwrap();
        writeln!(e_given_f, "{fr}\t{en}\t0.9").unwrap();
    }
    for e in &lex.entries {
        let base: Vec<f64> = (0..EMBED_DIM).map(|_| r.gen_range(-1.0..1.0)).collect();
        vectors.insert(format!("en/{}", e.en), noisy(&base, 0.1, &mut r));
        vectors.insert(format!("fr/{}", e.fr), noisy(&base, 0.1, &mut r));
        vectors.insert(format!("fr/{}", e.alt), noisy(&base, 0.9, &mut r));
        let nom = nominal(e);
        vectors.insert(format!("fr/{nom}"), noisy(&base, 0.3, &mut r));
        writeln!(f_given_e, "{}\t{}\t0.6", e.en, e.fr).unwrap();
        writeln!(f_given_e, "{}\t{}\t0.15", e.en, e.alt).unwrap();
        writeln!(f_given_e, "{}\t{nom}\t0.2", e.en).unwrap();
        writeln!(e_given_f, "{}\t{}\t0.85", e.fr, e.en).unwrap();
        writeln!(e_given_f, "{}\t{}\t0.3", e.alt, e.en).unwrap();
        writeln!(e_given_f, "{nom}\t{}\t0.7", e.en).unwrap();
        writeln!(graph, "Synonym\ten/{}\tfr/{}", e.en, e.fr).unwrap();
        writeln!(graph, "RelatedTo\ten/{}\tfr/{}", e.en, e.alt).unwrap();
        writeln!(graph, "DerivedFrom\tfr/{nom}\tfr/{}", e.fr).unwrap();
    }
    let mut embeddings = format!("{} {EMBED_DIM}\n", vectors.len());
    for (k, v) in &vectors {
        let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
        writeln!(embeddings, "{k} {}", parts.join(" ")).unwrap();
    }
    ResourceFiles {
        embeddings,
        e_given_f,
        f_given_e,
        concept_graph: graph,
        manual_lists: DEFAULT_LISTS.to_string(),
    }
}

/// Writes the resource files into `dir` and returns their paths.
pub fn write_resources(dir: &Path) -> std::io::Result<ResourcePaths> {
    std::fs::create_dir_all(dir)?;
    let files = resource_files();
    let paths = ResourcePaths {
        embeddings: dir.join("embeddings.txt"),
        e_given_f: dir.join("e_given_f.tsv"),
        f_given_e: dir.join("f_given_e.tsv"),
        concept_graph: dir.join("concepts.tsv"),
        manual_lists: dir.join("manual_lists.toml"),
        word_vectors: None,
    };
    std::fs::write(&paths.embeddings, files.embeddings)?;
    std::fs::write(&paths.e_given_f, files.e_given_f)?;
    std::fs::write(&paths.f_given_e, files.f_given_e)?;
    std::fs::write(&paths.concept_graph, files.concept_graph)?;
    std::fs::write(&paths.manual_lists, files.manual_lists)?;
    Ok(paths)
}

/// The resources parsed in memory, without checksums.
pub fn resources() -> ResourceSet {
    let files = resource_files();
    let lists = parse_manual_lists(&files.manual_lists, "manual_lists").expect("default lists parse");
    let directional = |text: &str| read_directional(text.as_bytes(), "synthetic").expect("valid table");
    let concepts = read_concept_graph(
        files.concept_graph.as_bytes(),
        "synthetic",
        lists.derivation_relations.iter(),
    )
    .expect("valid graph");
    let embeddings: EmbeddingTable =
        read_embeddings(files.embeddings.as_bytes(), "synthetic").expect("valid vectors");
    ResourceSet {
        embeddings,
        translation: TranslationProbTable {
            e_given_f: directional(&files.e_given_f),
            f_given_e: directional(&files.f_given_e),
        },
        concepts,
        lists,
        word_vectors: None,
        checksums: BTreeMap::new(),
    }
}
