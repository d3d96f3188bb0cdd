//! Regenerates the files under `fixtures/`:
//!
//! ```text
//! cargo run -p transproc-core --example make_fixtures -- fixtures
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use transproc::corpus::{write_bundle, AnnotatedSentencePair, RawLabel};
use transproc::synth::{self, SynthSpec};

const TINY: [(RawLabel, usize); 7] = [
    (RawLabel::Literal, 2),
    (RawLabel::Equivalence, 1),
    (RawLabel::Generalization, 1),
    (RawLabel::Particularization, 0),
    (RawLabel::Modulation, 1),
    (RawLabel::Transposition, 1),
    (RawLabel::ModTrans, 1),
];

fn save(path: PathBuf, corpus: &[AnnotatedSentencePair]) {
    let mut w = BufWriter::new(File::create(&path).expect("create bundle"));
    write_bundle(&mut w, corpus).expect("write bundle");
    println!("{}: {} sentence pairs", path.display(), corpus.len());
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    synth::write_resources(&dir.join("resources")).expect("write resources");

    // Seven pairs over exactly three sentences.
    let tiny = (0..)
        .map(|seed| {
            let mut spec = SynthSpec::new(&TINY, seed);
            spec.max_pairs_per_sentence = 3;
            spec.noise = 0.0;
            synth::corpus(&spec)
        })
        .find(|c| c.len() == 3)
        .unwrap();
    save(dir.join("tiny.jsonl"), &tiny);
    save(dir.join("small.jsonl"), &synth::corpus(&SynthSpec::scaled(15, 1)));
    save(dir.join("empty.jsonl"), &[]);
}
