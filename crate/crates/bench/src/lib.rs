//! Shared inputs for the benchmarks in `benches/`.

use transproc::classic_ml::Dataset;
use transproc::corpus::AnnotatedSentencePair;
use transproc::evaluation::{featurize, normalize_corpus};
use transproc::features::{FeatureConfig, FeatureMask};
use transproc::resources::ResourceSet;
use transproc::synth::{self, SynthSpec};

/// A normalized synthetic corpus at `1/divisor` of the released class sizes.
pub fn corpus(divisor: usize) -> Vec<AnnotatedSentencePair> {
    normalize_corpus(&synth::corpus(&SynthSpec::scaled(divisor, 1)))
}

pub fn resources() -> ResourceSet {
    synth::resources()
}

/// All features of `corpus`, labelled with the six process classes.
pub fn dataset(corpus: &[AnnotatedSentencePair], resources: &ResourceSet) -> Dataset {
    let m = featurize(corpus, resources, FeatureConfig::default(), FeatureMask::all());
    let header = m.specs.iter().map(|s| s.name.clone()).collect();
    let classes = transproc::corpus::ProcessLabel::ALL.iter().map(|l| l.as_str().to_string()).collect();
    let y = m.rows.iter().map(|r| r.label.process().index()).collect();
    let x = m.rows.into_iter().map(|r| r.values).collect();
    Dataset::new(header, classes, x, y).expect("rectangular features")
}
