use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CorpusError, PhrasePair};

/// The seven categories used by annotators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RawLabel {
    Literal,
    Equivalence,
    Generalization,
    Particularization,
    Modulation,
    Transposition,
    ModTrans,
}

impl RawLabel {
    pub const ALL: [RawLabel; 7] = [
        RawLabel::Literal,
        RawLabel::Equivalence,
        RawLabel::Generalization,
        RawLabel::Particularization,
        RawLabel::Modulation,
        RawLabel::Transposition,
        RawLabel::ModTrans,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RawLabel::Literal => "Literal",
            RawLabel::Equivalence => "Equivalence",
            RawLabel::Generalization => "Generalization",
            RawLabel::Particularization => "Particularization",
            RawLabel::Modulation => "Modulation",
            RawLabel::Transposition => "Transposition",
            RawLabel::ModTrans => "Mod+Trans",
        }
    }

    pub fn process(self) -> ProcessLabel {
        match self {
            RawLabel::Literal => ProcessLabel::Literal,
            RawLabel::Equivalence => ProcessLabel::Equivalence,
            RawLabel::Generalization => ProcessLabel::Generalization,
            RawLabel::Particularization => ProcessLabel::Particularization,
            RawLabel::Modulation => ProcessLabel::Modulation,
            RawLabel::Transposition | RawLabel::ModTrans => ProcessLabel::ContainTransposition,
        }
    }
}

impl FromStr for RawLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RawLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| CorpusError::UnknownLabel(s.to_string()))
    }
}

impl fmt::Display for RawLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for RawLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RawLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Classification taxonomy: the raw categories with Transposition and
/// Mod+Trans merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProcessLabel {
    Literal,
    Equivalence,
    Generalization,
    Particularization,
    Modulation,
    ContainTransposition,
}

impl ProcessLabel {
    pub const ALL: [ProcessLabel; 6] = [
        ProcessLabel::Literal,
        ProcessLabel::Equivalence,
        ProcessLabel::Generalization,
        ProcessLabel::Particularization,
        ProcessLabel::Modulation,
        ProcessLabel::ContainTransposition,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProcessLabel::Literal => "Literal",
            ProcessLabel::Equivalence => "Equivalence",
            ProcessLabel::Generalization => "Generalization",
            ProcessLabel::Particularization => "Particularization",
            ProcessLabel::Modulation => "Modulation",
            ProcessLabel::ContainTransposition => "Contain_Transposition",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ProcessLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn map_label(raw: &str) -> Result<ProcessLabel, CorpusError> {
    raw.parse::<RawLabel>().map(RawLabel::process)
}

/// Per-label instance counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Census {
    counts: [usize; 6],
}

impl Census {
    pub fn get(&self, label: ProcessLabel) -> usize {
        self.counts[label.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn non_literal(&self) -> usize {
        self.total() - self.get(ProcessLabel::Literal)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ProcessLabel, usize)> + '_ {
        ProcessLabel::ALL.into_iter().map(|l| (l, self.get(l)))
    }
}

impl fmt::Display for Census {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, n) in self.iter() {
            writeln!(f, "{:<24}{n:>6}", label.as_str())?;
        }
        write!(f, "{:<24}{:>6}", "total", self.total())
    }
}

pub fn class_census<'a, I>(pairs: I) -> Census
where
    I: IntoIterator<Item = &'a PhrasePair>,
{
    let mut census = Census::default();
    for p in pairs {
        census.counts[p.process().index()] += 1;
    }
    census
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Span;

    fn pair(label: RawLabel) -> PhrasePair {
        PhrasePair {
            src_span: Span::new(0, 1),
            tgt_span: Span::new(0, 1),
            label,
        }
    }

    #[test]
    fn transposition_variants_merge() {
        assert_eq!(map_label("Transposition").unwrap(), ProcessLabel::ContainTransposition);
        assert_eq!(map_label("Mod+Trans").unwrap(), ProcessLabel::ContainTransposition);
        assert_eq!(map_label("Literal").unwrap(), ProcessLabel::Literal);
        assert!(matches!(map_label("Paraphrase"), Err(CorpusError::UnknownLabel(_))));
    }

    #[test]
    fn census_counts() {
        assert_eq!(class_census(&[]).total(), 0);
        let pairs = [pair(RawLabel::Literal), pair(RawLabel::Literal), pair(RawLabel::Modulation)];
        let c = class_census(&pairs);
        assert_eq!(c.get(ProcessLabel::Literal), 2);
        assert_eq!(c.get(ProcessLabel::Modulation), 1);
        assert_eq!(c.get(ProcessLabel::Equivalence), 0);
        assert_eq!(c.total(), 3);
    }

    #[test]
    fn released_census_merges_to_342() {
        let mut pairs = Vec::new();
        for (label, n) in [
            (RawLabel::Literal, 3771),
            (RawLabel::Equivalence, 289),
            (RawLabel::Generalization, 86),
            (RawLabel::Particularization, 215),
            (RawLabel::Modulation, 195),
            (RawLabel::Transposition, 289),
            (RawLabel::ModTrans, 53),
        ] {
            pairs.extend(std::iter::repeat_n(pair(label), n));
        }
        let c = class_census(&pairs);
        assert_eq!(c.get(ProcessLabel::ContainTransposition), 342);
        assert_eq!(c.non_literal(), 1127);
        assert_eq!(c.total(), 4898);
    }
}
