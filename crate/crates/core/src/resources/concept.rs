use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{open, ResourceError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assertion {
    pub relation: String,
    pub start: String,
    pub end: String,
}

/// Multilingual concept assertions restricted to English-French and
/// French-French node pairs. Lookups ignore direction; each record keeps its
/// original orientation.
#[derive(Debug, Clone, Default)]
pub struct ConceptGraph {
    assertions: Vec<Assertion>,
    adjacency: HashMap<String, Vec<usize>>,
    seen: HashSet<Assertion>,
    derivation: BTreeSet<String>,
    dropped: usize,
}

/// `/c/en/deceptive/a` and `EN/Deceptive` both become `en/deceptive`.
pub fn normalize_node(raw: &str) -> String {
    let s = raw.trim().trim_start_matches("/c/");
    let mut parts = s.splitn(3, '/');
    let lang = parts.next().unwrap_or("");
    let term = parts.next().unwrap_or("");
    format!("{}/{}", lang.to_lowercase(), term.to_lowercase())
}

fn normalize_relation(raw: &str) -> String {
    raw.trim().trim_start_matches("/r/").to_string()
}

fn language(node: &str) -> &str {
    node.split('/').next().unwrap_or("")
}

impl ConceptGraph {
    pub const DEFAULT_DERIVATION: [&'static str; 3] =
        ["DerivedFrom", "EtymologicallyDerivedFrom", "FormOf"];

    pub fn new<I, S>(derivation: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        ConceptGraph {
            derivation: derivation
                .into_iter()
                .map(|s| normalize_relation(s.as_ref()))
                .collect(),
            ..Default::default()
        }
    }

    /// Adds an assertion unless it is a duplicate or joins a disallowed
    /// language pair. Returns whether it was kept.
    pub fn add(&mut self, relation: &str, start: &str, end: &str) -> bool {
        let a = Assertion {
            relation: normalize_relation(relation),
            start: normalize_node(start),
            end: normalize_node(end),
        };
        let allowed = matches!(
            (language(&a.start), language(&a.end)),
            ("en", "fr") | ("fr", "en") | ("fr", "fr")
        );
        if !allowed {
            self.dropped += 1;
            return false;
        }
        if !self.seen.insert(a.clone()) {
            return false;
        }
        let id = self.assertions.len();
        self.adjacency.entry(a.start.clone()).or_default().push(id);
        if a.end != a.start {
            self.adjacency.entry(a.end.clone()).or_default().push(id);
        }
        self.assertions.push(a);
        true
    }

    pub fn len(&self) -> usize {
        self.assertions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assertions.is_empty()
    }

    /// Rows rejected for joining a language pair other than EN-FR or FR-FR.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    pub fn is_derivation(&self, relation: &str) -> bool {
        self.derivation.contains(relation)
    }

    /// Nodes joined to `node` by any assertion, with the relation name.
    pub fn neighbors<'a>(&'a self, node: &str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        let node = node.to_string();
        self.adjacency
            .get(&node)
            .into_iter()
            .flatten()
            .map(move |&id| {
                let a = &self.assertions[id];
                let other = if a.start == node { &a.end } else { &a.start };
                (other.as_str(), a.relation.as_str())
            })
    }

    fn linked_by(&self, a: &str, b: &str, pred: impl Fn(&str) -> bool) -> bool {
        self.neighbors(a).any(|(n, r)| n == b && pred(r))
    }

    /// Direct link under any relation, either direction.
    pub fn linked(&self, a: &str, b: &str) -> bool {
        self.linked_by(a, b, |_| true)
    }

    pub fn derivation_neighbors<'a>(&'a self, node: &str) -> impl Iterator<Item = &'a str> + 'a {
        self.neighbors(node)
            .filter(|(_, r)| self.is_derivation(r))
            .map(|(n, _)| n)
    }

    /// Derivation link: direct, or through one shared neighbor.
    pub fn derivation_linked(&self, a: &str, b: &str) -> bool {
        let direct: HashSet<&str> = self.derivation_neighbors(a).collect();
        if direct.contains(b) {
            return true;
        }
        self.derivation_neighbors(b).any(|n| direct.contains(n))
    }
}

pub fn load_concept_graph(path: impl AsRef<Path>) -> Result<ConceptGraph, ResourceError> {
    let path = path.as_ref();
    read_concept_graph(open(path)?, &path.display().to_string(), ConceptGraph::DEFAULT_DERIVATION)
}

/// Reads `relation<TAB>start<TAB>end` rows.
pub fn read_concept_graph<I, S>(
    reader: impl Read,
    name: &str,
    derivation: I,
) -> Result<ConceptGraph, ResourceError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut graph = ConceptGraph::new(derivation);
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| ResourceError::io(name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<_> = line.split('\t').collect();
        let [rel, start, end] = cols.as_slice() else {
            return Err(ResourceError::Format {
                file: name.to_string(),
                line: n + 1,
                message: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        };
        if !start.contains('/') || !end.contains('/') || rel.trim().is_empty() {
            return Err(ResourceError::Format {
                file: name.to_string(),
                line: n + 1,
                message: "nodes must be language-prefixed (`en/word`)".into(),
            });
        }
        graph.add(rel, start, end);
    }
    if graph.dropped() > 0 {
        log::info!("{name}: dropped {} assertions outside EN-FR / FR-FR", graph.dropped());
    }
    Ok(graph)
}
