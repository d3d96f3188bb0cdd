use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{open, ResourceError};

/// Tolerance on the per-word probability mass.
pub const MASS_EPSILON: f64 = 1e-6;

/// Conditioning token used for words generated from no aligned word.
pub const NULL_WORD: &str = "NULL";

/// One direction of a lexical translation table: conditioning word to the
/// distribution over generated words.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirectionalTable {
    rows: HashMap<String, BTreeMap<String, f64>>,
}

impl DirectionalTable {
    pub fn insert(&mut self, conditioning: &str, generated: &str, p: f64) {
        self.rows
            .entry(conditioning.to_string())
            .or_default()
            .insert(generated.to_string(), p);
    }

    /// `w(generated | conditioning)`; `None` when the pair is not stored.
    pub fn prob(&self, generated: &str, conditioning: &str) -> Option<f64> {
        self.rows.get(conditioning)?.get(generated).copied()
    }

    /// Stored distribution for a conditioning word, in key order.
    pub fn distribution(&self, conditioning: &str) -> Option<&BTreeMap<String, f64>> {
        self.rows.get(conditioning)
    }

    /// Largest stored probability for a conditioning word.
    pub fn max_prob(&self, conditioning: &str) -> Option<f64> {
        self.rows
            .get(conditioning)?
            .values()
            .copied()
            .fold(None, |m, p| Some(m.map_or(p, |m: f64| m.max(p))))
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn check_mass(&self, name: &str) -> Result<(), ResourceError> {
        let mut conds: Vec<_> = self.rows.keys().collect();
        conds.sort();
        for cond in conds {
            let mass: f64 = self.rows[cond].values().sum();
            if mass > 1.0 + MASS_EPSILON {
                return Err(ResourceError::Invalid {
                    file: name.to_string(),
                    message: format!("probabilities conditioned on `{cond}` sum to {mass}"),
                });
            }
        }
        Ok(())
    }
}

/// Both directions of the lexical translation table: `w(e|f)` and `w(f|e)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TranslationProbTable {
    pub e_given_f: DirectionalTable,
    pub f_given_e: DirectionalTable,
}

impl TranslationProbTable {
    /// `w(e|f)`.
    pub fn w_e_given_f(&self, e: &str, f: &str) -> Option<f64> {
        self.e_given_f.prob(e, f)
    }

    /// `w(f|e)`.
    pub fn w_f_given_e(&self, f: &str, e: &str) -> Option<f64> {
        self.f_given_e.prob(f, e)
    }
}

pub fn load_translation_table(
    path_e_given_f: impl AsRef<Path>,
    path_f_given_e: impl AsRef<Path>,
) -> Result<TranslationProbTable, ResourceError> {
    let (a, b) = (path_e_given_f.as_ref(), path_f_given_e.as_ref());
    Ok(TranslationProbTable {
        e_given_f: read_directional(open(a)?, &a.display().to_string())?,
        f_given_e: read_directional(open(b)?, &b.display().to_string())?,
    })
}

/// Reads `conditioning<TAB>generated<TAB>probability` rows.
pub fn read_directional(reader: impl Read, name: &str) -> Result<DirectionalTable, ResourceError> {
    let mut table = DirectionalTable::default();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| ResourceError::io(name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| ResourceError::Format {
            file: name.to_string(),
            line: n + 1,
            message,
        };
        let cols: Vec<_> = line.split('\t').collect();
        let [cond, gen, p] = cols.as_slice() else {
            return Err(bad(format!("expected 3 tab-separated columns, found {}", cols.len())));
        };
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| bad(format!("unparseable probability `{p}`")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(bad(format!("probability {p} outside [0, 1]")));
        }
        table.insert(cond, gen, p);
    }
    table.check_mass(name)?;
    Ok(table)
}
