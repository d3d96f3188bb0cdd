use std::io::{BufRead, BufReader, Read, Write};

use super::{FeatureGroup, FeatureSpec};
use crate::corpus::{AnnotatedSentencePair, PairRef, RawLabel, Span};

const FIXED: [&str; 4] = ["id", "src_span", "tgt_span", "label"];

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    /// `<sentence id>#<pair index>`.
    pub id: String,
    pub src_span: Span,
    pub tgt_span: Span,
    pub label: RawLabel,
    pub values: Vec<f64>,
}

/// A feature table: one row per phrase pair, one column per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub specs: Vec<FeatureSpec>,
    pub rows: Vec<MatrixRow>,
}

impl FeatureMatrix {
    pub fn new(specs: &[FeatureSpec], corpus: &[AnnotatedSentencePair], refs: &[PairRef], values: Vec<Vec<f64>>) -> Self {
        assert_eq!(refs.len(), values.len());
        let rows = refs
            .iter()
            .zip(values)
            .map(|(r, values)| {
                let sent = &corpus[r.sentence];
                let pp = &sent.phrase_pairs[r.pair];
                MatrixRow {
                    id: format!("{}#{}", sent.id, r.pair),
                    src_span: pp.src_span,
                    tgt_span: pp.tgt_span,
                    label: pp.label,
                    values,
                }
            })
            .collect();
        FeatureMatrix {
            specs: specs.to_vec(),
            rows,
        }
    }

    pub fn header(&self) -> Vec<String> {
        FIXED
            .iter()
            .map(|s| s.to_string())
            .chain(self.specs.iter().map(|s| format!("{}@{}", s.name, s.group)))
            .collect()
    }
}

fn span_text(s: Span) -> String {
    format!("{}-{}", s.start, s.end)
}

fn parse_span(s: &str) -> Option<Span> {
    let (a, b) = s.split_once('-')?;
    let (a, b) = (a.parse().ok()?, b.parse().ok()?);
    (a < b).then(|| Span::new(a, b))
}

/// Writes the matrix as TSV. Values use the shortest decimal form that reads
/// back to the same number. Readers skip `#` lines ahead of the header.
pub fn write_matrix(mut w: impl Write, m: &FeatureMatrix) -> std::io::Result<()> {
    writeln!(w, "{}", m.header().join("\t"))?;
    for r in &m.rows {
        write!(w, "{}\t{}\t{}\t{}", r.id, span_text(r.src_span), span_text(r.tgt_span), r.label)?;
        for v in &r.values {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn parse_spec(col: &str) -> Result<FeatureSpec, String> {
    let (name, group) = col
        .rsplit_once('@')
        .ok_or_else(|| format!("column `{col}` lacks an @group suffix"))?;
    let group: FeatureGroup = group.parse()?;
    let family: u8 = name
        .strip_prefix('f')
        .and_then(|r| r.split('.').next())
        .and_then(|n| n.parse().ok())
        .filter(|f| (1..=11).contains(f))
        .ok_or_else(|| format!("column `{col}` does not name a feature family"))?;
    if FeatureGroup::of_family(family) != group {
        return Err(format!("column `{col}`: family {family} is not in group {group}"));
    }
    Ok(FeatureSpec {
        name: name.to_string(),
        family,
        group,
    })
}

pub fn read_matrix(r: impl Read) -> Result<FeatureMatrix, String> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let header = loop {
        let (_, line) = lines.next().ok_or("empty feature matrix")?;
        let line = line.map_err(|e| e.to_string())?;
        if !line.starts_with('#') {
            break line;
        }
    };
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < FIXED.len() || cols[..FIXED.len()] != FIXED {
        return Err(format!("header must start with {}", FIXED.join(", ")));
    }
    let specs = cols[FIXED.len()..]
        .iter()
        .map(|c| parse_spec(c))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| e.to_string())?;
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| format!("line {}: {m}", n + 1);
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != cols.len() {
            return Err(bad(format!("{} fields, expected {}", f.len(), cols.len())));
        }
        let values = f[FIXED.len()..]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad value `{v}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(MatrixRow {
            id: f[0].to_string(),
            src_span: parse_span(f[1]).ok_or_else(|| bad(format!("bad span `{}`", f[1])))?,
            tgt_span: parse_span(f[2]).ok_or_else(|| bad(format!("bad span `{}`", f[2])))?,
            label: f[3].parse().map_err(|e| bad(format!("{e}")))?,
            values,
        });
    }
    Ok(FeatureMatrix { specs, rows })
}
