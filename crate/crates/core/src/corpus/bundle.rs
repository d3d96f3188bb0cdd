//! Line-delimited JSON annotation bundles.
//!
//! One sentence pair per line:
//!
//! ```text
//! {"format_version":1,"id":"ted-12-4",
//!  "src":{"tokens":[{"index":0,"surface":"back","lemma":"back","upos":"ADV"},...],
//!         "deps":[{"head":1,"dependent":0,"relation":"advmod"},...],
//!         "tree":{"label":"S","span":[0,5],"children":[...]}},
//!  "tgt":{...},
//!  "alignment":[[0,0],[1,2]],
//!  "phrase_pairs":[{"src_span":[0,2],"tgt_span":[0,3],"label":"Equivalence"}]}
//! ```
//!
//! Blank lines are ignored. Record numbers in errors are 1-based line numbers.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Serialize;

use super::{AnnotatedSentencePair, CorpusError};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct RecordOut<'a> {
    format_version: u32,
    #[serde(flatten)]
    pair: &'a AnnotatedSentencePair,
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<Vec<AnnotatedSentencePair>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_bundle(file).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

pub fn read_bundle(reader: impl Read) -> Result<Vec<AnnotatedSentencePair>, CorpusError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let record = n + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: "<bundle>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let pair = parse_record(record, &line)?;
        if !ids.insert(pair.id.clone()) {
            return Err(CorpusError::DuplicateId { record, id: pair.id });
        }
        pair.validate().map_err(|message| CorpusError::Invalid {
            record,
            id: pair.id.clone(),
            message,
        })?;
        out.push(pair);
    }
    Ok(out)
}

fn parse_record(record: usize, line: &str) -> Result<AnnotatedSentencePair, CorpusError> {
    let malformed = |field: &str, message: String| CorpusError::Malformed {
        record,
        field: field.to_string(),
        message,
    };
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| malformed("<record>", e.to_string()))?;
    let version = value
        .get("format_version")
        .ok_or_else(|| malformed("format_version", "missing".into()))?
        .as_u64()
        .ok_or_else(|| malformed("format_version", "not an integer".into()))?;
    if version != BUNDLE_FORMAT_VERSION as u64 {
        return Err(CorpusError::UnsupportedVersion {
            record,
            version: version as u32,
        });
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        malformed(&field, e.into_inner().to_string())
    })
}

pub fn write_bundle(mut writer: impl Write, pairs: &[AnnotatedSentencePair]) -> std::io::Result<()> {
    for pair in pairs {
        let rec = RecordOut {
            format_version: BUNDLE_FORMAT_VERSION,
            pair,
        };
        serde_json::to_writer(&mut writer, &rec)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"format_version":1,"id":"a","src":{"tokens":[{"index":0,"surface":"back","lemma":"back","upos":"ADV"},{"index":1,"surface":"then","lemma":"then","upos":"ADV"}],"deps":[{"head":0,"dependent":1,"relation":"advmod"}]},"tgt":{"tokens":[{"index":0,"surface":"à","lemma":"à","upos":"ADP"},{"index":1,"surface":"l'époque","lemma":"époque","upos":"NOUN"}]},"alignment":[[0,1],[1,1]],"phrase_pairs":[{"src_span":[0,2],"tgt_span":[0,2],"label":"Equivalence"}]}"#;

    #[test]
    fn empty_input_is_empty_corpus() {
        assert!(read_bundle("".as_bytes()).unwrap().is_empty());
        assert!(read_bundle("\n\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn reads_and_writes_back_identically() {
        let corpus = read_bundle(GOOD.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 1);
        let mut buf = Vec::new();
        write_bundle(&mut buf, &corpus).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), GOOD);
    }

    #[test]
    fn span_past_end_names_record() {
        let bad = GOOD.replace(r#""src_span":[0,2]"#, r#""src_span":[0,3]"#);
        let input = format!("{GOOD}\n{}", bad.replace(r#""id":"a""#, r#""id":"b""#));
        match read_bundle(input.as_bytes()) {
            Err(CorpusError::Invalid { record, id, message }) => {
                assert_eq!(record, 2);
                assert_eq!(id, "b");
                assert!(message.contains("src span"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_pos_reports_field_path() {
        let bad = GOOD.replacen(r#""upos":"ADV""#, r#""upos":"RB""#, 1);
        match read_bundle(bad.as_bytes()) {
            Err(CorpusError::Malformed { record, field, message }) => {
                assert_eq!(record, 1);
                assert_eq!(field, "src.tokens[0].upos");
                assert!(message.contains("RB"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_relation_is_an_error() {
        let bad = GOOD.replace("advmod", "npadvmod");
        assert!(matches!(read_bundle(bad.as_bytes()), Err(CorpusError::Malformed { .. })));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let input = format!("{GOOD}\n{GOOD}\n");
        assert!(matches!(
            read_bundle(input.as_bytes()),
            Err(CorpusError::DuplicateId { record: 2, .. })
        ));
    }

    #[test]
    fn version_is_checked() {
        let bad = GOOD.replace(r#""format_version":1"#, r#""format_version":7"#);
        assert!(matches!(
            read_bundle(bad.as_bytes()),
            Err(CorpusError::UnsupportedVersion { version: 7, .. })
        ));
    }

    #[test]
    fn duplicate_alignment_link_rejected() {
        let bad = GOOD.replace("[[0,1],[1,1]]", "[[0,1],[0,1]]");
        assert!(matches!(read_bundle(bad.as_bytes()), Err(CorpusError::Invalid { .. })));
    }
}
