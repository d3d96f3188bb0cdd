use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{open, ResourceError};

/// Dense vectors keyed by language-prefixed word or multi-word expression
/// (`en/big_enough`). Keys are lowercased at load.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    keys: Vec<String>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        EmbeddingTable {
            dim,
            index: HashMap::new(),
            keys: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Inserts or replaces a vector. Returns `true` when the key was already
    /// present.
    pub fn insert(&mut self, key: &str, vector: &[f64]) -> bool {
        assert_eq!(vector.len(), self.dim, "vector dimension mismatch for `{key}`");
        let key = key.to_lowercase();
        if let Some(&row) = self.index.get(&key) {
            self.data[row * self.dim..(row + 1) * self.dim].copy_from_slice(vector);
            return true;
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.data.extend_from_slice(vector);
        false
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.index
            .get(key)
            .map(|&row| &self.data[row * self.dim..(row + 1) * self.dim])
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.keys.iter().map(String::as_str)
    }

    /// Component-wise mean of every stored vector (zeros when empty).
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        if self.is_empty() {
            return m;
        }
        for row in self.data.chunks(self.dim) {
            for (a, b) in m.iter_mut().zip(row) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable, ResourceError> {
    let path = path.as_ref();
    read_embeddings(open(path)?, &path.display().to_string())
}

/// Reads the word2vec text format: a `count dim` header, then one key and
/// `dim` reals per line.
pub fn read_embeddings(reader: impl Read, name: &str) -> Result<EmbeddingTable, ResourceError> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let bad = |line: usize, message: String| ResourceError::Format {
        file: name.to_string(),
        line,
        message,
    };
    let (count, dim) = loop {
        let Some((n, line)) = lines.next() else {
            return Err(bad(1, "missing `count dim` header".into()));
        };
        let line = line.map_err(|e| ResourceError::io(name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<_> = line.split_whitespace().collect();
        let parse = |s: &str| s.parse::<usize>().ok();
        match parts.as_slice() {
            [c, d] => match (parse(c), parse(d)) {
                (Some(c), Some(d)) if d > 0 => break (c, d),
                _ => return Err(bad(n + 1, format!("bad header `{line}`"))),
            },
            _ => return Err(bad(n + 1, format!("bad header `{line}`"))),
        }
    };
    let mut table = EmbeddingTable::new(dim);
    let mut row = Vec::with_capacity(dim);
    for (n, line) in lines {
        let line = line.map_err(|e| ResourceError::io(name, e))?;
        let mut parts = line.split_whitespace();
        let Some(key) = parts.next() else { continue };
        row.clear();
        for tok in parts {
            let v: f64 = tok
                .parse()
                .map_err(|_| bad(n + 1, format!("unparseable real `{tok}`")))?;
            row.push(v);
        }
        if row.len() != dim {
            return Err(bad(
                n + 1,
                format!("`{key}` has {} components, expected {dim}", row.len()),
            ));
        }
        if table.insert(key, &row) {
            log::warn!("{name}:{}: duplicate embedding key `{key}`, keeping the last", n + 1);
        }
    }
    if table.len() != count {
        log::warn!("{name}: header announces {count} vectors, read {}", table.len());
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_small_table() {
        let t = read_embeddings("2 4\nen/cat 1 0 0 0\nen/big_enough 0 1 0 0.5\n".as_bytes(), "t").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 4);
        assert_eq!(t.get("en/big_enough").unwrap(), &[0.0, 1.0, 0.0, 0.5]);
        assert!(t.get("en/dog").is_none());
    }

    #[test]
    fn short_row_names_line() {
        let err = read_embeddings("2 4\nen/cat 1 0 0 0\nen/dog 1 2 3\n".as_bytes(), "t").unwrap_err();
        match err {
            ResourceError::Format { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bad_real_rejected() {
        assert!(read_embeddings("1 2\nen/cat 1 x\n".as_bytes(), "t").is_err());
    }

    #[test]
    fn duplicates_keep_last_and_keys_lowercase() {
        let t = read_embeddings("2 2\nEN/Cat 1 0\nen/cat 0 1\n".as_bytes(), "t").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("en/cat").unwrap(), &[0.0, 1.0]);
    }
}
