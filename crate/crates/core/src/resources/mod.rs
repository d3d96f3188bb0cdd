//! Read-only lexical resources consumed by the feature extractor.

mod concept;
mod embeddings;
mod lists;
mod translation;

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use concept::{load_concept_graph, normalize_node, read_concept_graph, Assertion, ConceptGraph};
pub use embeddings::{load_embeddings, read_embeddings, EmbeddingTable};
pub use lists::{load_manual_lists, parse_manual_lists, ManualLists, PosPattern, DEFAULT_LISTS};
pub use translation::{
    load_translation_table, read_directional, DirectionalTable, TranslationProbTable, MASS_EPSILON,
    NULL_WORD,
};

#[derive(Debug, thiserror::Error)]
pub enum ResourceError {
    #[error("cannot read {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Format {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}: {message}")]
    Invalid { file: String, message: String },
}

impl ResourceError {
    pub(crate) fn io(file: &str, source: std::io::Error) -> Self {
        ResourceError::Io {
            file: file.to_string(),
            source,
        }
    }
}

pub(crate) fn open(path: &Path) -> Result<File, ResourceError> {
    File::open(path).map_err(|e| ResourceError::io(&path.display().to_string(), e))
}

/// Locations of every resource file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourcePaths {
    pub embeddings: PathBuf,
    /// Rows `f<TAB>e<TAB>w(e|f)`.
    pub e_given_f: PathBuf,
    /// Rows `e<TAB>f<TAB>w(f|e)`.
    pub f_given_e: PathBuf,
    pub concept_graph: PathBuf,
    pub manual_lists: PathBuf,
    /// Pretrained vectors for the word-level neural models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_vectors: Option<PathBuf>,
}

impl ResourcePaths {
    pub fn all(&self) -> Vec<(&'static str, &Path)> {
        let mut v = vec![
            ("embeddings", self.embeddings.as_path()),
            ("e_given_f", self.e_given_f.as_path()),
            ("f_given_e", self.f_given_e.as_path()),
            ("concept_graph", self.concept_graph.as_path()),
            ("manual_lists", self.manual_lists.as_path()),
        ];
        if let Some(p) = &self.word_vectors {
            v.push(("word_vectors", p.as_path()));
        }
        v
    }

    /// Resolves relative paths against `base`.
    pub fn rebase(&mut self, base: &Path) {
        for p in [
            &mut self.embeddings,
            &mut self.e_given_f,
            &mut self.f_given_e,
            &mut self.concept_graph,
            &mut self.manual_lists,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = self.word_vectors.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
    }
}

/// All lexical resources, immutable after load.
#[derive(Debug, Clone)]
pub struct ResourceSet {
    pub embeddings: EmbeddingTable,
    pub translation: TranslationProbTable,
    pub concepts: ConceptGraph,
    pub lists: ManualLists,
    /// Vectors for the word-level neural models, when configured.
    pub word_vectors: Option<EmbeddingTable>,
    /// SHA-256 of each source file, by resource name.
    pub checksums: BTreeMap<String, String>,
}

impl ResourceSet {
    pub fn load(paths: &ResourcePaths) -> Result<Self, ResourceError> {
        let mut checksums = BTreeMap::new();
        for (name, path) in paths.all() {
            checksums.insert(name.to_string(), file_checksum(path)?);
        }
        let lists = load_manual_lists(&paths.manual_lists)?;
        let name = paths.concept_graph.display().to_string();
        let concepts = read_concept_graph(
            open(&paths.concept_graph)?,
            &name,
            lists.derivation_relations.iter(),
        )?;
        Ok(ResourceSet {
            embeddings: load_embeddings(&paths.embeddings)?,
            translation: load_translation_table(&paths.e_given_f, &paths.f_given_e)?,
            concepts,
            lists,
            word_vectors: paths.word_vectors.as_deref().map(load_embeddings).transpose()?,
            checksums,
        })
    }
}

pub fn file_checksum(path: &Path) -> Result<String, ResourceError> {
    let bytes = std::fs::read(path).map_err(|e| ResourceError::io(&path.display().to_string(), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
