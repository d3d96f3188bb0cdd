//! End-to-end classifiers over phrase text: a shared bidirectional GRU
//! encoder feeding either
//!
//! * an alignment head: dot-product alignment matrix, one same-padded
//!   convolution, adaptive max pooling to a fixed grid, a tanh
//!   fully-connected layer and a linear output; or
//! * a mean-concat head: time-averaged source and target encodings,
//!   concatenated, then a tanh hidden layer and a linear output.
//!
//! Gradients are computed by hand-written reverse-mode passes.

mod net;
pub mod ops;
mod train;

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotatedSentencePair, PhrasePair};
use crate::optim::argmax;
use crate::resources::EmbeddingTable;

pub use ops::{adaptive_max_pool, alignment_matrix, pool_bounds, Mat};
pub use train::{batch_loss_grad, gradient_check, init_params, train_neural, Example};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const UNK: &str = "<unk>";

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("empty symbol sequence")]
    EmptySequence,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        loss: f64,
        /// Model as it was after the last finite step.
        last_good: Box<NeuralModel>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Format(String),
    #[error("checkpoint {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    #[default]
    Alignment,
    MeanConcat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    #[default]
    Char,
    Word,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralConfig {
    pub architecture: Architecture,
    pub embedding: EmbeddingMode,
    pub char_dim: usize,
    /// Hidden size of each GRU direction.
    pub hidden: usize,
    pub conv_filters: usize,
    pub kernel: usize,
    pub pool: [usize; 2],
    /// Width of the fully-connected layer of the alignment head.
    pub fc: usize,
    /// Width of the hidden layer of the mean-concat head.
    pub mlp_hidden: usize,
    /// Applied to encoder outputs and hidden layers.
    pub dropout: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    /// Update pretrained word vectors during training.
    pub tune_embeddings: bool,
    /// Keep the space between words as a symbol in character mode.
    pub char_spaces: bool,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            architecture: Architecture::Alignment,
            embedding: EmbeddingMode::Char,
            char_dim: 10,
            hidden: 10,
            conv_filters: 16,
            kernel: 3,
            pool: [4, 4],
            fc: 10,
            mlp_hidden: 10,
            dropout: 0.2,
            epochs: 200,
            lr: 1e-4,
            batch: 20,
            seed: 0,
            tune_embeddings: false,
            char_spaces: true,
        }
    }
}

impl NeuralConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Config(m.to_string()));
        if self.hidden == 0 || self.batch == 0 || self.char_dim == 0 {
            return bad("hidden, batch and char_dim must be positive");
        }
        if self.kernel.is_multiple_of(2) {
            return bad("kernel size must be odd");
        }
        if self.pool.contains(&0) || self.conv_filters == 0 || self.fc == 0 || self.mlp_hidden == 0 {
            return bad("pool grid and layer widths must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!(
            "neural({:?}, {:?}, hidden={}, epochs={}, lr={}, batch={}, dropout={})",
            self.architecture, self.embedding, self.hidden, self.epochs, self.lr, self.batch, self.dropout
        )
    }
}

/// Symbol inventory; index 0 is the unknown symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(symbols: Vec<String>) -> Self {
        let index = symbols.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocab { symbols, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.symbols
    }
}

impl Vocab {
    /// Unknown symbol followed by every distinct symbol in sorted order.
    pub fn build<'a>(seqs: impl IntoIterator<Item = &'a [String]>) -> Self {
        let set: BTreeSet<&str> = seqs.into_iter().flatten().map(String::as_str).collect();
        let mut symbols = vec![UNK.to_string()];
        symbols.extend(set.into_iter().filter(|s| *s != UNK).map(str::to_string));
        Vocab::from(symbols)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn id(&self, s: &str) -> usize {
        self.index.get(s).copied().unwrap_or(0)
    }

    pub fn ids(&self, seq: &[String]) -> Vec<usize> {
        seq.iter().map(|s| self.id(s)).collect()
    }
}

/// Symbol sequences for the two sides of a phrase pair: lowercased,
/// language-prefixed words (`en/cat`) or characters of the space-joined
/// surfaces.
pub fn pair_symbols(sent: &AnnotatedSentencePair, pair: &PhrasePair, cfg: &NeuralConfig) -> (Vec<String>, Vec<String>) {
    let side = |toks: &[crate::corpus::Token], lang: &str| -> Vec<String> {
        match cfg.embedding {
            EmbeddingMode::Word => toks.iter().map(|t| format!("{lang}/{}", t.surface.to_lowercase())).collect(),
            EmbeddingMode::Char => {
                let sep = if cfg.char_spaces { " " } else { "" };
                let text = toks.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(sep);
                text.chars().map(|c| c.to_string()).collect()
            }
        }
    };
    (side(sent.src_tokens(pair), "en"), side(sent.tgt_tokens(pair), "fr"))
}

/// Rows of pretrained vectors for a word vocabulary. A symbol `en/cat` is
/// looked up as is and then as `cat`; misses and the unknown row get the
/// mean vector of the table.
pub fn word_embedding_matrix(vocab: &Vocab, table: &EmbeddingTable) -> (Vec<f64>, usize) {
    let mean = table.mean();
    let mut out = Vec::with_capacity(vocab.len() * table.dim());
    for s in vocab.symbols() {
        let plain = s.split_once('/').map_or(s.as_str(), |(_, w)| w);
        let v = table.get(s).or_else(|| table.get(plain)).unwrap_or(&mean);
        out.extend_from_slice(v);
    }
    (out, table.dim())
}

/// Offsets of every parameter block in the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub vocab: usize,
    pub dim: usize,
    pub hidden: usize,
    pub n_classes: usize,
    pub emb: Range<usize>,
    pub gru_fwd: Range<usize>,
    pub gru_bwd: Range<usize>,
    pub head: HeadLayout,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeadLayout {
    Alignment {
        conv_w: Range<usize>,
        conv_b: Range<usize>,
        fc_w: Range<usize>,
        fc_b: Range<usize>,
        out_w: Range<usize>,
        out_b: Range<usize>,
    },
    MeanConcat {
        hid_w: Range<usize>,
        hid_b: Range<usize>,
        out_w: Range<usize>,
        out_b: Range<usize>,
    },
}

impl Layout {
    pub fn new(cfg: &NeuralConfig, vocab: usize, dim: usize, n_classes: usize) -> Self {
        let mut off = 0;
        let mut take = |n: usize| {
            let r = off..off + n;
            off += n;
            r
        };
        let h = cfg.hidden;
        let emb = take(vocab * dim);
        let gru_fwd = take(ops::gru_len(dim, h));
        let gru_bwd = take(ops::gru_len(dim, h));
        let head = match cfg.architecture {
            Architecture::Alignment => {
                let f = cfg.conv_filters;
                let pooled = f * cfg.pool[0] * cfg.pool[1];
                HeadLayout::Alignment {
                    conv_w: take(f * cfg.kernel * cfg.kernel),
                    conv_b: take(f),
                    fc_w: take(cfg.fc * pooled),
                    fc_b: take(cfg.fc),
                    out_w: take(n_classes * cfg.fc),
                    out_b: take(n_classes),
                }
            }
            Architecture::MeanConcat => HeadLayout::MeanConcat {
                hid_w: take(cfg.mlp_hidden * 4 * h),
                hid_b: take(cfg.mlp_hidden),
                out_w: take(n_classes * cfg.mlp_hidden),
                out_b: take(n_classes),
            },
        };
        Layout {
            vocab,
            dim,
            hidden: h,
            n_classes,
            emb,
            gru_fwd,
            gru_bwd,
            head,
            len: off,
        }
    }
}

/// A trained network with everything needed to run it: configuration,
/// class names, vocabulary and parameters. Also the checkpoint format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub format_version: u32,
    pub config: NeuralConfig,
    pub classes: Vec<String>,
    pub vocab: Vocab,
    pub dim: usize,
    pub params: Vec<f64>,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
}

impl NeuralModel {
    pub fn layout(&self) -> Layout {
        Layout::new(&self.config, self.vocab.len(), self.dim, self.classes.len())
    }

    /// Encoder output (`T x 2h`) for a symbol sequence, dropout off.
    pub fn encode(&self, ids: &[usize]) -> Result<Mat, NeuralError> {
        if ids.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        Ok(net::encode(&self.params, &self.layout(), ids))
    }

    /// Class probabilities for one pair of symbol-id sequences.
    pub fn predict_ids(&self, src: &[usize], tgt: &[usize]) -> Result<Vec<f64>, NeuralError> {
        if src.is_empty() || tgt.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let layout = self.layout();
        Ok(net::forward(&self.params, &layout, &self.config, src, tgt, None).0)
    }

    pub fn predict_pair(&self, sent: &AnnotatedSentencePair, pair: &PhrasePair) -> Result<(usize, Vec<f64>), NeuralError> {
        let (s, t) = pair_symbols(sent, pair, &self.config);
        let p = self.predict_ids(&self.vocab.ids(&s), &self.vocab.ids(&t))?;
        Ok((argmax(&p), p))
    }

    pub fn write_json(&self, w: impl Write) -> Result<(), NeuralError> {
        serde_json::to_writer(w, self).map_err(|e| NeuralError::Format(e.to_string()))
    }

    pub fn read_json(r: impl Read) -> Result<Self, NeuralError> {
        let v: serde_json::Value = serde_json::from_reader(r).map_err(|e| NeuralError::Format(e.to_string()))?;
        match v.get("format_version").and_then(|v| v.as_u64()) {
            Some(n) if n == CHECKPOINT_VERSION as u64 => {}
            other => return Err(NeuralError::Format(format!("unsupported format_version {other:?}"))),
        }
        let m: NeuralModel = serde_json::from_value(v).map_err(|e| NeuralError::Format(e.to_string()))?;
        if m.params.len() != m.layout().len {
            return Err(NeuralError::Format(format!(
                "parameter count {} does not match the configuration ({})",
                m.params.len(),
                m.layout().len
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let io = |source| NeuralError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        self.write_json(&mut f)?;
        f.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let f = std::fs::File::open(path).map_err(|source| NeuralError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_json(std::io::BufReader::new(f))
    }

    /// Loss curve as `epoch<TAB>loss` lines.
    pub fn write_loss_curve(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "epoch\tloss")?;
        for (i, l) in self.loss_curve.iter().enumerate() {
            writeln!(w, "{}\t{l}", i + 1)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_is_sorted_with_unknown_first() {
        let a = vec!["b".to_string(), "a".to_string()];
        let b = vec!["c".to_string(), "a".to_string()];
        let v = Vocab::build([a.as_slice(), b.as_slice()]);
        assert_eq!(v.symbols(), ["<unk>", "a", "b", "c"]);
        assert_eq!(v.id("zz"), 0);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocab>(&json).unwrap(), v);
    }

    #[test]
    fn layout_sizes() {
        let cfg = NeuralConfig {
            architecture: Architecture::MeanConcat,
            ..Default::default()
        };
        let l = Layout::new(&cfg, 5, 10, 2);
        assert_eq!(l.emb.len(), 50);
        assert_eq!(l.gru_fwd.len(), 3 * 10 * 10 + 3 * 10 * 10 + 30);
        match &l.head {
            HeadLayout::MeanConcat { hid_w, .. } => assert_eq!(hid_w.len(), 10 * 40),
            _ => panic!(),
        }
        let a = Layout::new(&NeuralConfig::default(), 5, 10, 2);
        match &a.head {
            HeadLayout::Alignment { fc_w, conv_w, .. } => {
                assert_eq!(conv_w.len(), 16 * 9);
                assert_eq!(fc_w.len(), 10 * 256);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn word_matrix_falls_back_to_mean() {
        let t = crate::resources::read_embeddings("2 2\nen/cat 1 0\ndog 0 1\n".as_bytes(), "t").unwrap();
        let v = Vocab::from(vec![UNK.to_string(), "en/cat".into(), "en/dog".into(), "fr/chat".into()]);
        let (m, d) = word_embedding_matrix(&v, &t);
        assert_eq!(d, 2);
        assert_eq!(m, vec![0.5, 0.5, 1.0, 0.0, 0.0, 1.0, 0.5, 0.5]);
    }
}
