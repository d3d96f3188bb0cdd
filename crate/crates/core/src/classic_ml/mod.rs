//! Classifiers over feature vectors: stratified dummy baseline, random
//! forest, feature MLP, voting ensembles and grid search.

mod dummy;
mod forest;
mod grid;
mod mlp;
mod vote;

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::optim::argmax;

pub use dummy::DummyModel;
pub use forest::{train_forest, FeatureSubsample, ForestModel, ForestParams, MaxDepth, Node, Tree};
pub use grid::{grid_search, ForestGrid, Grid, GridPoint, GridResult, MlpGrid};
pub use mlp::{train_feature_mlp, Activation, MlpModel, MlpParams, Net, Standardizer};
pub use vote::{VoteMode, VoteModel};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ClassicError {
    #[error("training data is empty")]
    Empty,
    #[error("training data has a single class ({0}); at least two are needed")]
    SingleClass(String),
    #[error("dataset is not rectangular: row {row} has {found} values, header has {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("label index {label} at row {row} is outside the class set of size {classes}")]
    BadLabel { row: usize, label: usize, classes: usize },
    #[error("feature header mismatch at column {column}: model expects `{expected}`, input has `{found}`")]
    HeaderMismatch { column: usize, expected: String, found: String },
    #[error("class sets differ between ensemble members: {0:?} vs {1:?}")]
    ClassMismatch(Vec<String>, Vec<String>),
    #[error("a vote needs at least two members, got {0}")]
    TooFewMembers(usize),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize, loss: f64 },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("empty grid")]
    EmptyGrid,
    #[error(transparent)]
    Folds(#[from] crate::evaluation::FoldError),
    #[error("model file: {0}")]
    Format(String),
    #[error("model file {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A rectangular feature table with one class index per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: Vec<String>,
    pub classes: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl Dataset {
    pub fn new(header: Vec<String>, classes: Vec<String>, x: Vec<Vec<f64>>, y: Vec<usize>) -> Result<Self, ClassicError> {
        assert_eq!(x.len(), y.len(), "rows and labels differ in length");
        for (row, r) in x.iter().enumerate() {
            if r.len() != header.len() {
                return Err(ClassicError::Ragged {
                    row,
                    expected: header.len(),
                    found: r.len(),
                });
            }
        }
        for (row, &label) in y.iter().enumerate() {
            if label >= classes.len() {
                return Err(ClassicError::BadLabel {
                    row,
                    label,
                    classes: classes.len(),
                });
            }
        }
        Ok(Dataset { header, classes, x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.header.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            header: self.header.clone(),
            classes: self.classes.clone(),
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for &y in &self.y {
            c[y] += 1;
        }
        c
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        Dataset {
            header: cols.iter().map(|&c| self.header[c].clone()).collect(),
            classes: self.classes.clone(),
            x: self.x.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect(),
            y: self.y.clone(),
        }
    }

    fn check_trainable(&self) -> Result<(), ClassicError> {
        if self.is_empty() {
            return Err(ClassicError::Empty);
        }
        let counts = self.class_counts();
        if counts.iter().filter(|&&c| c > 0).count() < 2 {
            let only = counts.iter().position(|&c| c > 0).unwrap_or(0);
            return Err(ClassicError::SingleClass(self.classes[only].clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub probs: Vec<f64>,
}

impl Prediction {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        Prediction {
            label: argmax(&probs),
            probs,
        }
    }
}

/// What to train, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierSpec {
    Dummy {
        #[serde(default)]
        seed: u64,
    },
    Forest(ForestParams),
    Mlp(MlpParams),
    Vote {
        mode: VoteMode,
        members: Vec<ClassifierSpec>,
    },
}

impl ClassifierSpec {
    /// Same spec with every seed replaced by one derived from `seed`.
    pub fn with_seed(&self, seed: u64) -> ClassifierSpec {
        match self {
            ClassifierSpec::Dummy { .. } => ClassifierSpec::Dummy { seed },
            ClassifierSpec::Forest(p) => ClassifierSpec::Forest(ForestParams { seed, ..p.clone() }),
            ClassifierSpec::Mlp(p) => ClassifierSpec::Mlp(MlpParams { seed, ..p.clone() }),
            ClassifierSpec::Vote { mode, members } => ClassifierSpec::Vote {
                mode: *mode,
                members: members
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.with_seed(crate::rng::derive(seed, &[i as u64])))
                    .collect(),
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Dummy { .. } => "dummy",
            ClassifierSpec::Forest(_) => "forest",
            ClassifierSpec::Mlp(_) => "mlp",
            ClassifierSpec::Vote { .. } => "vote",
        }
    }

    /// Short parameter summary for reports.
    pub fn describe(&self) -> String {
        match self {
            ClassifierSpec::Dummy { .. } => "dummy(stratified)".into(),
            ClassifierSpec::Forest(p) => format!(
                "forest(n_trees={}, max_depth={}, min_leaf={}, features={})",
                p.n_trees, p.max_depth, p.min_leaf, p.feature_subsample
            ),
            ClassifierSpec::Mlp(p) => format!(
                "mlp(hidden={:?}, activation={:?}, lr={}, epochs={}, batch={})",
                p.hidden, p.activation, p.lr, p.epochs, p.batch
            ),
            ClassifierSpec::Vote { mode, members } => {
                let m: Vec<String> = members.iter().map(|m| m.describe()).collect();
                format!("vote({mode:?}; {})", m.join("; "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum ModelBody {
    Dummy(DummyModel),
    Forest(ForestModel),
    Mlp(MlpModel),
    Vote(VoteModel),
}

/// A trained classifier with the feature header and class set it was
/// trained on. This is also the on-disk model container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub header: Vec<String>,
    pub classes: Vec<String>,
    #[serde(flatten)]
    pub body: ModelBody,
}

pub fn train(spec: &ClassifierSpec, data: &Dataset) -> Result<TrainedModel, ClassicError> {
    data.check_trainable()?;
    let body = match spec {
        ClassifierSpec::Dummy { seed } => ModelBody::Dummy(DummyModel::fit(data, *seed)),
        ClassifierSpec::Forest(p) => ModelBody::Forest(train_forest(data, p)?),
        ClassifierSpec::Mlp(p) => ModelBody::Mlp(train_feature_mlp(data, p)?),
        ClassifierSpec::Vote { mode, members } => {
            let members = members
                .iter()
                .map(|m| train(m, data))
                .collect::<Result<Vec<_>, _>>()?;
            ModelBody::Vote(VoteModel::new(*mode, members)?)
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        header: data.header.clone(),
        classes: data.classes.clone(),
        body,
    })
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match &self.body {
            ModelBody::Dummy(_) => "dummy",
            ModelBody::Forest(_) => "forest",
            ModelBody::Mlp(_) => "mlp",
            ModelBody::Vote(_) => "vote",
        }
    }

    /// Predictions for raw rows already in header order. The dummy model
    /// draws one label per row from its seeded stream, so results depend on
    /// the batch as a whole; every other model is row-wise pure.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Vec<Prediction> {
        match &self.body {
            ModelBody::Dummy(m) => m.predict_rows(rows.len()),
            ModelBody::Forest(m) => rows.iter().map(|r| Prediction::from_probs(m.predict_proba(r))).collect(),
            ModelBody::Mlp(m) => rows.iter().map(|r| Prediction::from_probs(m.predict_proba(r))).collect(),
            ModelBody::Vote(m) => m.predict_rows(rows),
        }
    }

    pub fn check_header(&self, x: &FeatureVector) -> Result<(), ClassicError> {
        let n = self.header.len().max(x.specs.len());
        for column in 0..n {
            let expected = self.header.get(column).map(String::as_str).unwrap_or("<none>");
            let found = x.specs.get(column).map(|s| s.name.as_str()).unwrap_or("<none>");
            if expected != found {
                return Err(ClassicError::HeaderMismatch {
                    column,
                    expected: expected.to_string(),
                    found: found.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction, ClassicError> {
        self.check_header(x)?;
        Ok(self.predict_rows(std::slice::from_ref(&x.values)).remove(0))
    }

    pub fn predict_batch(&self, xs: &[FeatureVector]) -> Result<Vec<Prediction>, ClassicError> {
        for x in xs {
            self.check_header(x)?;
        }
        let rows: Vec<Vec<f64>> = xs.iter().map(|x| x.values.clone()).collect();
        Ok(self.predict_rows(&rows))
    }

    pub fn write_json(&self, w: impl Write) -> Result<(), ClassicError> {
        serde_json::to_writer(w, self).map_err(|e| ClassicError::Format(e.to_string()))
    }

    pub fn read_json(r: impl Read) -> Result<Self, ClassicError> {
        let v: serde_json::Value = serde_json::from_reader(r).map_err(|e| ClassicError::Format(e.to_string()))?;
        match v.get("format_version").and_then(|v| v.as_u64()) {
            Some(n) if n == MODEL_FORMAT_VERSION as u64 => {}
            Some(n) => return Err(ClassicError::Format(format!("unsupported format_version {n}"))),
            None => return Err(ClassicError::Format("missing format_version".into())),
        }
        serde_json::from_value(v).map_err(|e| ClassicError::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassicError> {
        let io = |source| ClassicError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        self.write_json(&mut f)?;
        f.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, ClassicError> {
        let f = std::fs::File::open(path).map_err(|source| ClassicError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_json(std::io::BufReader::new(f))
    }
}


#[cfg(test)]
mod tests {
    use super::testdata::*;
    use super::*;
    use crate::features::{FeatureGroup, FeatureSpec};
    use std::sync::Arc;

    #[test]
    fn single_class_rejected() {
        let d = dataset(vec![vec![1.0], vec![2.0]], vec![1, 1], 2);
        let err = train(&ClassifierSpec::Dummy { seed: 0 }, &d).unwrap_err();
        assert!(matches!(err, ClassicError::SingleClass(c) if c == "c1"));
    }

    #[test]
    fn header_mismatch_names_column() {
        let d = separable(20, 1);
        let m = train(&ClassifierSpec::Dummy { seed: 0 }, &d).unwrap();
        let spec = |n: &str| FeatureSpec {
            name: n.into(),
            family: 3,
            group: FeatureGroup::Surface,
        };
        let x = FeatureVector {
            specs: Arc::from(vec![spec("x0"), spec("zz")]),
            values: vec![0.0, 0.0],
        };
        match m.predict(&x).unwrap_err() {
            ClassicError::HeaderMismatch { column, expected, found } => {
                assert_eq!((column, expected.as_str(), found.as_str()), (1, "x1", "zz"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn spec_toml() {
        let s: ClassifierSpec = toml::from_str("kind = \"forest\"\nn_trees = 10\nmax_depth = \"none\"\n").unwrap();
        match s {
            ClassifierSpec::Forest(p) => {
                assert_eq!(p.n_trees, 10);
                assert_eq!(p.max_depth, MaxDepth(None));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn model_json_round_trip_bit_exact() {
        let d = separable(60, 3);
        for spec in [
            ClassifierSpec::Dummy { seed: 4 },
            ClassifierSpec::Forest(ForestParams {
                n_trees: 5,
                ..ForestParams::default()
            }),
            ClassifierSpec::Mlp(MlpParams {
                hidden: vec![4],
                epochs: 3,
                ..MlpParams::default()
            }),
        ] {
            let m = train(&spec, &d).unwrap();
            let mut buf = Vec::new();
            m.write_json(&mut buf).unwrap();
            let back = TrainedModel::read_json(buf.as_slice()).unwrap();
            assert_eq!(back, m);
            let mut again = Vec::new();
            back.write_json(&mut again).unwrap();
            assert_eq!(buf, again);
        }
    }

    #[test]
    fn unsupported_version() {
        let err = TrainedModel::read_json(r#"{"format_version":9}"#.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("format_version 9"));
    }
}
