use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{stratified_kfold, train_indices, FoldError};
use super::metrics::{compute_metrics, MetricsError, MetricsReport};
use super::task::{subsample, SubsampleError, Task, TaskSample};
use crate::classic_ml::{grid_search, train, ClassicError, ClassifierSpec, Dataset, Grid, TrainedModel};
use crate::corpus::{normalize_sentence, pair_refs, AnnotatedSentencePair, NormalizationRules, PairRef, RawLabel};
use crate::features::{FeatureConfig, FeatureExtractor, FeatureGroup, FeatureMask, FeatureMatrix};
use crate::neural::{
    pair_symbols, train_neural, word_embedding_matrix, EmbeddingMode, Example, NeuralConfig, NeuralError, NeuralModel,
    Vocab,
};
use crate::optim::argmax;
use crate::resources::ResourceSet;
use crate::rng;

pub const PIPELINE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("experiment `{name}`: {message}")]
    Config { name: String, message: String },
    #[error(transparent)]
    Subsample(#[from] SubsampleError),
    #[error(transparent)]
    Folds(#[from] FoldError),
    #[error(transparent)]
    Classic(#[from] ClassicError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("model file: {0}")]
    Model(String),
}

/// Which trained models a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelOutput {
    #[default]
    None,
    PerFold,
    /// One extra model trained on the whole task sample.
    Final,
}

fn default_folds() -> usize {
    5
}

fn default_inner_folds() -> usize {
    3
}

/// One experiment: a task, a learner and the feature families it sees.
/// Exactly one of `classifier`, `grid` or `neural` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Folds of the nested search run inside each training fold.
    #[serde(default = "default_inner_folds")]
    pub inner_folds: usize,
    /// Feature families, 1 to 11.
    #[serde(default)]
    pub mask: FeatureMask,
    /// Groups removed from `mask`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drop_groups: Vec<FeatureGroup>,
    /// Run the ablation grid instead of a single evaluation.
    #[serde(default)]
    pub ablation: bool,
    #[serde(default)]
    pub models: ModelOutput,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neural: Option<NeuralConfig>,
}

/// The learner of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Fixed(ClassifierSpec),
    Tuned(Vec<ClassifierSpec>),
    Neural(NeuralConfig),
}

impl ExperimentConfig {
    pub fn new(name: &str, task: Task, classifier: ClassifierSpec) -> Self {
        ExperimentConfig {
            name: name.to_string(),
            task,
            seed: 0,
            folds: default_folds(),
            inner_folds: default_inner_folds(),
            mask: FeatureMask::all(),
            drop_groups: Vec::new(),
            ablation: false,
            models: ModelOutput::None,
            features: FeatureConfig::default(),
            classifier: Some(classifier),
            grid: None,
            neural: None,
        }
    }

    fn error(&self, message: impl Into<String>) -> ExperimentError {
        ExperimentError::Config {
            name: self.name.clone(),
            message: message.into(),
        }
    }

    pub fn effective_mask(&self) -> FeatureMask {
        FeatureMask::families(
            self.mask
                .family_list()
                .into_iter()
                .filter(|&f| !self.drop_groups.contains(&FeatureGroup::of_family(f))),
        )
    }

    pub fn method(&self) -> Result<Method, ExperimentError> {
        match (&self.classifier, &self.grid, &self.neural) {
            (Some(c), None, None) => Ok(Method::Fixed(c.clone())),
            (None, Some(g), None) => {
                let points = g.expand();
                if points.is_empty() {
                    return Err(self.error("grid expands to no points"));
                }
                Ok(Method::Tuned(points))
            }
            (None, None, Some(n)) => {
                n.validate()?;
                Ok(Method::Neural(n.clone()))
            }
            _ => Err(self.error("set exactly one of `classifier`, `grid` or `neural`")),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.folds < 2 || self.inner_folds < 2 {
            return Err(self.error("folds and inner_folds must be at least 2"));
        }
        let method = self.method()?;
        if !matches!(method, Method::Neural(_)) && self.effective_mask().is_empty() {
            return Err(self.error("feature mask is empty"));
        }
        if self.ablation && matches!(method, Method::Neural(_)) {
            return Err(self.error("ablation needs a feature-based classifier"));
        }
        Ok(())
    }

    pub fn describe_method(&self) -> String {
        match self.method() {
            Ok(Method::Fixed(c)) => c.describe(),
            Ok(Method::Tuned(points)) => format!("grid[{}] of {}", points.len(), points[0].name()),
            Ok(Method::Neural(n)) => n.describe(),
            Err(e) => e.to_string(),
        }
    }
}

/// Every seed used by a run; re-running with these reproduces it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub experiment: u64,
    pub subsample: u64,
    pub folds: u64,
    pub per_fold: Vec<u64>,
}

impl Seeds {
    pub fn new(seed: u64, k: usize) -> Self {
        Seeds {
            experiment: seed,
            subsample: rng::derive(seed, &[0]),
            folds: rng::derive(seed, &[1]),
            per_fold: (0..k as u64).map(|f| rng::derive(seed, &[2, f])).collect(),
        }
    }

    /// Seed of the final full-sample model.
    pub fn final_model(&self) -> u64 {
        rng::derive(self.experiment, &[3])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    /// Learner actually trained, after any tuning.
    pub selected: String,
    /// Inner-search mean accuracy per grid point.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstancePrediction {
    pub id: String,
    pub fold: usize,
    pub gold: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "model", rename_all = "snake_case")]
pub enum ModelBody {
    Classic(TrainedModel),
    Neural(NeuralModel),
}

/// A trained model with what is needed to rebuild its inputs from a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub format_version: u32,
    pub experiment: String,
    pub task: Task,
    pub mask: FeatureMask,
    pub features: FeatureConfig,
    #[serde(flatten)]
    pub body: ModelBody,
}

impl PipelineModel {
    pub fn classes(&self) -> &[String] {
        match &self.body {
            ModelBody::Classic(m) => &m.classes,
            ModelBody::Neural(m) => &m.classes,
        }
    }

    pub fn write_json(&self, w: impl Write) -> Result<(), ExperimentError> {
        serde_json::to_writer(w, self).map_err(|e| ExperimentError::Model(e.to_string()))
    }

    /// Reads a model file, re-running the checks of the inner model format.
    pub fn read_json(r: impl Read) -> Result<Self, ExperimentError> {
        let bad = |e: &dyn std::fmt::Display| ExperimentError::Model(e.to_string());
        let v: serde_json::Value = serde_json::from_reader(r).map_err(|e| bad(&e))?;
        match v.get("format_version").and_then(|v| v.as_u64()) {
            Some(n) if n == PIPELINE_FORMAT_VERSION as u64 => {}
            other => return Err(ExperimentError::Model(format!("unsupported format_version {other:?}"))),
        }
        let inner = v.get("model").ok_or_else(|| ExperimentError::Model("missing `model`".into()))?;
        let bytes = serde_json::to_vec(inner).map_err(|e| bad(&e))?;
        match v.get("family").and_then(|f| f.as_str()) {
            Some("classic") => {
                TrainedModel::read_json(bytes.as_slice())?;
            }
            Some("neural") => {
                NeuralModel::read_json(bytes.as_slice())?;
            }
            other => return Err(ExperimentError::Model(format!("unknown model family {other:?}"))),
        }
        serde_json::from_value(v).map_err(|e| bad(&e))
    }

    pub fn save(&self, path: &Path) -> Result<(), ExperimentError> {
        let io = |e: std::io::Error| ExperimentError::Model(format!("{}: {e}", path.display()));
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        self.write_json(&mut f)?;
        f.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let f = std::fs::File::open(path).map_err(|e| ExperimentError::Model(format!("{}: {e}", path.display())))?;
        Self::read_json(std::io::BufReader::new(f))
    }

    /// Predicted class and probabilities for every phrase pair of a
    /// (normalized) corpus, in corpus order.
    pub fn predict_corpus(
        &self,
        corpus: &[AnnotatedSentencePair],
        resources: &ResourceSet,
    ) -> Result<Vec<(PairRef, usize, Vec<f64>)>, ExperimentError> {
        let refs = pair_refs(corpus);
        match &self.body {
            ModelBody::Classic(m) => {
                let ex = FeatureExtractor::new(resources, self.features, self.mask.clone());
                let header: Vec<&str> = ex.specs().iter().map(|s| s.name.as_str()).collect();
                if let Some(column) = (0..m.header.len().max(header.len()))
                    .find(|&c| m.header.get(c).map(String::as_str) != header.get(c).copied())
                {
                    return Err(ClassicError::HeaderMismatch {
                        column,
                        expected: m.header.get(column).cloned().unwrap_or_else(|| "<none>".into()),
                        found: header.get(column).map_or("<none>".into(), |s| s.to_string()),
                    }
                    .into());
                }
                let rows = ex.extract_all(corpus, &refs);
                let preds = m.predict_rows(&rows);
                Ok(refs.into_iter().zip(preds).map(|(r, p)| (r, p.label, p.probs)).collect())
            }
            ModelBody::Neural(m) => refs
                .into_par_iter()
                .map(|r| {
                    let sent = &corpus[r.sentence];
                    let (label, probs) = m.predict_pair(sent, &sent.phrase_pairs[r.pair])?;
                    Ok((r, label, probs))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub method: String,
    pub mask: String,
    pub seeds: Seeds,
    pub class_counts: Vec<usize>,
    pub report: MetricsReport,
    pub folds: Vec<FoldRecord>,
    #[serde(skip)]
    pub predictions: Vec<InstancePrediction>,
    /// `(name, model)`: `fold<k>` or `final`.
    #[serde(skip)]
    pub models: Vec<(String, PipelineModel)>,
}

/// Applies the default English and French normalization to every sentence.
pub fn normalize_corpus(corpus: &[AnnotatedSentencePair]) -> Vec<AnnotatedSentencePair> {
    let en = NormalizationRules::english();
    let fr = NormalizationRules::french();
    corpus.par_iter().map(|s| normalize_sentence(s, &en, &fr)).collect()
}

/// Labels of every phrase pair, in corpus order.
fn raw_labels(corpus: &[AnnotatedSentencePair], refs: &[PairRef]) -> Vec<RawLabel> {
    refs.iter().map(|r| corpus[r.sentence].phrase_pairs[r.pair].label).collect()
}

fn pair_id(corpus: &[AnnotatedSentencePair], r: PairRef) -> String {
    format!("{}#{}", corpus[r.sentence].id, r.pair)
}

/// Feature matrix of every phrase pair of a corpus under a mask.
pub fn featurize(
    corpus: &[AnnotatedSentencePair],
    resources: &ResourceSet,
    features: FeatureConfig,
    mask: FeatureMask,
) -> FeatureMatrix {
    let ex = FeatureExtractor::new(resources, features, mask);
    let refs = pair_refs(corpus);
    let values = ex.extract_all(corpus, &refs);
    FeatureMatrix::new(ex.specs(), corpus, &refs, values)
}

/// Features of a task sample, with the family of every column.
struct SampleFeatures {
    data: Dataset,
    families: Vec<u8>,
}

fn sample_features(
    corpus: &[AnnotatedSentencePair],
    refs: &[PairRef],
    sample: &TaskSample,
    resources: &ResourceSet,
    features: FeatureConfig,
    mask: FeatureMask,
) -> Result<SampleFeatures, ExperimentError> {
    let ex = FeatureExtractor::new(resources, features, mask);
    let chosen: Vec<PairRef> = sample.indices.iter().map(|&i| refs[i]).collect();
    let x = ex.extract_all(corpus, &chosen);
    let header = ex.specs().iter().map(|s| s.name.clone()).collect();
    let families = ex.specs().iter().map(|s| s.family).collect();
    let data = Dataset::new(header, sample.classes.clone(), x, sample.labels.clone())?;
    Ok(SampleFeatures { data, families })
}

struct FoldOutcome {
    record: FoldRecord,
    gold: Vec<usize>,
    pred: Vec<usize>,
    test: Vec<usize>,
    model: Option<ModelBody>,
}

/// Trains on `train` and predicts `test`. `fold_of` tags every instance
/// with its test fold; training on an instance of fold `f` is a leak.
fn run_fold_features(
    data: &Dataset,
    method: &Method,
    inner_folds: usize,
    f: usize,
    seed: u64,
    train_idx: &[usize],
    test_idx: &[usize],
    fold_of: &[usize],
    keep: bool,
) -> Result<FoldOutcome, ExperimentError> {
    assert!(train_idx.iter().all(|&i| fold_of[i] != f), "test instance in training fold");
    let train_set = data.subset(train_idx);
    let (spec, grid) = match method {
        Method::Fixed(s) => (s.clone(), Vec::new()),
        Method::Tuned(points) => {
            let r = grid_search(&train_set, points, inner_folds, rng::derive(seed, &[0]))?;
            let means = r.points.iter().map(|p| p.mean_accuracy).collect();
            (r.best_spec().clone(), means)
        }
        Method::Neural(_) => unreachable!("neural folds run elsewhere"),
    };
    let model = train(&spec.with_seed(rng::derive(seed, &[1])), &train_set)?;
    let rows: Vec<Vec<f64>> = test_idx.iter().map(|&i| data.x[i].clone()).collect();
    let pred = model.predict_rows(&rows).into_iter().map(|p| p.label).collect();
    Ok(FoldOutcome {
        record: FoldRecord {
            fold: f,
            seed,
            train_size: train_idx.len(),
            test_size: test_idx.len(),
            selected: spec.describe(),
            grid,
            loss_curve: Vec::new(),
        },
        gold: test_idx.iter().map(|&i| data.y[i]).collect(),
        pred,
        test: test_idx.to_vec(),
        model: keep.then_some(ModelBody::Classic(model)),
    })
}

/// Symbol sequences of a task sample for the neural pipeline.
struct SampleText {
    src: Vec<Vec<String>>,
    tgt: Vec<Vec<String>>,
    labels: Vec<usize>,
}

fn sample_text(corpus: &[AnnotatedSentencePair], refs: &[PairRef], sample: &TaskSample, cfg: &NeuralConfig) -> SampleText {
    let (src, tgt) = sample
        .indices
        .iter()
        .map(|&i| {
            let r = refs[i];
            let sent = &corpus[r.sentence];
            pair_symbols(sent, &sent.phrase_pairs[r.pair], cfg)
        })
        .unzip();
    SampleText {
        src,
        tgt,
        labels: sample.labels.clone(),
    }
}

fn train_text_model(
    text: &SampleText,
    idx: &[usize],
    cfg: &NeuralConfig,
    classes: &[String],
    resources: &ResourceSet,
    seed: u64,
) -> Result<NeuralModel, ExperimentError> {
    let vocab = Vocab::build(idx.iter().flat_map(|&i| [text.src[i].as_slice(), text.tgt[i].as_slice()]));
    let examples: Vec<Example> = idx
        .iter()
        .map(|&i| Example {
            src: vocab.ids(&text.src[i]),
            tgt: vocab.ids(&text.tgt[i]),
            label: text.labels[i],
        })
        .collect();
    let cfg = NeuralConfig { seed, ..cfg.clone() };
    let (pretrained, dim) = match cfg.embedding {
        EmbeddingMode::Char => (None, cfg.char_dim),
        EmbeddingMode::Word => {
            let table = resources.word_vectors.as_ref().unwrap_or(&resources.embeddings);
            let (m, dim) = word_embedding_matrix(&vocab, table);
            (Some(m), dim)
        }
    };
    Ok(train_neural(&examples, &cfg, classes.to_vec(), vocab, dim, pretrained.as_deref())?)
}

fn run_fold_neural(
    text: &SampleText,
    cfg: &NeuralConfig,
    classes: &[String],
    resources: &ResourceSet,
    f: usize,
    seed: u64,
    train_idx: &[usize],
    test_idx: &[usize],
    keep: bool,
) -> Result<FoldOutcome, ExperimentError> {
    let model = train_text_model(text, train_idx, cfg, classes, resources, rng::derive(seed, &[1]))?;
    let pred = test_idx
        .par_iter()
        .map(|&i| {
            let p = model.predict_ids(&model.vocab.ids(&text.src[i]), &model.vocab.ids(&text.tgt[i]))?;
            Ok(argmax(&p))
        })
        .collect::<Result<Vec<_>, NeuralError>>()?;
    Ok(FoldOutcome {
        record: FoldRecord {
            fold: f,
            seed,
            train_size: train_idx.len(),
            test_size: test_idx.len(),
            selected: model.config.describe(),
            grid: Vec::new(),
            loss_curve: model.loss_curve.clone(),
        },
        gold: test_idx.iter().map(|&i| text.labels[i]).collect(),
        pred,
        test: test_idx.to_vec(),
        model: keep.then_some(ModelBody::Neural(model)),
    })
}

/// Stratified folds of a sample plus the fold tag of every instance.
fn make_folds(labels: &[usize], k: usize, seed: u64) -> Result<(Vec<Vec<usize>>, Vec<usize>), FoldError> {
    let folds = stratified_kfold(labels, k, seed)?;
    let mut fold_of = vec![0; labels.len()];
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            fold_of[i] = f;
        }
    }
    Ok((folds, fold_of))
}

fn collect(
    cfg: &ExperimentConfig,
    mask: &FeatureMask,
    method: String,
    seeds: Seeds,
    sample: &TaskSample,
    ids: &[String],
    outcomes: Vec<FoldOutcome>,
    final_model: Option<ModelBody>,
) -> Result<ExperimentResult, ExperimentError> {
    let mut fold_metrics = Vec::new();
    let mut folds = Vec::new();
    let mut predictions = Vec::new();
    let mut models = Vec::new();
    let pipeline = |body| PipelineModel {
        format_version: PIPELINE_FORMAT_VERSION,
        experiment: cfg.name.clone(),
        task: cfg.task,
        mask: mask.clone(),
        features: cfg.features,
        body,
    };
    for o in outcomes {
        fold_metrics.push(compute_metrics(&o.gold, &o.pred, sample.classes.len())?);
        for ((&i, &g), &p) in o.test.iter().zip(&o.gold).zip(&o.pred) {
            predictions.push(InstancePrediction {
                id: ids[i].clone(),
                fold: o.record.fold,
                gold: g,
                predicted: p,
            });
        }
        if let Some(m) = o.model {
            models.push((format!("fold{}", o.record.fold), pipeline(m)));
        }
        folds.push(o.record);
    }
    if let Some(m) = final_model {
        models.push(("final".to_string(), pipeline(m)));
    }
    predictions.sort_by(|a, b| a.id.cmp(&b.id));
    let report = MetricsReport::aggregate(sample.classes.clone(), fold_metrics);
    debug_assert!((report.micro_f1 - report.accuracy).abs() < 1e-9);
    Ok(ExperimentResult {
        config: cfg.clone(),
        method,
        mask: mask.label(),
        seeds,
        class_counts: sample.class_counts(),
        report,
        folds,
        predictions,
        models,
    })
}

/// Cross-validated evaluation of one experiment on a normalized corpus.
/// Folds run in parallel; every random stream is derived from the
/// experiment seed and the fold index, so results do not depend on
/// scheduling. Standardization and tuning see training folds only.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    corpus: &[AnnotatedSentencePair],
    resources: &ResourceSet,
) -> Result<ExperimentResult, ExperimentError> {
    cfg.validate()?;
    let method = cfg.method()?;
    let seeds = Seeds::new(cfg.seed, cfg.folds);
    let refs = pair_refs(corpus);
    let sample = subsample(&raw_labels(corpus, &refs), cfg.task, seeds.subsample)?;
    let ids: Vec<String> = sample.indices.iter().map(|&i| pair_id(corpus, refs[i])).collect();
    let (folds, fold_of) = make_folds(&sample.labels, cfg.folds, seeds.folds)?;
    let keep = cfg.models == ModelOutput::PerFold;
    let all: Vec<usize> = (0..sample.labels.len()).collect();
    let mask = cfg.effective_mask();
    log::info!(
        "{}: task {} with {} instances {:?}, seed {}",
        cfg.name,
        cfg.task,
        sample.labels.len(),
        sample.class_counts(),
        cfg.seed
    );
    let (outcomes, final_model) = match &method {
        Method::Neural(ncfg) => {
            let text = sample_text(corpus, &refs, &sample, ncfg);
            let outcomes = (0..cfg.folds)
                .into_par_iter()
                .map(|f| {
                    let train_idx = train_indices(&folds, f);
                    assert!(train_idx.iter().all(|&i| fold_of[i] != f), "test instance in training fold");
                    run_fold_neural(&text, ncfg, &sample.classes, resources, f, seeds.per_fold[f], &train_idx, &folds[f], keep)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let final_model = match cfg.models {
                ModelOutput::Final => Some(ModelBody::Neural(train_text_model(
                    &text,
                    &all,
                    ncfg,
                    &sample.classes,
                    resources,
                    seeds.final_model(),
                )?)),
                _ => None,
            };
            (outcomes, final_model)
        }
        _ => {
            let feats = sample_features(corpus, &refs, &sample, resources, cfg.features, mask.clone())?;
            let outcomes = cv_features(&feats.data, &method, cfg, &seeds, &folds, &fold_of, keep)?;
            let final_model = match cfg.models {
                ModelOutput::Final => Some(final_features_model(&feats.data, &method, cfg, &seeds)?),
                _ => None,
            };
            (outcomes, final_model)
        }
    };
    collect(cfg, &mask, cfg.describe_method(), seeds, &sample, &ids, outcomes, final_model)
}

fn cv_features(
    data: &Dataset,
    method: &Method,
    cfg: &ExperimentConfig,
    seeds: &Seeds,
    folds: &[Vec<usize>],
    fold_of: &[usize],
    keep: bool,
) -> Result<Vec<FoldOutcome>, ExperimentError> {
    (0..folds.len())
        .into_par_iter()
        .map(|f| {
            let train_idx = train_indices(folds, f);
            run_fold_features(data, method, cfg.inner_folds, f, seeds.per_fold[f], &train_idx, &folds[f], fold_of, keep)
        })
        .collect()
}

fn final_features_model(data: &Dataset, method: &Method, cfg: &ExperimentConfig, seeds: &Seeds) -> Result<ModelBody, ExperimentError> {
    let seed = seeds.final_model();
    let spec = match method {
        Method::Fixed(s) => s.clone(),
        Method::Tuned(points) => grid_search(data, points, cfg.inner_folds, rng::derive(seed, &[0]))?
            .best_spec()
            .clone(),
        Method::Neural(_) => unreachable!(),
    };
    Ok(ModelBody::Classic(train(&spec.with_seed(rng::derive(seed, &[1])), data)?))
}

/// How an ablation row's feature set was formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    Full,
    Group,
    LeaveOneOut,
    Family,
}

impl AblationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AblationKind::Full => "full",
            AblationKind::Group => "group",
            AblationKind::LeaveOneOut => "leave_one_out",
            AblationKind::Family => "family",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub rank: usize,
    pub kind: AblationKind,
    pub mask: FeatureMask,
    pub label: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub config: ExperimentConfig,
    pub method: String,
    pub seeds: Seeds,
    pub class_counts: Vec<usize>,
    /// Ranked by accuracy, best first; ties keep generation order.
    pub rows: Vec<AblationRow>,
}

/// Feature sets of an ablation, in generation order and without
/// duplicates: all families, each group, each group left out, each family.
pub fn ablation_masks() -> Vec<(AblationKind, FeatureMask)> {
    let mut out: Vec<(AblationKind, FeatureMask)> = vec![(AblationKind::Full, FeatureMask::all())];
    out.extend(FeatureGroup::ALL.map(|g| (AblationKind::Group, FeatureMask::groups([g]))));
    out.extend(FeatureGroup::ALL.map(|g| (AblationKind::LeaveOneOut, FeatureMask::without_group(g))));
    out.extend((1..=11).map(|f| (AblationKind::Family, FeatureMask::families([f]))));
    let mut seen = std::collections::BTreeSet::new();
    out.retain(|(_, m)| seen.insert(m.clone()));
    out
}

/// Evaluates every ablation feature set with the learner, folds and seeds
/// of `base`. Features are extracted once and columns selected per set.
pub fn ablation_study(
    base: &ExperimentConfig,
    corpus: &[AnnotatedSentencePair],
    resources: &ResourceSet,
) -> Result<AblationResult, ExperimentError> {
    base.validate()?;
    let method = base.method()?;
    if matches!(method, Method::Neural(_)) {
        return Err(base.error("ablation needs a feature-based classifier"));
    }
    let seeds = Seeds::new(base.seed, base.folds);
    let refs = pair_refs(corpus);
    let sample = subsample(&raw_labels(corpus, &refs), base.task, seeds.subsample)?;
    let (folds, fold_of) = make_folds(&sample.labels, base.folds, seeds.folds)?;
    let feats = sample_features(corpus, &refs, &sample, resources, base.features, FeatureMask::all())?;
    let masks = ablation_masks();
    let reports = masks
        .par_iter()
        .map(|(_, mask)| {
            let cols: Vec<usize> = (0..feats.families.len()).filter(|&c| mask.contains(feats.families[c])).collect();
            let data = feats.data.select_columns(&cols);
            let outcomes = cv_features(&data, &method, base, &seeds, &folds, &fold_of, false)?;
            let metrics = outcomes
                .iter()
                .map(|o| compute_metrics(&o.gold, &o.pred, sample.classes.len()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(MetricsReport::aggregate(sample.classes.clone(), metrics))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let mut rows: Vec<AblationRow> = masks
        .into_iter()
        .zip(reports)
        .map(|((kind, mask), report)| AblationRow {
            rank: 0,
            kind,
            label: mask.label(),
            mask,
            report,
        })
        .collect();
    rows.sort_by(|a, b| b.report.accuracy.total_cmp(&a.report.accuracy));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(AblationResult {
        config: base.clone(),
        method: base.describe_method(),
        seeds,
        class_counts: sample.class_counts(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classic_ml::{FeatureSubsample, ForestParams};
    use crate::synth::{self, SynthSpec};

    fn data() -> (Vec<AnnotatedSentencePair>, ResourceSet) {
        (normalize_corpus(&synth::corpus(&SynthSpec::scaled(15, 2))), synth::resources())
    }

    fn forest(n: usize) -> ClassifierSpec {
        ClassifierSpec::Forest(ForestParams {
            n_trees: n,
            ..Default::default()
        })
    }

    #[test]
    fn forest_beats_dummy_and_is_reproducible() {
        let (c, r) = data();
        let dummy = run_experiment(&ExperimentConfig::new("d", Task::Binary3to1, ClassifierSpec::Dummy { seed: 0 }), &c, &r).unwrap();
        let cfg = ExperimentConfig::new("f", Task::Binary3to1, forest(30));
        let a = run_experiment(&cfg, &c, &r).unwrap();
        assert!(a.report.accuracy > dummy.report.accuracy + 0.1, "{} vs {}", a.report.accuracy, dummy.report.accuracy);
        assert!((a.report.micro_f1 - a.report.accuracy).abs() < 1e-9);
        let b = run_experiment(&cfg, &c, &r).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.predictions, b.predictions);
        assert_eq!(a.folds.len(), 5);
        assert_eq!(a.predictions.len(), a.class_counts.iter().sum::<usize>());
    }

    #[test]
    fn tuned_run_records_inner_search() {
        let (c, r) = data();
        let cfg = ExperimentConfig {
            classifier: None,
            grid: Some(Grid::Points {
                points: vec![forest(5), forest(15)],
            }),
            ..ExperimentConfig::new("g", Task::FiveClass, forest(1))
        };
        let res = run_experiment(&cfg, &c, &r).unwrap();
        assert!(res.folds.iter().all(|f| f.grid.len() == 2));
        assert_eq!(res.report.classes.len(), 5);
    }

    #[test]
    fn config_needs_exactly_one_learner() {
        let mut cfg = ExperimentConfig::new("x", Task::FiveClass, forest(1));
        cfg.neural = Some(NeuralConfig::default());
        assert!(matches!(cfg.validate(), Err(ExperimentError::Config { .. })));
        cfg.classifier = None;
        cfg.validate().unwrap();
        cfg.ablation = true;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn neural_run_and_saved_models() {
        let (c, r) = data();
        let cfg = ExperimentConfig {
            classifier: None,
            neural: Some(NeuralConfig {
                architecture: crate::neural::Architecture::MeanConcat,
                epochs: 2,
                lr: 0.01,
                ..Default::default()
            }),
            models: ModelOutput::PerFold,
            ..ExperimentConfig::new("n", Task::Binary3to1, forest(1))
        };
        let res = run_experiment(&cfg, &c, &r).unwrap();
        assert!(res.folds.iter().all(|f| f.loss_curve.len() == 2));
        assert_eq!(res.models.len(), 5);
        let mut buf = Vec::new();
        res.models[0].1.write_json(&mut buf).unwrap();
        let back = PipelineModel::read_json(buf.as_slice()).unwrap();
        assert_eq!(back, res.models[0].1);
        assert_eq!(back.predict_corpus(&c, &r).unwrap().len(), pair_refs(&c).len());
    }

    #[test]
    fn final_model_predicts_and_checks_header() {
        let (c, r) = data();
        let cfg = ExperimentConfig {
            models: ModelOutput::Final,
            mask: FeatureMask::families([3, 10]),
            ..ExperimentConfig::new("m", Task::SixClassFull, forest(10))
        };
        let res = run_experiment(&cfg, &c, &r).unwrap();
        let (name, model) = &res.models[0];
        assert_eq!(name, "final");
        let preds = model.predict_corpus(&c, &r).unwrap();
        assert!(preds.iter().all(|p| p.1 < 6 && (p.2.iter().sum::<f64>() - 1.0).abs() < 1e-9));
        let mut wrong = model.clone();
        wrong.mask = FeatureMask::families([3]);
        assert!(matches!(
            wrong.predict_corpus(&c, &r),
            Err(ExperimentError::Classic(ClassicError::HeaderMismatch { .. }))
        ));
    }

    #[test]
    fn ablation_masks_are_distinct() {
        let masks = ablation_masks();
        // the surface group is family 3 alone
        assert_eq!(masks.len(), 1 + 5 + 5 + 11 - 1);
        assert_eq!(masks[0], (AblationKind::Full, FeatureMask::all()));
    }

    #[test]
    fn ablation_ranks_by_accuracy() {
        let (c, r) = data();
        let base = ExperimentConfig::new("a", Task::Binary3to1, forest(5));
        let res = ablation_study(&base, &c, &r).unwrap();
        assert_eq!(res.rows.len(), ablation_masks().len());
        assert!(res.rows.windows(2).all(|w| w[0].report.accuracy >= w[1].report.accuracy));
        let full = res.rows.iter().find(|r| r.kind == AblationKind::Full).unwrap();
        let direct = run_experiment(&base, &c, &r).unwrap();
        assert_eq!(full.report, direct.report);
    }

    #[test]
    fn all_zero_columns_change_nothing() {
        let (c, r) = data();
        let refs = pair_refs(&c);
        let sample = subsample(&raw_labels(&c, &refs), Task::Binary3to1, 1).unwrap();
        let feats = sample_features(&c, &refs, &sample, &r, FeatureConfig::default(), FeatureMask::families([3, 9])).unwrap();
        let mut padded = feats.data.clone();
        padded.header.extend(["zero.a".to_string(), "zero.b".to_string()]);
        padded.x.iter_mut().for_each(|row| row.extend([0.0, 0.0]));
        let spec = ClassifierSpec::Forest(ForestParams {
            n_trees: 10,
            feature_subsample: FeatureSubsample::All,
            ..Default::default()
        });
        let (folds, fold_of) = make_folds(&sample.labels, 5, 1).unwrap();
        let cfg = ExperimentConfig::new("z", Task::Binary3to1, spec.clone());
        let seeds = Seeds::new(0, 5);
        let m = Method::Fixed(spec);
        let a = cv_features(&feats.data, &m, &cfg, &seeds, &folds, &fold_of, false).unwrap();
        let b = cv_features(&padded, &m, &cfg, &seeds, &folds, &fold_of, false).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.pred, y.pred);
        }
    }

    #[test]
    fn config_from_toml() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            name = "five_class_forest"
            task = "five_class"
            seed = 4
            drop_groups = ["external_resource"]
            [classifier]
            kind = "forest"
            n_trees = 300
            max_depth = 20
            "#,
        )
        .unwrap();
        assert_eq!(cfg.effective_mask().family_list(), vec![1, 2, 3, 4, 5, 9, 10, 11]);
        assert_eq!(cfg.folds, 5);
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
    }
}
