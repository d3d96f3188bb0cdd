use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use transproc::classic_ml::ClassicError;
use transproc::config::{RunConfig, Verbosity};
use transproc::corpus::{class_census, load_bundle, pair_refs, AnnotatedSentencePair};
use transproc::evaluation::{
    ablation_study, featurize as featurize_corpus, normalize_corpus, render_report, run_experiment, subsample,
    AblationResult, ExperimentConfig, ExperimentError, ExperimentResult, PipelineModel, ReportMeta, Seeds,
};
use transproc::features::{write_matrix, FeatureConfig, FeatureMask};
use transproc::neural::EmbeddingMode;
use transproc::resources::{file_checksum, ResourceSet};

use crate::{Common, Failure};

type Outcome = Result<(), Failure>;

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Validation(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn setup(common: &Common) -> Result<Self, Failure> {
        let mut cfg = RunConfig::load(&common.config).map_err(invalid)?;
        if let Some(seed) = common.seed {
            cfg.override_seed(seed);
        }
        let quiet = common.quiet || cfg.verbosity == Verbosity::Quiet;
        let level = match (quiet, cfg.verbosity) {
            (true, _) => log::LevelFilter::Error,
            (_, Verbosity::Verbose) => log::LevelFilter::Debug,
            _ => log::LevelFilter::Info,
        };
        let _ = env_logger::Builder::new()
            .filter_level(level)
            .parse_env("TRANSPROC_LOG")
            .format_timestamp(None)
            .try_init();
        let out = common.out.clone().unwrap_or_else(|| cfg.output.clone());
        Ok(Ctx { cfg, out, quiet })
    }

    fn say(&self, text: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", text.as_ref());
        }
    }

    /// Fails on any structural finding, before anything large is read.
    fn check(&self) -> Outcome {
        let findings = self.cfg.findings();
        if findings.is_empty() {
            return Ok(());
        }
        Err(invalid(anyhow!("{}", findings.join("; "))))
    }

    fn resources(&self) -> Result<ResourceSet, Failure> {
        log::info!("loading resources");
        ResourceSet::load(&self.cfg.resources).map_err(invalid)
    }

    fn corpus(&self, path: &Path) -> Result<Vec<AnnotatedSentencePair>, Failure> {
        log::info!("loading bundle {}", path.display());
        let raw = load_bundle(path).map_err(invalid)?;
        Ok(if self.cfg.normalize { normalize_corpus(&raw) } else { raw })
    }

    fn meta(&self, resources: &ResourceSet, bundle: &Path) -> Result<ReportMeta, Failure> {
        let mut checksums = resources.checksums.clone();
        checksums.insert("bundle".into(), file_checksum(bundle).map_err(invalid)?);
        let mut notes = Vec::new();
        if !self.cfg.released_features {
            notes.push("annotation produced by re-running the preprocessing tools, not the released feature set".into());
        }
        if !self.cfg.normalize {
            notes.push("clitic, digit and case normalization disabled".into());
        }
        let word_mode = self
            .cfg
            .experiments
            .iter()
            .any(|e| e.neural.as_ref().is_some_and(|n| n.embedding == EmbeddingMode::Word));
        if word_mode && resources.word_vectors.is_none() {
            notes.push("no word_vectors resource; word-level neural models use the feature embedding table".into());
        }
        Ok(ReportMeta {
            config_hash: self.cfg.hash.clone(),
            checksums,
            notes,
        })
    }

    fn selected(&self, names: &[String], ablate: bool) -> Result<Vec<ExperimentConfig>, Failure> {
        let available = || self.cfg.experiment_names().join(", ");
        if names.is_empty() {
            let all: Vec<_> = self
                .cfg
                .experiments
                .iter()
                .filter(|e| !ablate || e.ablation)
                .cloned()
                .collect();
            if all.is_empty() {
                let what = if ablate { "ablation experiments" } else { "experiments" };
                return Err(invalid(anyhow!("config declares no {what}; available: {}", available())));
            }
            return Ok(all);
        }
        names
            .iter()
            .map(|n| {
                self.cfg
                    .experiment(n)
                    .cloned()
                    .ok_or_else(|| invalid(anyhow!("unknown experiment `{n}`; available: {}", available())))
            })
            .collect()
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(runtime)?;
    }
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display())).map_err(runtime)?;
    Ok(BufWriter::new(f))
}

fn write_file(path: &Path, body: &[u8]) -> Outcome {
    let mut w = create(path)?;
    w.write_all(body)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime)
}

fn meta_lines(kind: &str, meta: &ReportMeta) -> String {
    let mut s = format!("# transproc {kind}\n# config_sha256\t{}\n", meta.config_hash);
    for (k, v) in &meta.checksums {
        writeln!(s, "# sha256\t{k}\t{v}").unwrap();
    }
    s
}

fn seed_line(name: &str, s: &Seeds) -> String {
    let folds: Vec<String> = s.per_fold.iter().map(u64::to_string).collect();
    format!(
        "# seeds\t{name}\texperiment={}\tsubsample={}\tfolds={}\tper_fold={}\n",
        s.experiment,
        s.subsample,
        s.folds,
        folds.join(",")
    )
}

/// File-system safe form of an experiment name.
fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

pub fn validate(common: &Common) -> Outcome {
    let ctx = Ctx::setup(common)?;
    let findings = ctx.cfg.findings();
    for f in &findings {
        eprintln!("invalid: {f}");
    }
    if !findings.is_empty() {
        return Err(invalid(anyhow!("{} finding(s) in {}", findings.len(), common.config.display())));
    }
    let resources = ctx.resources()?;
    let corpus = load_bundle(&ctx.cfg.bundle).map_err(invalid)?;
    let pairs: Vec<_> = corpus.iter().flat_map(|s| &s.phrase_pairs).collect();
    let census = class_census(pairs.iter().copied());
    ctx.say(format!(
        "config {} ok: {} experiment(s), {} embeddings, {} concept assertions",
        common.config.display(),
        ctx.cfg.experiments.len(),
        resources.embeddings.len(),
        resources.concepts.len()
    ));
    ctx.say(format!("bundle {}: {} sentence pairs, {} phrase pairs", ctx.cfg.bundle.display(), corpus.len(), pairs.len()));
    ctx.say(census.to_string());
    let labels: Vec<_> = pairs.iter().map(|p| p.label).collect();
    let mut bad = 0;
    for e in &ctx.cfg.experiments {
        if let Err(err) = subsample(&labels, e.task, 0) {
            eprintln!("invalid: experiment `{}`: {err}", e.name);
            bad += 1;
        }
    }
    if bad > 0 {
        return Err(invalid(anyhow!("{bad} experiment(s) cannot be drawn from this corpus")));
    }
    Ok(())
}

pub fn featurize(common: &Common, experiment: Option<&str>) -> Outcome {
    let ctx = Ctx::setup(common)?;
    ctx.check()?;
    let (features, mask, file) = match experiment {
        Some(name) => {
            let e = ctx.selected(&[name.to_string()], false)?.remove(0);
            (e.features, e.effective_mask(), format!("features_{}.tsv", slug(name)))
        }
        None => (FeatureConfig::default(), FeatureMask::all(), "features.tsv".to_string()),
    };
    let resources = ctx.resources()?;
    let corpus = ctx.corpus(&ctx.cfg.bundle)?;
    let meta = ctx.meta(&resources, &ctx.cfg.bundle)?;
    let m = featurize_corpus(&corpus, &resources, features, mask.clone());
    let mut body = meta_lines("features", &meta).into_bytes();
    writeln!(body, "# mask\t{}", mask.label()).unwrap();
    write_matrix(&mut body, &m).map_err(runtime)?;
    let path = ctx.out.join(file);
    write_file(&path, &body)?;
    ctx.say(format!("{}: {} rows, {} features", path.display(), m.rows.len(), m.specs.len()));
    Ok(())
}

/// A finished experiment or ablation as stored in `<out>/<name>/result.json`.
#[derive(Serialize, Deserialize)]
struct Saved {
    config_sha256: String,
    checksums: BTreeMap<String, String>,
    notes: Vec<String>,
    #[serde(flatten)]
    body: SavedBody,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", content = "result", rename_all = "snake_case")]
enum SavedBody {
    Experiment(ExperimentResult),
    Ablation(AblationResult),
}

impl SavedBody {
    fn name(&self) -> &str {
        match self {
            SavedBody::Experiment(r) => &r.config.name,
            SavedBody::Ablation(a) => &a.config.name,
        }
    }
}

fn write_experiment(dir: &Path, r: &ExperimentResult, meta: &ReportMeta) -> Outcome {
    let head = meta_lines("predictions", meta) + &seed_line(&r.config.name, &r.seeds);
    let classes = &r.report.classes;
    let mut s = head.clone();
    s.push_str("id\tfold\tgold\tpredicted\n");
    for p in &r.predictions {
        writeln!(s, "{}\t{}\t{}\t{}", p.id, p.fold, classes[p.gold], classes[p.predicted]).unwrap();
    }
    write_file(&dir.join("predictions.tsv"), s.as_bytes())?;
    if r.folds.iter().any(|f| !f.loss_curve.is_empty()) {
        let mut s = meta_lines("loss curves", meta) + &seed_line(&r.config.name, &r.seeds);
        s.push_str("fold\tepoch\tloss\n");
        for f in &r.folds {
            for (i, l) in f.loss_curve.iter().enumerate() {
                writeln!(s, "{}\t{}\t{l}", f.fold, i + 1).unwrap();
            }
        }
        write_file(&dir.join("loss_curves.tsv"), s.as_bytes())?;
    }
    for (name, model) in &r.models {
        let path = dir.join("models").join(format!("{name}.json"));
        fs::create_dir_all(path.parent().unwrap()).map_err(runtime)?;
        model.save(&path).map_err(runtime)?;
    }
    Ok(())
}

pub fn run(common: &Common, names: &[String], ablate: bool) -> Outcome {
    let ctx = Ctx::setup(common)?;
    ctx.check()?;
    let experiments = ctx.selected(names, ablate)?;
    let resources = ctx.resources()?;
    let corpus = ctx.corpus(&ctx.cfg.bundle)?;
    let meta = ctx.meta(&resources, &ctx.cfg.bundle)?;
    for e in &experiments {
        let dir = ctx.out.join(slug(&e.name));
        let body = if ablate || e.ablation {
            log::info!("{}: ablation study", e.name);
            let a = ablation_study(e, &corpus, &resources).map_err(runtime)?;
            ctx.say(format!("{}: {} feature sets, best {} at {:.2}%", e.name, a.rows.len(), a.rows[0].label, 100.0 * a.rows[0].report.accuracy));
            SavedBody::Ablation(a)
        } else {
            let r = run_experiment(e, &corpus, &resources).map_err(runtime)?;
            ctx.say(format!(
                "{}: accuracy {:.2}%, macro-F1 {:.4} ({})",
                e.name,
                100.0 * r.report.accuracy,
                r.report.macro_f1,
                r.method
            ));
            write_experiment(&dir, &r, &meta)?;
            SavedBody::Experiment(r)
        };
        let saved = Saved {
            config_sha256: meta.config_hash.clone(),
            checksums: meta.checksums.clone(),
            notes: meta.notes.clone(),
            body,
        };
        let json = serde_json::to_vec_pretty(&saved).map_err(runtime)?;
        write_file(&dir.join("result.json"), &json)?;
    }
    write_report(&ctx)
}

/// Renders every saved result of the current config into `report.tsv` and
/// `report.txt`, in config order.
fn write_report(ctx: &Ctx) -> Outcome {
    let mut saved = Vec::new();
    let entries = match fs::read_dir(&ctx.out) {
        Ok(e) => e,
        Err(e) => return Err(invalid(anyhow!("no results in {}: {e}", ctx.out.display()))),
    };
    for entry in entries {
        let path = entry.map_err(runtime)?.path().join("result.json");
        if !path.is_file() {
            continue;
        }
        let text = fs::read(&path).with_context(|| format!("reading {}", path.display())).map_err(runtime)?;
        let s: Saved = serde_json::from_slice(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(invalid)?;
        if s.config_sha256 != ctx.cfg.hash {
            log::warn!("skipping {}: written under another config", path.display());
            continue;
        }
        saved.push(s);
    }
    let rank = |name: &str| ctx.cfg.experiments.iter().position(|e| e.name == name).unwrap_or(usize::MAX);
    saved.sort_by(|a, b| (rank(a.body.name()), a.body.name()).cmp(&(rank(b.body.name()), b.body.name())));
    let mut meta = ReportMeta {
        config_hash: ctx.cfg.hash.clone(),
        ..Default::default()
    };
    let (mut results, mut ablations) = (Vec::new(), Vec::new());
    for s in saved {
        meta.checksums.extend(s.checksums);
        for n in s.notes {
            if !meta.notes.contains(&n) {
                meta.notes.push(n);
            }
        }
        match s.body {
            SavedBody::Experiment(r) => results.push(r),
            SavedBody::Ablation(a) => ablations.push(a),
        }
    }
    let report = render_report(&results, &ablations, &meta)
        .map_err(|e| invalid(anyhow!("{e}: no results for this config in {}", ctx.out.display())))?;
    write_file(&ctx.out.join("report.tsv"), report.tsv.as_bytes())?;
    write_file(&ctx.out.join("report.txt"), report.text.as_bytes())?;
    ctx.say(format!("report written to {}", ctx.out.join("report.tsv").display()));
    Ok(())
}

pub fn report(common: &Common) -> Outcome {
    let ctx = Ctx::setup(common)?;
    write_report(&ctx)
}

pub fn predict(common: &Common, model_path: &Path, bundle: Option<&Path>) -> Outcome {
    let ctx = Ctx::setup(common)?;
    ctx.check()?;
    let resources = ctx.resources()?;
    let model = PipelineModel::load(model_path).map_err(invalid)?;
    let bundle = bundle.map_or_else(|| ctx.cfg.bundle.clone(), Path::to_path_buf);
    let corpus = ctx.corpus(&bundle)?;
    let path = ctx.out.join("predictions.tsv");
    if pair_refs(&corpus).is_empty() {
        write_file(&path, b"")?;
        ctx.say(format!("{}: bundle has no phrase pairs", path.display()));
        return Ok(());
    }
    let preds = model.predict_corpus(&corpus, &resources).map_err(|e| match e {
        ExperimentError::Classic(ClassicError::HeaderMismatch { .. }) => {
            invalid(anyhow!(e).context(format!("model {} does not fit this feature set", model_path.display())))
        }
        other => runtime(other),
    })?;
    let meta = ctx.meta(&resources, &bundle)?;
    let mut s = meta_lines("predictions", &meta);
    let model_hash = file_checksum(model_path).map_err(runtime)?;
    writeln!(s, "# model\t{}\t{}\t{model_hash}", model.experiment, model.task).unwrap();
    let classes = model.classes();
    s.push_str("id\tsrc_span\ttgt_span\tpredicted");
    for c in classes {
        write!(s, "\tp_{c}").unwrap();
    }
    s.push('\n');
    for (r, label, probs) in &preds {
        let sent = &corpus[r.sentence];
        let pp = &sent.phrase_pairs[r.pair];
        write!(
            s,
            "{}#{}\t{}-{}\t{}-{}\t{}",
            sent.id, r.pair, pp.src_span.start, pp.src_span.end, pp.tgt_span.start, pp.tgt_span.end, classes[*label]
        )
        .unwrap();
        for p in probs {
            write!(s, "\t{p}").unwrap();
        }
        s.push('\n');
    }
    write_file(&path, s.as_bytes())?;
    ctx.say(format!("{}: {} phrase pairs", path.display(), preds.len()));
    Ok(())
}
