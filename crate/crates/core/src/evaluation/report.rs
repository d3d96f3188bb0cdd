use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::experiment::{AblationResult, ExperimentResult, Seeds};
use super::metrics::MetricsReport;
use super::task::Task;

/// Run-level facts embedded in every report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportMeta {
    /// SHA-256 of the run configuration file.
    pub config_hash: String,
    /// SHA-256 of each resource file and of the bundle, by name.
    pub checksums: BTreeMap<String, String>,
    /// Known deviations to flag next to the numbers.
    pub notes: Vec<String>,
}

/// A rendered report: tab-separated sections and the same tables aligned
/// for reading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub tsv: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("nothing to report")]
pub struct EmptyReport;

struct Table {
    name: &'static str,
    title: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, title: &'static str, header: &[&str]) -> Self {
        Table {
            name,
            title,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn tsv(&self, out: &mut String) {
        writeln!(out, "#table\t{}", self.name).unwrap();
        writeln!(out, "{}", self.header.join("\t")).unwrap();
        for r in &self.rows {
            writeln!(out, "{}", r.join("\t")).unwrap();
        }
        out.push('\n');
    }

    fn text(&self, out: &mut String) {
        let n = self.header.len();
        let mut width = vec![0; n];
        for r in std::iter::once(&self.header).chain(&self.rows) {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        writeln!(out, "{}", self.title).unwrap();
        let line = |r: &[String]| {
            let cells: Vec<String> = r.iter().zip(&width).map(|(c, &w)| format!("{c:<w$}")).collect();
            cells.join("  ").trim_end().to_string()
        };
        writeln!(out, "{}", line(&self.header)).unwrap();
        let rule: Vec<String> = width.iter().map(|&w| "-".repeat(w)).collect();
        writeln!(out, "{}", rule.join("  ")).unwrap();
        for r in &self.rows {
            writeln!(out, "{}", line(r)).unwrap();
        }
        out.push('\n');
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn f1(x: f64) -> String {
    format!("{x:.4}")
}

fn class_f1(r: &MetricsReport) -> String {
    let parts: Vec<String> = r
        .classes
        .iter()
        .zip(&r.per_class_f1)
        .map(|(c, v)| format!("{c}={}", f1(*v)))
        .collect();
    parts.join(" ")
}

fn is_grouping(t: Task) -> bool {
    matches!(t, Task::LvsNl549 | Task::LeVsNonLe549 | Task::LetVsNonLet549)
}

fn seed_line(name: &str, s: &Seeds) -> String {
    let folds: Vec<String> = s.per_fold.iter().map(u64::to_string).collect();
    format!(
        "# seeds\t{name}\texperiment={}\tsubsample={}\tfolds={}\tper_fold={}",
        s.experiment,
        s.subsample,
        s.folds,
        folds.join(",")
    )
}

/// Renders results and ablations as the configuration, per-class F1,
/// grouping, ablation and fold tables. Sections without rows are left out.
/// Output depends only on the inputs, so equal runs give equal bytes.
pub fn render_report(results: &[ExperimentResult], ablations: &[AblationResult], meta: &ReportMeta) -> Result<Report, EmptyReport> {
    if results.is_empty() && ablations.is_empty() {
        return Err(EmptyReport);
    }
    let mut configs = Table::new(
        "configurations",
        "Classification results under different configurations",
        &["experiment", "task", "classifier", "features", "instances", "accuracy_pct", "class_f1", "micro_f1", "macro_f1"],
    );
    let mut five = Table::new(
        "per_class_f1",
        "Average F1-score for each non-literal class",
        &["experiment"],
    );
    five.header.extend(Task::FiveClass.classes());
    let mut grouping = Table::new(
        "grouping",
        "Classification results after grouping classes",
        &["experiment", "task", "accuracy_pct", "f1_first", "f1_second", "macro_f1"],
    );
    let mut folds = Table::new(
        "folds",
        "Per-fold results",
        &["experiment", "fold", "seed", "train", "test", "accuracy_pct", "macro_f1", "selected"],
    );
    for r in results {
        let rep = &r.report;
        let name = r.config.name.clone();
        let n: usize = r.class_counts.iter().sum();
        if is_grouping(r.config.task) {
            grouping.rows.push(vec![
                name.clone(),
                r.config.task.to_string(),
                pct(rep.accuracy),
                format!("{}={}", rep.classes[0], f1(rep.per_class_f1[0])),
                format!("{}={}", rep.classes[1], f1(rep.per_class_f1[1])),
                f1(rep.macro_f1),
            ]);
        } else {
            configs.rows.push(vec![
                name.clone(),
                r.config.task.to_string(),
                r.method.clone(),
                r.mask.clone(),
                n.to_string(),
                pct(rep.accuracy),
                class_f1(rep),
                f1(rep.micro_f1),
                f1(rep.macro_f1),
            ]);
        }
        if r.config.task == Task::FiveClass {
            let mut row = vec![name.clone()];
            row.extend(rep.per_class_f1.iter().map(|v| f1(*v)));
            five.rows.push(row);
        }
        for (fr, fm) in r.folds.iter().zip(&rep.folds) {
            folds.rows.push(vec![
                name.clone(),
                fr.fold.to_string(),
                fr.seed.to_string(),
                fr.train_size.to_string(),
                fr.test_size.to_string(),
                pct(fm.accuracy),
                f1(fm.macro_f1),
                fr.selected.clone(),
            ]);
        }
    }
    let mut ablation = Table::new(
        "ablation",
        "Classification results after feature ablation study",
        &["experiment", "rank", "kind", "features", "accuracy_pct", "micro_f1", "macro_f1", "class_f1"],
    );
    for a in ablations {
        for row in &a.rows {
            ablation.rows.push(vec![
                a.config.name.clone(),
                row.rank.to_string(),
                row.kind.as_str().to_string(),
                row.label.clone(),
                pct(row.report.accuracy),
                f1(row.report.micro_f1),
                f1(row.report.macro_f1),
                class_f1(&row.report),
            ]);
        }
    }

    let mut head = String::new();
    writeln!(head, "# transproc report").unwrap();
    if !meta.config_hash.is_empty() {
        writeln!(head, "# config_sha256\t{}", meta.config_hash).unwrap();
    }
    for (k, v) in &meta.checksums {
        writeln!(head, "# sha256\t{k}\t{v}").unwrap();
    }
    let tuned = results.iter().map(|r| &r.config).chain(ablations.iter().map(|a| &a.config)).any(|c| c.grid.is_some());
    let mut notes = meta.notes.clone();
    if tuned {
        notes.push("hyperparameters tuned by nested inner cross-validation inside each training fold".into());
    }
    for n in &notes {
        writeln!(head, "# note\t{n}").unwrap();
    }
    for r in results {
        writeln!(head, "{}", seed_line(&r.config.name, &r.seeds)).unwrap();
    }
    for a in ablations {
        writeln!(head, "{}", seed_line(&a.config.name, &a.seeds)).unwrap();
    }
    for c in results.iter().map(|r| &r.config).chain(ablations.iter().map(|a| &a.config)) {
        writeln!(head, "# config\t{}\t{}", c.name, serde_json::to_string(c).expect("config serializes")).unwrap();
    }
    for r in results {
        for (fold, class) in &r.report.absent {
            writeln!(head, "# absent\t{}\tfold {fold}\t{class}", r.config.name).unwrap();
        }
    }
    head.push('\n');

    let tables = [configs, five, grouping, ablation, folds];
    let mut tsv = head.clone();
    let mut text = head;
    for t in tables.iter().filter(|t| !t.rows.is_empty()) {
        t.tsv(&mut tsv);
        t.text(&mut text);
    }
    Ok(Report { tsv, text })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classic_ml::{ClassifierSpec, ForestParams};
    use crate::evaluation::{normalize_corpus, run_experiment, ExperimentConfig};
    use crate::synth::{self, SynthSpec};

    fn results(task: Task) -> Vec<ExperimentResult> {
        let c = normalize_corpus(&synth::corpus(&SynthSpec::scaled(15, 5)));
        let r = synth::resources();
        let spec = ClassifierSpec::Forest(ForestParams {
            n_trees: 5,
            ..Default::default()
        });
        vec![run_experiment(&ExperimentConfig::new("run", task, spec), &c, &r).unwrap()]
    }

    #[test]
    fn five_class_has_per_class_row_and_no_empty_sections() {
        let rep = render_report(&results(Task::FiveClass), &[], &ReportMeta::default()).unwrap();
        assert!(rep.tsv.contains("#table\tper_class_f1\nexperiment\tEquivalence\tGeneralization"));
        assert!(rep.text.contains("Average F1-score for each non-literal class"));
        assert!(!rep.tsv.contains("#table\tgrouping"));
        assert!(!rep.tsv.contains("#table\tablation"));
        assert!(rep.tsv.contains("# seeds\trun\texperiment=0"));
    }

    #[test]
    fn six_class_report_skips_five_class_table() {
        let meta = ReportMeta {
            config_hash: "abc".into(),
            checksums: [("bundle".to_string(), "00ff".to_string())].into(),
            notes: vec!["features recomputed".into()],
        };
        let rep = render_report(&results(Task::SixClassFull), &[], &meta).unwrap();
        assert!(!rep.tsv.contains("per_class_f1"));
        assert!(rep.tsv.contains("# config_sha256\tabc"));
        assert!(rep.tsv.contains("# sha256\tbundle\t00ff"));
        assert!(rep.tsv.contains("# note\tfeatures recomputed"));
    }

    #[test]
    fn byte_identical_for_same_seeds() {
        let a = render_report(&results(Task::Binary3to1), &[], &ReportMeta::default()).unwrap();
        let b = render_report(&results(Task::Binary3to1), &[], &ReportMeta::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_input() {
        assert_eq!(render_report(&[], &[], &ReportMeta::default()), Err(EmptyReport));
    }
}
