use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("gold has {gold} labels, predictions have {pred}")]
    Length { gold: usize, pred: usize },
    #[error("label {label} at position {position} is outside the class set of size {classes}")]
    Label { position: usize, label: usize, classes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Metrics for one set of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub micro_f1: f64,
    /// Unweighted mean F1 over the classes present in gold.
    pub macro_f1: f64,
    pub per_class: Vec<ClassScore>,
    /// `confusion[gold][pred]`.
    pub confusion: Vec<Vec<usize>>,
}

impl FoldMetrics {
    pub fn present(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.per_class.len()).filter(|&c| self.per_class[c].support > 0)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn compute_metrics(gold: &[usize], pred: &[usize], n_classes: usize) -> Result<FoldMetrics, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::Length {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (position, (&g, &p)) in gold.iter().zip(pred).enumerate() {
        for label in [g, p] {
            if label >= n_classes {
                return Err(MetricsError::Label {
                    position,
                    label,
                    classes: n_classes,
                });
            }
        }
        confusion[g][p] += 1;
    }
    let mut tp_all = 0;
    let (mut fp_all, mut fn_all) = (0, 0);
    let per_class: Vec<ClassScore> = (0..n_classes)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|r| r[c]).sum();
            tp_all += tp;
            fp_all += predicted - tp;
            fn_all += support - tp;
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            ClassScore {
                precision,
                recall,
                f1: f1(precision, recall),
                support,
            }
        })
        .collect();
    let micro_f1 = f1(ratio(tp_all, tp_all + fp_all), ratio(tp_all, tp_all + fn_all));
    let present: Vec<f64> = per_class.iter().filter(|s| s.support > 0).map(|s| s.f1).collect();
    let macro_f1 = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(FoldMetrics {
        accuracy: ratio(tp_all, gold.len()),
        micro_f1,
        macro_f1,
        per_class,
        confusion,
    })
}

/// Fold metrics averaged arithmetically, with the confusion matrix pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<String>,
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Mean F1 per class over the folds where the class occurs in gold.
    pub per_class_f1: Vec<f64>,
    pub folds: Vec<FoldMetrics>,
    pub confusion: Vec<Vec<usize>>,
    /// `(fold, class)` pairs left out of a fold's macro-F1.
    pub absent: Vec<(usize, String)>,
}

impl MetricsReport {
    pub fn aggregate(classes: Vec<String>, folds: Vec<FoldMetrics>) -> Self {
        assert!(!folds.is_empty(), "no folds to aggregate");
        let k = classes.len();
        let n = folds.len() as f64;
        let mean = |f: fn(&FoldMetrics) -> f64| folds.iter().map(f).sum::<f64>() / n;
        let mut confusion = vec![vec![0; k]; k];
        let mut absent = Vec::new();
        let mut sum = vec![0.0; k];
        let mut seen = vec![0usize; k];
        for (i, f) in folds.iter().enumerate() {
            for g in 0..k {
                for p in 0..k {
                    confusion[g][p] += f.confusion[g][p];
                }
                if f.per_class[g].support > 0 {
                    sum[g] += f.per_class[g].f1;
                    seen[g] += 1;
                } else {
                    absent.push((i, classes[g].clone()));
                }
            }
        }
        MetricsReport {
            accuracy: mean(|f| f.accuracy),
            micro_f1: mean(|f| f.micro_f1),
            macro_f1: mean(|f| f.macro_f1),
            per_class_f1: sum.iter().zip(&seen).map(|(s, &c)| ratio(1, c) * s).collect(),
            folds,
            confusion,
            absent,
            classes,
        }
    }
}
