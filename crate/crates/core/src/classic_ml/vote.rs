use serde::{Deserialize, Serialize};

use super::{ClassicError, Prediction, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMode {
    /// Majority of member labels.
    Hard,
    /// Argmax of the averaged member probabilities.
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteModel {
    pub mode: VoteMode,
    pub members: Vec<TrainedModel>,
}

impl VoteModel {
    pub fn new(mode: VoteMode, members: Vec<TrainedModel>) -> Result<Self, ClassicError> {
        if members.len() < 2 {
            return Err(ClassicError::TooFewMembers(members.len()));
        }
        for m in &members[1..] {
            if m.classes != members[0].classes {
                return Err(ClassicError::ClassMismatch(members[0].classes.clone(), m.classes.clone()));
            }
        }
        Ok(VoteModel { mode, members })
    }

    /// Hard votes report the share of members per class as probabilities.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Vec<Prediction> {
        let per_member: Vec<Vec<Prediction>> = self.members.iter().map(|m| m.predict_rows(rows)).collect();
        let k = self.members[0].classes.len();
        let n = self.members.len() as f64;
        (0..rows.len())
            .map(|i| {
                let mut acc = vec![0.0; k];
                for preds in &per_member {
                    match self.mode {
                        VoteMode::Hard => acc[preds[i].label] += 1.0,
                        VoteMode::Soft => acc.iter_mut().zip(&preds[i].probs).for_each(|(a, p)| *a += p),
                    }
                }
                acc.iter_mut().for_each(|a| *a /= n);
                Prediction::from_probs(acc)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ModelBody, MODEL_FORMAT_VERSION};
    use super::*;
    use crate::classic_ml::DummyModel;

    /// A model that always returns `probs` (prior of a dummy whose draws are
    /// not used in soft mode).
    fn fixed(probs: Vec<f64>, classes: &[&str]) -> TrainedModel {
        TrainedModel {
            format_version: MODEL_FORMAT_VERSION,
            header: vec![],
            classes: classes.iter().map(|s| s.to_string()).collect(),
            body: ModelBody::Dummy(DummyModel { prior: probs, seed: 0 }),
        }
    }

    /// A model whose single draw is certain.
    fn sure(label: usize) -> TrainedModel {
        let mut p = vec![0.0; 2];
        p[label] = 1.0;
        fixed(p, &["A", "B"])
    }

    #[test]
    fn hard_majority() {
        let v = VoteModel::new(VoteMode::Hard, vec![sure(0), sure(0), sure(1)]).unwrap();
        assert_eq!(v.predict_rows(&[vec![]])[0].label, 0);
    }

    #[test]
    fn hard_tie_goes_low() {
        let v = VoteModel::new(VoteMode::Hard, vec![sure(1), sure(0)]).unwrap();
        let p = &v.predict_rows(&[vec![]])[0];
        assert_eq!(p.label, 0);
        assert_eq!(p.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn soft_average() {
        let v = VoteModel::new(
            VoteMode::Soft,
            vec![fixed(vec![0.6, 0.4], &["A", "B"]), fixed(vec![0.2, 0.8], &["A", "B"])],
        )
        .unwrap();
        let p = &v.predict_rows(&[vec![]])[0];
        assert_eq!(p.label, 1);
        assert!((p.probs[0] - 0.4).abs() < 1e-15 && (p.probs[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn class_sets_must_match() {
        let err = VoteModel::new(VoteMode::Soft, vec![sure(0), fixed(vec![1.0, 0.0], &["A", "C"])]).unwrap_err();
        assert!(matches!(err, ClassicError::ClassMismatch(..)));
        assert!(matches!(
            VoteModel::new(VoteMode::Soft, vec![sure(0)]).unwrap_err(),
            ClassicError::TooFewMembers(1)
        ));
    }
}
