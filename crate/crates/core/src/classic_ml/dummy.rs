use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Prediction};
use crate::rng;

/// Draws labels at random from the training class distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DummyModel {
    pub prior: Vec<f64>,
    pub seed: u64,
}

impl DummyModel {
    pub fn fit(data: &Dataset, seed: u64) -> Self {
        let n = data.len() as f64;
        DummyModel {
            prior: data.class_counts().into_iter().map(|c| c as f64 / n).collect(),
            seed,
        }
    }

    /// `n` independent draws from one seeded stream. The reported
    /// probabilities are the prior itself.
    pub fn predict_rows(&self, n: usize) -> Vec<Prediction> {
        let mut r = rng::stream(self.seed, &[]);
        (0..n)
            .map(|_| {
                let u: f64 = r.gen();
                let mut acc = 0.0;
                let mut label = self.prior.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                for (c, p) in self.prior.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        label = c;
                        break;
                    }
                }
                Prediction {
                    label,
                    probs: self.prior.clone(),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::testdata::dataset;
    use super::*;

    #[test]
    fn draw_frequency_follows_prior() {
        let m = DummyModel {
            prior: vec![0.66, 0.34],
            seed: 17,
        };
        let p = m.predict_rows(10_000);
        let f = p.iter().filter(|p| p.label == 0).count() as f64 / 1e4;
        assert!((f - 0.66).abs() < 0.02, "{f}");
        assert!(p.iter().all(|p| p.probs == [0.66, 0.34]));
    }

    #[test]
    fn prior_sums_to_one() {
        let d = dataset(vec![vec![0.0]; 7], vec![0, 1, 1, 2, 2, 2, 2], 3);
        let m = DummyModel::fit(&d, 0);
        assert!((m.prior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(m.prior[2], 4.0 / 7.0);
    }

    #[test]
    fn absent_class_is_never_drawn() {
        let m = DummyModel {
            prior: vec![0.5, 0.0, 0.5],
            seed: 1,
        };
        assert!(m.predict_rows(2000).iter().all(|p| p.label != 1));
    }
}
