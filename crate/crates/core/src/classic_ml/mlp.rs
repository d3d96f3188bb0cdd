use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClassicError, Dataset};
use crate::optim::{max_relative_error, numeric_gradient, softmax, Adam};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Logistic,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z < 0.0 {
                    0.0
                } else {
                    z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Logistic => a * (1.0 - a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    /// L2 penalty `l2/2 * sum(w^2)` on weights (not biases), added per batch.
    pub l2: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![100],
            activation: Activation::Relu,
            lr: 1e-3,
            epochs: 200,
            batch: 200,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Per-feature centring and scaling computed on training rows. Features
/// with variance below the floor are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub const VARIANCE_FLOOR: f64 = 1e-12;

    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let v = v / n;
                if v < Self::VARIANCE_FLOOR {
                    1.0
                } else {
                    v.sqrt()
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Fully connected layers over a flat parameter vector. Layer `l` stores its
/// `out x in` weights row-major followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

impl Net {
    pub fn n_params(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(sizes: Vec<usize>, activation: Activation, seed: u64) -> Self {
        let mut r = rng::stream(seed, &[]);
        let mut params = Vec::with_capacity(Self::n_params(&sizes));
        for w in sizes.windows(2) {
            let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| r.gen_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Net {
            sizes,
            activation,
            params,
        }
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let o = off;
            off += w[0] * w[1] + w[1];
            (o, w[0], w[1])
        })
    }

    /// Pre-activations and activations of every layer; the last entry holds
    /// the output logits in both.
    fn forward_all(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n_layers = self.sizes.len() - 1;
        let mut zs = Vec::with_capacity(n_layers);
        let mut acts = vec![x.to_vec()];
        for (l, (off, fan_in, fan_out)) in self.layers().enumerate() {
            let a = acts.last().unwrap();
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let z: Vec<f64> = (0..fan_out)
                .map(|o| b[o] + w[o * fan_in..(o + 1) * fan_in].iter().zip(a).map(|(w, a)| w * a).sum::<f64>())
                .collect();
            let out = if l + 1 == n_layers {
                z.clone()
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            zs.push(z);
            acts.push(out);
        }
        (zs, acts)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let (_, acts) = self.forward_all(x);
        softmax(acts.last().unwrap())
    }

    /// Mean cross-entropy over `rows` plus the L2 term, and its gradient.
    pub fn loss_grad(&self, rows: &[Vec<f64>], ys: &[usize], l2: f64) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let layers: Vec<_> = self.layers().collect();
        let n = rows.len() as f64;
        for (x, &y) in rows.iter().zip(ys) {
            let (zs, acts) = self.forward_all(x);
            let p = softmax(acts.last().unwrap());
            loss -= if p[y] == 0.0 { f64::MIN_POSITIVE } else { p[y] }.ln();
            let mut delta = p;
            delta[y] -= 1.0;
            for l in (0..layers.len()).rev() {
                let (off, fan_in, fan_out) = layers[l];
                let a = &acts[l];
                for o in 0..fan_out {
                    let d = delta[o] / n;
                    let row = off + o * fan_in;
                    for i in 0..fan_in {
                        grad[row + i] += d * a[i];
                    }
                    grad[off + fan_in * fan_out + o] += d;
                }
                if l == 0 {
                    break;
                }
                let w = &self.params[off..off + fan_in * fan_out];
                let mut prev = vec![0.0; fan_in];
                for o in 0..fan_out {
                    for i in 0..fan_in {
                        prev[i] += w[o * fan_in + i] * delta[o];
                    }
                }
                for i in 0..fan_in {
                    prev[i] *= self.activation.derivative(zs[l - 1][i], acts[l][i]);
                }
                delta = prev;
            }
        }
        loss /= n;
        if l2 > 0.0 {
            for (off, fan_in, fan_out) in layers {
                for k in off..off + fan_in * fan_out {
                    loss += 0.5 * l2 * self.params[k] * self.params[k];
                    grad[k] += l2 * self.params[k];
                }
            }
        }
        (loss, grad)
    }

    /// Largest relative error between the analytic gradient and central
    /// finite differences.
    pub fn gradient_check(&self, rows: &[Vec<f64>], ys: &[usize], l2: f64) -> f64 {
        let (_, analytic) = self.loss_grad(rows, ys, l2);
        let mut probe = self.clone();
        let mut params = std::mem::take(&mut probe.params);
        let numeric = numeric_gradient(&mut params, 1e-5, |p| {
            probe.params = p.to_vec();
            probe.loss_grad(rows, ys, l2).0
        });
        max_relative_error(&analytic, &numeric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    pub standardizer: Standardizer,
    pub net: Net,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
}

impl MlpModel {
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        self.net.predict_proba(&self.standardizer.apply(x))
    }
}

pub fn train_feature_mlp(data: &Dataset, p: &MlpParams) -> Result<MlpModel, ClassicError> {
    data.check_trainable()?;
    if p.batch == 0 || p.hidden.contains(&0) {
        return Err(ClassicError::Params("batch and hidden sizes must be positive".into()));
    }
    let standardizer = Standardizer::fit(&data.x);
    let rows: Vec<Vec<f64>> = data.x.iter().map(|r| standardizer.apply(r)).collect();
    let mut sizes = vec![data.n_features()];
    sizes.extend(&p.hidden);
    sizes.push(data.n_classes());
    let mut net = Net::init(sizes, p.activation, rng::derive(p.seed, &[0]));
    let mut adam = Adam::new(net.params.len(), p.lr);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut loss_curve = Vec::with_capacity(p.epochs);
    for epoch in 0..p.epochs {
        order.shuffle(&mut rng::stream(p.seed, &[1, epoch as u64]));
        let mut total = 0.0;
        for (batch, chunk) in order.chunks(p.batch).enumerate() {
            let bx: Vec<Vec<f64>> = chunk.iter().map(|&i| rows[i].clone()).collect();
            let by: Vec<usize> = chunk.iter().map(|&i| data.y[i]).collect();
            let (loss, grad) = net.loss_grad(&bx, &by, p.l2);
            if !loss.is_finite() {
                return Err(ClassicError::NonFinite { epoch, batch, loss });
            }
            total += loss * chunk.len() as f64;
            adam.step(&mut net.params, &grad);
        }
        loss_curve.push(total / rows.len() as f64);
    }
    Ok(MlpModel {
        params: p.clone(),
        standardizer,
        net,
        loss_curve,
    })
}
