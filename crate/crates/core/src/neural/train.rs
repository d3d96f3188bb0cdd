use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::net::{backward, forward};
use super::{EmbeddingMode, HeadLayout, Layout, NeuralConfig, NeuralError, NeuralModel, Vocab, CHECKPOINT_VERSION};
use crate::optim::{max_relative_error, numeric_gradient, Adam};
use crate::rng;

/// One training pair as symbol ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
    pub label: usize,
}

/// Initial parameters. Embeddings come from `pretrained` when given and are
/// otherwise uniform with unit variance; every other block is uniform in
/// `+-1/sqrt(fan_in)` (GRU blocks use the hidden size as fan-in).
pub fn init_params(l: &Layout, cfg: &NeuralConfig, pretrained: Option<&[f64]>, seed: u64) -> Vec<f64> {
    let mut p = vec![0.0; l.len];
    let mut r = rng::stream(seed, &[]);
    let mut fill = |p: &mut [f64], bound: f64| p.iter_mut().for_each(|v| *v = r.gen_range(-bound..bound));
    match pretrained {
        Some(v) => p[l.emb.clone()].copy_from_slice(v),
        None => fill(&mut p[l.emb.clone()], 3f64.sqrt()),
    }
    let gb = 1.0 / (l.hidden as f64).sqrt();
    fill(&mut p[l.gru_fwd.clone()], gb);
    fill(&mut p[l.gru_bwd.clone()], gb);
    let lin = |fan_in: usize| 1.0 / (fan_in as f64).sqrt();
    match &l.head {
        HeadLayout::Alignment {
            conv_w,
            conv_b,
            fc_w,
            fc_b,
            out_w,
            out_b,
        } => {
            let k = lin(cfg.kernel * cfg.kernel);
            fill(&mut p[conv_w.clone()], k);
            fill(&mut p[conv_b.clone()], k);
            let f = lin(cfg.conv_filters * cfg.pool[0] * cfg.pool[1]);
            fill(&mut p[fc_w.clone()], f);
            fill(&mut p[fc_b.clone()], f);
            fill(&mut p[out_w.clone()], lin(cfg.fc));
            fill(&mut p[out_b.clone()], lin(cfg.fc));
        }
        HeadLayout::MeanConcat {
            hid_w,
            hid_b,
            out_w,
            out_b,
        } => {
            let h = lin(4 * l.hidden);
            fill(&mut p[hid_w.clone()], h);
            fill(&mut p[hid_b.clone()], h);
            fill(&mut p[out_w.clone()], lin(cfg.mlp_hidden));
            fill(&mut p[out_b.clone()], lin(cfg.mlp_hidden));
        }
    }
    p
}

/// Mean cross-entropy over `batch` and its gradient. With `dropout_key`
/// set, example `i` of the batch draws its dropout masks from a stream
/// derived from the key and `i`. Examples are processed in parallel and
/// summed in batch order, so the result does not depend on thread count.
pub fn batch_loss_grad(
    params: &[f64],
    l: &Layout,
    cfg: &NeuralConfig,
    batch: &[&Example],
    dropout_key: Option<(u64, &[u64])>,
) -> (f64, Vec<f64>) {
    let scale = 1.0 / batch.len() as f64;
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let mut r = dropout_key.map(|(seed, tags)| {
                let mut t = tags.to_vec();
                t.push(i as u64);
                rng::stream(seed, &t)
            });
            let (probs, cache) = forward(params, l, cfg, &ex.src, &ex.tgt, r.as_mut());
            let mut g = vec![0.0; params.len()];
            backward(params, l, cfg, &cache, ex.label, scale, &mut g);
            let p = probs[ex.label];
            let loss = -if p == 0.0 { f64::MIN_POSITIVE } else { p }.ln();
            (loss * scale, g)
        })
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (l, g) in parts {
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    (loss, grad)
}

/// Trains with Adam on mini-batches, reshuffling every epoch from a stream
/// derived from the seed and the epoch.
pub fn train_neural(
    examples: &[Example],
    cfg: &NeuralConfig,
    classes: Vec<String>,
    vocab: Vocab,
    dim: usize,
    pretrained: Option<&[f64]>,
) -> Result<NeuralModel, NeuralError> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(NeuralError::Config("no training examples".into()));
    }
    if examples.iter().any(|e| e.src.is_empty() || e.tgt.is_empty()) {
        return Err(NeuralError::EmptySequence);
    }
    let l = Layout::new(cfg, vocab.len(), dim, classes.len());
    let mut model = NeuralModel {
        format_version: CHECKPOINT_VERSION,
        config: cfg.clone(),
        classes,
        vocab,
        dim,
        params: init_params(&l, cfg, pretrained, rng::derive(cfg.seed, &[0])),
        loss_curve: Vec::with_capacity(cfg.epochs),
    };
    let frozen = cfg.embedding == EmbeddingMode::Word && !cfg.tune_embeddings;
    let mut adam = Adam::new(l.len, cfg.lr);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng::stream(cfg.seed, &[1, epoch as u64]));
        let mut total = 0.0;
        let before = model.params.clone();
        for (b, chunk) in order.chunks(cfg.batch).enumerate() {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            let tags = [2, epoch as u64, b as u64];
            let (loss, mut grad) = batch_loss_grad(&model.params, &l, cfg, &batch, Some((cfg.seed, &tags)));
            if !loss.is_finite() {
                let mut last_good = model.clone();
                last_good.params = before;
                return Err(NeuralError::NonFinite {
                    epoch,
                    batch: b,
                    loss,
                    last_good: Box::new(last_good),
                });
            }
            if frozen {
                grad[l.emb.clone()].iter_mut().for_each(|g| *g = 0.0);
            }
            total += loss * chunk.len() as f64;
            adam.step(&mut model.params, &grad);
        }
        model.loss_curve.push(total / examples.len() as f64);
    }
    Ok(model)
}

/// Largest relative error between the analytic gradient of the batch loss
/// (dropout off) and central finite differences, over every parameter.
pub fn gradient_check(model: &NeuralModel, batch: &[Example]) -> f64 {
    let l = model.layout();
    let refs: Vec<&Example> = batch.iter().collect();
    let (_, analytic) = batch_loss_grad(&model.params, &l, &model.config, &refs, None);
    let mut params = model.params.clone();
    let numeric = numeric_gradient(&mut params, 1e-5, |p| {
        batch_loss_grad(p, &l, &model.config, &refs, None).0
    });
    max_relative_error(&analytic, &numeric)
}

#[cfg(test)]
mod tests {
    use super::super::{Architecture, Mat};
    use super::*;
    use crate::optim::argmax;

    fn vocab(n: usize) -> Vocab {
        Vocab::from((0..n).map(|i| format!("s{i}")).collect::<Vec<_>>())
    }

    fn small(arch: Architecture) -> NeuralConfig {
        NeuralConfig {
            architecture: arch,
            char_dim: 3,
            hidden: 3,
            conv_filters: 2,
            pool: [2, 2],
            fc: 3,
            mlp_hidden: 4,
            dropout: 0.0,
            ..Default::default()
        }
    }

    fn model(cfg: NeuralConfig, n_classes: usize, seed: u64) -> NeuralModel {
        let v = vocab(6);
        let l = Layout::new(&cfg, v.len(), cfg.char_dim, n_classes);
        NeuralModel {
            format_version: CHECKPOINT_VERSION,
            params: init_params(&l, &cfg, None, seed),
            dim: cfg.char_dim,
            config: cfg,
            classes: (0..n_classes).map(|c| c.to_string()).collect(),
            vocab: v,
            loss_curve: vec![],
        }
    }

    #[test]
    fn mean_concat_gradients() {
        let m = model(small(Architecture::MeanConcat), 3, 1);
        let batch = vec![
            Example { src: vec![1, 2, 3], tgt: vec![4, 5], label: 2 },
            Example { src: vec![5], tgt: vec![1, 1, 2, 0], label: 0 },
        ];
        let err = gradient_check(&m, &batch);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn alignment_gradients_through_gru() {
        let m = model(small(Architecture::Alignment), 2, 2);
        let batch = vec![
            Example { src: vec![1, 2, 3, 4, 5], tgt: vec![5, 4, 3], label: 1 },
            Example { src: vec![2, 2], tgt: vec![0, 1, 3, 5, 4], label: 0 },
        ];
        let err = gradient_check(&m, &batch);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn shapes_and_softmax() {
        let cfg = NeuralConfig::default();
        let v = vocab(4);
        let l = Layout::new(&cfg, v.len(), 10, 6);
        let m = NeuralModel {
            format_version: CHECKPOINT_VERSION,
            params: init_params(&l, &cfg, None, 3),
            dim: 10,
            config: cfg,
            classes: (0..6).map(|c| c.to_string()).collect(),
            vocab: v,
            loss_curve: vec![],
        };
        let e: Mat = m.encode(&[1]).unwrap();
        assert_eq!((e.rows, e.cols), (1, 20));
        assert_eq!(m.encode(&[1, 2, 3]).unwrap().rows, 3);
        assert!(m.encode(&[]).is_err());
        let p = m.predict_ids(&[1, 2, 3], &[3, 2]).unwrap();
        assert_eq!(p.len(), 6);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(p, m.predict_ids(&[1, 2, 3], &[3, 2]).unwrap());
    }

    fn toy() -> Vec<Example> {
        // class 1 iff the source contains symbol 1
        (0..20)
            .map(|i| {
                let label = i % 2;
                let mut src = vec![2 + i % 3, 3 + i % 2];
                if label == 1 {
                    src.insert(i % 2, 1);
                }
                Example { src, tgt: vec![4, 5 - i % 2], label }
            })
            .collect()
    }

    #[test]
    fn learns_separable_toy_set() {
        for arch in [Architecture::MeanConcat, Architecture::Alignment] {
            let cfg = NeuralConfig {
                architecture: arch,
                lr: 0.01,
                dropout: 0.0,
                seed: 4,
                ..Default::default()
            };
            let m = train_neural(&toy(), &cfg, vec!["a".into(), "b".into()], vocab(6), 10, None).unwrap();
            let acc = toy()
                .iter()
                .filter(|e| argmax(&m.predict_ids(&e.src, &e.tgt).unwrap()) == e.label)
                .count();
            assert_eq!(acc, 20, "{arch:?}");
            assert!(m.loss_curve.first() > m.loss_curve.last());
        }
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let cfg = NeuralConfig {
            architecture: Architecture::MeanConcat,
            lr: 0.0,
            epochs: 3,
            seed: 8,
            ..Default::default()
        };
        let m = train_neural(&toy(), &cfg, vec!["a".into(), "b".into()], vocab(6), 10, None).unwrap();
        let l = m.layout();
        assert_eq!(m.params, init_params(&l, &cfg, None, rng::derive(8, &[0])));
    }

    #[test]
    fn reproducible_and_round_trips() {
        let cfg = NeuralConfig {
            epochs: 3,
            seed: 1,
            ..Default::default()
        };
        let classes = vec!["a".to_string(), "b".to_string()];
        let a = train_neural(&toy(), &cfg, classes.clone(), vocab(6), 10, None).unwrap();
        let b = train_neural(&toy(), &cfg, classes, vocab(6), 10, None).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_json(&mut buf).unwrap();
        let back = NeuralModel::read_json(buf.as_slice()).unwrap();
        assert_eq!(back, a);
        let mut again = Vec::new();
        back.write_json(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn frozen_word_embeddings_do_not_move() {
        let cfg = NeuralConfig {
            architecture: Architecture::MeanConcat,
            embedding: EmbeddingMode::Word,
            epochs: 2,
            lr: 0.01,
            ..Default::default()
        };
        let pre: Vec<f64> = (0..6 * 4).map(|i| (i as f64 * 0.37).sin()).collect();
        let m = train_neural(&toy(), &cfg, vec!["a".into(), "b".into()], vocab(6), 4, Some(&pre)).unwrap();
        assert_eq!(&m.params[m.layout().emb], pre.as_slice());
    }

    #[test]
    fn batch_composition_does_not_change_inference() {
        let m = model(small(Architecture::Alignment), 2, 5);
        let alone = m.predict_ids(&[1, 2], &[3]).unwrap();
        for e in toy() {
            m.predict_ids(&e.src, &e.tgt).unwrap();
        }
        assert_eq!(alone, m.predict_ids(&[1, 2], &[3]).unwrap());
    }
}
