use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ops::{
    adaptive_max_pool, alignment_backward, alignment_matrix, conv_backward, conv_forward, gru_backward, gru_forward,
    matvec, matvec_t, outer_acc, GruCache, Mat,
};
use super::{HeadLayout, Layout, NeuralConfig};
use crate::optim::softmax;

/// Inverted dropout mask: kept units are scaled by `1 / (1 - rate)`.
fn dropout_mask(n: usize, rate: f64, rng: Option<&mut ChaCha8Rng>) -> Option<Vec<f64>> {
    let rng = rng?;
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    Some((0..n).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect())
}

fn apply_mask(v: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        v.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
    }
}

struct Side {
    ids: Vec<usize>,
    fwd: GruCache,
    bwd: GruCache,
    mask: Option<Vec<f64>>,
    /// Encoder output after dropout.
    out: Mat,
}

fn embed(p: &[f64], l: &Layout, ids: &[usize]) -> Vec<Vec<f64>> {
    ids.iter()
        .map(|&i| p[l.emb.start + i * l.dim..l.emb.start + (i + 1) * l.dim].to_vec())
        .collect()
}

fn encode_side(p: &[f64], l: &Layout, ids: &[usize], rate: f64, rng: Option<&mut ChaCha8Rng>) -> Side {
    let h = l.hidden;
    let xs = embed(p, l, ids);
    let fwd = gru_forward(&p[l.gru_fwd.clone()], l.dim, h, &xs);
    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let bwd = gru_forward(&p[l.gru_bwd.clone()], l.dim, h, &rev);
    let t_len = ids.len();
    let mut out = Mat::zeros(t_len, 2 * h);
    for t in 0..t_len {
        out.row_mut(t)[..h].copy_from_slice(&fwd.hs[t]);
        out.row_mut(t)[h..].copy_from_slice(&bwd.hs[t_len - 1 - t]);
    }
    let mask = dropout_mask(out.data.len(), rate, rng);
    apply_mask(&mut out.data, &mask);
    Side {
        ids: ids.to_vec(),
        fwd,
        bwd,
        mask,
        out,
    }
}

fn encode_back(p: &[f64], l: &Layout, side: &Side, dout: &Mat, g: &mut [f64]) {
    let h = l.hidden;
    let mut d = dout.data.clone();
    apply_mask(&mut d, &side.mask);
    let t_len = side.ids.len();
    let dfwd: Vec<Vec<f64>> = (0..t_len).map(|t| d[t * 2 * h..t * 2 * h + h].to_vec()).collect();
    let dbwd: Vec<Vec<f64>> = (0..t_len)
        .map(|s| {
            let t = t_len - 1 - s;
            d[t * 2 * h + h..(t + 1) * 2 * h].to_vec()
        })
        .collect();
    let dx_f = gru_backward(&p[l.gru_fwd.clone()], l.dim, h, &side.fwd, &dfwd, &mut g[l.gru_fwd.clone()]);
    let dx_b = gru_backward(&p[l.gru_bwd.clone()], l.dim, h, &side.bwd, &dbwd, &mut g[l.gru_bwd.clone()]);
    for t in 0..t_len {
        let row = l.emb.start + side.ids[t] * l.dim;
        for k in 0..l.dim {
            g[row + k] += dx_f[t][k] + dx_b[t_len - 1 - t][k];
        }
    }
}

/// Encoder output without dropout.
pub(crate) fn encode(p: &[f64], l: &Layout, ids: &[usize]) -> Mat {
    encode_side(p, l, ids, 0.0, None).out
}

enum HeadCache {
    Alignment {
        m: Mat,
        args: Vec<Vec<usize>>,
        pooled: Vec<f64>,
        hidden: Vec<f64>,
        mask: Option<Vec<f64>>,
        dropped: Vec<f64>,
    },
    MeanConcat {
        x: Vec<f64>,
        hidden: Vec<f64>,
        mask: Option<Vec<f64>>,
        dropped: Vec<f64>,
    },
}

pub(crate) struct Cache {
    src: Side,
    tgt: Side,
    head: HeadCache,
    probs: Vec<f64>,
}

fn dense(p: &[f64], w: &std::ops::Range<usize>, b: &std::ops::Range<usize>, rows: usize, x: &[f64]) -> Vec<f64> {
    let mut out = p[b.clone()].to_vec();
    matvec(&p[w.clone()], rows, x.len(), x, &mut out);
    out
}

/// Class probabilities for a pair of symbol-id sequences. Dropout is
/// active only when `rng` is given.
pub(crate) fn forward(
    p: &[f64],
    l: &Layout,
    cfg: &NeuralConfig,
    src: &[usize],
    tgt: &[usize],
    mut rng: Option<&mut ChaCha8Rng>,
) -> (Vec<f64>, Cache) {
    let rate = cfg.dropout;
    let s = encode_side(p, l, src, rate, rng.as_deref_mut());
    let t = encode_side(p, l, tgt, rate, rng.as_deref_mut());
    let (logits, head) = match &l.head {
        HeadLayout::Alignment {
            conv_w,
            conv_b,
            fc_w,
            fc_b,
            out_w,
            out_b,
        } => {
            let m = alignment_matrix(&s.out, &t.out).expect("encoder widths agree");
            let maps = conv_forward(&m, &p[conv_w.clone()], &p[conv_b.clone()], cfg.kernel);
            let mut pooled = Vec::new();
            let mut args = Vec::new();
            for c in &maps {
                let (pm, a) = adaptive_max_pool(c, cfg.pool[0], cfg.pool[1]);
                pooled.extend(pm.data);
                args.push(a);
            }
            let hidden: Vec<f64> = dense(p, fc_w, fc_b, cfg.fc, &pooled).into_iter().map(f64::tanh).collect();
            let mask = dropout_mask(hidden.len(), rate, rng.as_deref_mut());
            let mut dropped = hidden.clone();
            apply_mask(&mut dropped, &mask);
            let logits = dense(p, out_w, out_b, l.n_classes, &dropped);
            (
                logits,
                HeadCache::Alignment {
                    m,
                    args,
                    pooled,
                    hidden,
                    mask,
                    dropped,
                },
            )
        }
        HeadLayout::MeanConcat {
            hid_w,
            hid_b,
            out_w,
            out_b,
        } => {
            let mean = |m: &Mat| -> Vec<f64> {
                let mut v = vec![0.0; m.cols];
                for i in 0..m.rows {
                    v.iter_mut().zip(m.row(i)).for_each(|(a, b)| *a += b);
                }
                v.iter_mut().for_each(|a| *a /= m.rows as f64);
                v
            };
            let mut x = mean(&s.out);
            x.extend(mean(&t.out));
            let hidden: Vec<f64> = dense(p, hid_w, hid_b, cfg.mlp_hidden, &x).into_iter().map(f64::tanh).collect();
            let mask = dropout_mask(hidden.len(), rate, rng);
            let mut dropped = hidden.clone();
            apply_mask(&mut dropped, &mask);
            let logits = dense(p, out_w, out_b, l.n_classes, &dropped);
            (
                logits,
                HeadCache::MeanConcat {
                    x,
                    hidden,
                    mask,
                    dropped,
                },
            )
        }
    };
    let probs = softmax(&logits);
    (
        probs.clone(),
        Cache {
            src: s,
            tgt: t,
            head,
            probs,
        },
    )
}

/// Backward pass of `-ln p[label]` scaled by `scale`, accumulated into `g`.
pub(crate) fn backward(p: &[f64], l: &Layout, cfg: &NeuralConfig, c: &Cache, label: usize, scale: f64, g: &mut [f64]) {
    let mut dlogits: Vec<f64> = c.probs.iter().map(|v| v * scale).collect();
    dlogits[label] -= scale;
    // shared tail: output layer, dropout, tanh
    let tail = |g: &mut [f64],
                out_w: &std::ops::Range<usize>,
                out_b: &std::ops::Range<usize>,
                width: usize,
                hidden: &[f64],
                mask: &Option<Vec<f64>>,
                dropped: &[f64]|
     -> Vec<f64> {
        outer_acc(&mut g[out_w.clone()], l.n_classes, width, &dlogits, dropped);
        g[out_b.clone()].iter_mut().zip(&dlogits).for_each(|(a, b)| *a += b);
        let mut dh = vec![0.0; width];
        matvec_t(&p[out_w.clone()], l.n_classes, width, &dlogits, &mut dh);
        apply_mask(&mut dh, mask);
        dh.iter().zip(hidden).map(|(d, h)| d * (1.0 - h * h)).collect()
    };
    let (ds, dt) = match (&l.head, &c.head) {
        (
            HeadLayout::Alignment {
                conv_w,
                conv_b,
                fc_w,
                fc_b,
                out_w,
                out_b,
            },
            HeadCache::Alignment {
                m,
                args,
                pooled,
                hidden,
                mask,
                dropped,
            },
        ) => {
            let da = tail(g, out_w, out_b, cfg.fc, hidden, mask, dropped);
            outer_acc(&mut g[fc_w.clone()], cfg.fc, pooled.len(), &da, pooled);
            g[fc_b.clone()].iter_mut().zip(&da).for_each(|(a, b)| *a += b);
            let mut dpooled = vec![0.0; pooled.len()];
            matvec_t(&p[fc_w.clone()], cfg.fc, pooled.len(), &da, &mut dpooled);
            let cells = cfg.pool[0] * cfg.pool[1];
            let dmaps: Vec<Mat> = args
                .iter()
                .enumerate()
                .map(|(f, arg)| {
                    let mut d = Mat::zeros(m.rows, m.cols);
                    for (k, &idx) in arg.iter().enumerate() {
                        d.data[idx] += dpooled[f * cells + k];
                    }
                    d
                })
                .collect();
            let (gw, rest) = g.split_at_mut(conv_b.start);
            let dm = conv_backward(
                m,
                &p[conv_w.clone()],
                cfg.kernel,
                &dmaps,
                &mut gw[conv_w.clone()],
                &mut rest[..conv_b.len()],
            );
            alignment_backward(&c.src.out, &c.tgt.out, &dm)
        }
        (
            HeadLayout::MeanConcat {
                hid_w,
                hid_b,
                out_w,
                out_b,
            },
            HeadCache::MeanConcat {
                x,
                hidden,
                mask,
                dropped,
            },
        ) => {
            let da = tail(g, out_w, out_b, cfg.mlp_hidden, hidden, mask, dropped);
            outer_acc(&mut g[hid_w.clone()], cfg.mlp_hidden, x.len(), &da, x);
            g[hid_b.clone()].iter_mut().zip(&da).for_each(|(a, b)| *a += b);
            let mut dx = vec![0.0; x.len()];
            matvec_t(&p[hid_w.clone()], cfg.mlp_hidden, x.len(), &da, &mut dx);
            let w = 2 * l.hidden;
            let spread = |side: &Side, d: &[f64]| {
                let mut m = Mat::zeros(side.out.rows, w);
                let n = side.out.rows as f64;
                for i in 0..m.rows {
                    m.row_mut(i).iter_mut().zip(d).for_each(|(a, b)| *a = b / n);
                }
                m
            };
            (spread(&c.src, &dx[..w]), spread(&c.tgt, &dx[w..]))
        }
        _ => unreachable!("cache built for another head"),
    };
    encode_back(p, l, &c.src, &ds, g);
    encode_back(p, l, &c.tgt, &dt, g);
}
