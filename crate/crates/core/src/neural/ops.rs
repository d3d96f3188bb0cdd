//! Forward and backward passes for the fixed operator set: GRU cell,
//! dot-product alignment, same-padded convolution and adaptive max pooling.

use serde::{Deserialize, Serialize};

use super::NeuralError;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        Mat {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += W x` for `W` of shape `rows x cols`.
pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        out[r] += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += W^T y`.
pub(crate) fn matvec_t(w: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        for c in 0..cols {
            out[c] += row[c] * y[r];
        }
    }
}

/// `g += y x^T`.
pub(crate) fn outer_acc(g: &mut [f64], rows: usize, cols: usize, y: &[f64], x: &[f64]) {
    for r in 0..rows {
        let row = &mut g[r * cols..(r + 1) * cols];
        for c in 0..cols {
            row[c] += y[r] * x[c];
        }
    }
}

/// Parameter count of one GRU direction: `W_{z,r,n}` (`h x e`),
/// `U_{z,r,n}` (`h x h`) and `b_{z,r,n}`, stored in that order.
pub fn gru_len(e: usize, h: usize) -> usize {
    3 * h * e + 3 * h * h + 3 * h
}

struct GruView<'a> {
    w: [&'a [f64]; 3],
    u: [&'a [f64]; 3],
    b: [&'a [f64]; 3],
}

fn gru_view(p: &[f64], e: usize, h: usize) -> GruView<'_> {
    let (w, rest) = p.split_at(3 * h * e);
    let (u, b) = rest.split_at(3 * h * h);
    GruView {
        w: [&w[..h * e], &w[h * e..2 * h * e], &w[2 * h * e..]],
        u: [&u[..h * h], &u[h * h..2 * h * h], &u[2 * h * h..]],
        b: [&b[..h], &b[h..2 * h], &b[2 * h..3 * h]],
    }
}

#[derive(Debug, Clone)]
pub struct GruCache {
    xs: Vec<Vec<f64>>,
    /// `hs[t]` is the state after step `t`.
    pub hs: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    n: Vec<Vec<f64>>,
}

/// Runs one GRU direction from a zero state:
///
/// `z = s(W_z x + U_z h + b_z)`, `r = s(W_r x + U_r h + b_r)`,
/// `n = tanh(W_n x + U_n (r * h) + b_n)`, `h' = (1 - z) * n + z * h`.
pub fn gru_forward(p: &[f64], e: usize, h: usize, xs: &[Vec<f64>]) -> GruCache {
    let v = gru_view(p, e, h);
    let mut c = GruCache {
        xs: xs.to_vec(),
        hs: Vec::with_capacity(xs.len()),
        z: Vec::with_capacity(xs.len()),
        r: Vec::with_capacity(xs.len()),
        n: Vec::with_capacity(xs.len()),
    };
    let mut prev = vec![0.0; h];
    for x in xs {
        let gate = |k: usize, hin: &[f64]| {
            let mut a = v.b[k].to_vec();
            matvec(v.w[k], h, e, x, &mut a);
            matvec(v.u[k], h, h, hin, &mut a);
            a
        };
        let z: Vec<f64> = gate(0, &prev).into_iter().map(sigmoid).collect();
        let r: Vec<f64> = gate(1, &prev).into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(&prev).map(|(a, b)| a * b).collect();
        let n: Vec<f64> = gate(2, &rh).into_iter().map(f64::tanh).collect();
        let next: Vec<f64> = (0..h).map(|i| (1.0 - z[i]) * n[i] + z[i] * prev[i]).collect();
        c.z.push(z);
        c.r.push(r);
        c.n.push(n);
        c.hs.push(next.clone());
        prev = next;
    }
    c
}

/// Backpropagates `dhs` (gradient w.r.t. each output state) through time,
/// accumulating parameter gradients into `g` and returning input gradients.
pub fn gru_backward(p: &[f64], e: usize, h: usize, c: &GruCache, dhs: &[Vec<f64>], g: &mut [f64]) -> Vec<Vec<f64>> {
    let v = gru_view(p, e, h);
    let (hw, hu) = (h * e, h * h);
    let t_len = c.xs.len();
    let mut dxs = vec![vec![0.0; e]; t_len];
    let mut carry = vec![0.0; h];
    let zero = vec![0.0; h];
    for t in (0..t_len).rev() {
        let prev = if t == 0 { &zero } else { &c.hs[t - 1] };
        let (z, r, n, x) = (&c.z[t], &c.r[t], &c.n[t], &c.xs[t]);
        let dh: Vec<f64> = (0..h).map(|i| dhs[t][i] + carry[i]).collect();
        let mut dprev: Vec<f64> = (0..h).map(|i| dh[i] * z[i]).collect();
        let da_n: Vec<f64> = (0..h).map(|i| dh[i] * (1.0 - z[i]) * (1.0 - n[i] * n[i])).collect();
        let da_z: Vec<f64> = (0..h).map(|i| dh[i] * (prev[i] - n[i]) * z[i] * (1.0 - z[i])).collect();
        let rh: Vec<f64> = (0..h).map(|i| r[i] * prev[i]).collect();
        let mut drh = vec![0.0; h];
        matvec_t(v.u[2], h, h, &da_n, &mut drh);
        let da_r: Vec<f64> = (0..h).map(|i| drh[i] * prev[i] * r[i] * (1.0 - r[i])).collect();
        for i in 0..h {
            dprev[i] += drh[i] * r[i];
        }
        let das = [&da_z, &da_r, &da_n];
        let hins = [prev.as_slice(), prev.as_slice(), rh.as_slice()];
        for k in 0..3 {
            outer_acc(&mut g[k * hw..(k + 1) * hw], h, e, das[k], x);
            let uo = 3 * hw + k * hu;
            outer_acc(&mut g[uo..uo + hu], h, h, das[k], hins[k]);
            let bo = 3 * hw + 3 * hu + k * h;
            g[bo..bo + h].iter_mut().zip(das[k].iter()).for_each(|(a, b)| *a += b);
            matvec_t(v.w[k], h, e, das[k], &mut dxs[t]);
        }
        matvec_t(v.u[0], h, h, &da_z, &mut dprev);
        matvec_t(v.u[1], h, h, &da_r, &mut dprev);
        carry = dprev;
    }
    dxs
}

/// `M[i][j] = dot(src_i, tgt_j)`.
pub fn alignment_matrix(src: &Mat, tgt: &Mat) -> Result<Mat, NeuralError> {
    if src.cols != tgt.cols {
        return Err(NeuralError::Shape(format!(
            "representation widths differ: {} vs {}",
            src.cols, tgt.cols
        )));
    }
    let mut m = Mat::zeros(src.rows, tgt.rows);
    for i in 0..src.rows {
        for j in 0..tgt.rows {
            *m.at(i, j) = src.row(i).iter().zip(tgt.row(j)).map(|(a, b)| a * b).sum();
        }
    }
    Ok(m)
}

/// Gradients of the alignment matrix w.r.t. both inputs.
pub fn alignment_backward(src: &Mat, tgt: &Mat, dm: &Mat) -> (Mat, Mat) {
    let mut ds = Mat::zeros(src.rows, src.cols);
    let mut dt = Mat::zeros(tgt.rows, tgt.cols);
    for i in 0..src.rows {
        for j in 0..tgt.rows {
            let d = dm.get(i, j);
            if d == 0.0 {
                continue;
            }
            for k in 0..src.cols {
                *ds.at(i, k) += d * tgt.get(j, k);
                *dt.at(j, k) += d * src.get(i, k);
            }
        }
    }
    (ds, dt)
}

/// Single-channel input, `filters` kernels of `ks x ks` (odd), stride 1,
/// zero padding that keeps the input shape.
pub fn conv_forward(m: &Mat, kernels: &[f64], bias: &[f64], ks: usize) -> Vec<Mat> {
    let pad = (ks / 2) as isize;
    bias.iter()
        .enumerate()
        .map(|(f, &b)| {
            let k = &kernels[f * ks * ks..(f + 1) * ks * ks];
            let mut out = Mat::zeros(m.rows, m.cols);
            for i in 0..m.rows {
                for j in 0..m.cols {
                    let mut s = b;
                    for di in 0..ks {
                        let ii = i as isize + di as isize - pad;
                        if ii < 0 || ii >= m.rows as isize {
                            continue;
                        }
                        for dj in 0..ks {
                            let jj = j as isize + dj as isize - pad;
                            if jj < 0 || jj >= m.cols as isize {
                                continue;
                            }
                            s += k[di * ks + dj] * m.get(ii as usize, jj as usize);
                        }
                    }
                    *out.at(i, j) = s;
                }
            }
            out
        })
        .collect()
}

/// Accumulates kernel and bias gradients; returns the input gradient.
pub fn conv_backward(m: &Mat, kernels: &[f64], ks: usize, dout: &[Mat], gk: &mut [f64], gb: &mut [f64]) -> Mat {
    let pad = (ks / 2) as isize;
    let mut dm = Mat::zeros(m.rows, m.cols);
    for (f, d) in dout.iter().enumerate() {
        let k = &kernels[f * ks * ks..(f + 1) * ks * ks];
        for i in 0..m.rows {
            for j in 0..m.cols {
                let g = d.get(i, j);
                if g == 0.0 {
                    continue;
                }
                gb[f] += g;
                for di in 0..ks {
                    let ii = i as isize + di as isize - pad;
                    if ii < 0 || ii >= m.rows as isize {
                        continue;
                    }
                    for dj in 0..ks {
                        let jj = j as isize + dj as isize - pad;
                        if jj < 0 || jj >= m.cols as isize {
                            continue;
                        }
                        let (ii, jj) = (ii as usize, jj as usize);
                        gk[f * ks * ks + di * ks + dj] += g * m.get(ii, jj);
                        *dm.at(ii, jj) += g * k[di * ks + dj];
                    }
                }
            }
        }
    }
    dm
}

/// Cell `k` of `g` over a length `len`: `[floor(k*len/g), ceil((k+1)*len/g))`.
/// Cells overlap when `len < g` and always cover at least one element.
pub fn pool_bounds(len: usize, g: usize, k: usize) -> (usize, usize) {
    let start = k * len / g;
    let end = ((k + 1) * len).div_ceil(g);
    (start, end.max(start + 1))
}

/// Max over each of the `gh x gw` cells. Also returns, per cell, the flat
/// input index of the maximum (first in row-major order on ties).
pub fn adaptive_max_pool(m: &Mat, gh: usize, gw: usize) -> (Mat, Vec<usize>) {
    let mut out = Mat::zeros(gh, gw);
    let mut arg = Vec::with_capacity(gh * gw);
    for a in 0..gh {
        let (r0, r1) = pool_bounds(m.rows, gh, a);
        for b in 0..gw {
            let (c0, c1) = pool_bounds(m.cols, gw, b);
            let mut best = (f64::NEG_INFINITY, r0 * m.cols + c0);
            for i in r0..r1 {
                for j in c0..c1 {
                    let v = m.get(i, j);
                    if v > best.0 {
                        best = (v, i * m.cols + j);
                    }
                }
            }
            *out.at(a, b) = best.0;
            arg.push(best.1);
        }
    }
    (out, arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{max_relative_error, numeric_gradient};

    #[test]
    fn quadrant_pooling() {
        let m = Mat {
            rows: 4,
            cols: 4,
            data: (0..16).map(|v| v as f64).collect(),
        };
        let (p, arg) = adaptive_max_pool(&m, 2, 2);
        assert_eq!(p.data, vec![5.0, 7.0, 13.0, 15.0]);
        assert_eq!(arg, vec![5, 7, 13, 15]);
    }

    #[test]
    fn pooling_shapes_and_constants() {
        for (r, c) in [(2, 3), (5, 7), (10, 10), (1, 1)] {
            let m = Mat {
                rows: r,
                cols: c,
                data: vec![2.5; r * c],
            };
            let (p, _) = adaptive_max_pool(&m, 4, 4);
            assert_eq!((p.rows, p.cols), (4, 4));
            assert!(p.data.iter().all(|&v| v == 2.5));
        }
    }

    #[test]
    fn bounds_match_reference_formula() {
        assert_eq!(pool_bounds(5, 4, 0), (0, 2));
        assert_eq!(pool_bounds(5, 4, 3), (3, 5));
        assert_eq!(pool_bounds(2, 4, 1), (0, 1));
        assert_eq!(pool_bounds(2, 4, 2), (1, 2));
    }

    #[test]
    fn alignment_examples() {
        let s = Mat::from_rows(&[vec![1.0, 0.0, 0.0]]);
        let t = Mat::from_rows(&[vec![2.0, 0.0, 0.0]]);
        assert_eq!(alignment_matrix(&s, &t).unwrap().data, vec![2.0]);
        let r = Mat::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]);
        let m = alignment_matrix(&r, &r).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
        let o = Mat::from_rows(&[vec![0.0, 1.0]]);
        let p = Mat::from_rows(&[vec![1.0, 0.0]]);
        assert_eq!(alignment_matrix(&o, &p).unwrap().data, vec![0.0]);
        assert!(alignment_matrix(&o, &s).is_err());
    }

    #[test]
    fn zero_gru_stays_zero() {
        let p = vec![0.0; gru_len(3, 4)];
        let c = gru_forward(&p, 3, 4, &[vec![0.0; 3], vec![0.0; 3]]);
        assert!(c.hs.iter().flatten().all(|&v| v == 0.0));
    }

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        use rand::Rng;
        let mut r = crate::rng::stream(seed, &[]);
        (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn gru_gradients() {
        let (e, h, t) = (3, 4, 5);
        let mut p = pseudo(gru_len(e, h), 1);
        let xs: Vec<Vec<f64>> = (0..t).map(|i| pseudo(e, 10 + i as u64)).collect();
        let w: Vec<Vec<f64>> = (0..t).map(|i| pseudo(h, 20 + i as u64)).collect();
        let loss = |p: &[f64], xs: &[Vec<f64>]| -> f64 {
            let c = gru_forward(p, e, h, xs);
            c.hs.iter().zip(&w).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()).sum()
        };
        let c = gru_forward(&p, e, h, &xs);
        let mut g = vec![0.0; p.len()];
        let dxs = gru_backward(&p, e, h, &c, &w, &mut g);
        let num = numeric_gradient(&mut p, 1e-6, |p| loss(p, &xs));
        assert!(max_relative_error(&g, &num) < 1e-6);
        let mut flat = xs.concat();
        let num_x = numeric_gradient(&mut flat, 1e-6, |f| {
            let xs: Vec<Vec<f64>> = f.chunks(e).map(<[f64]>::to_vec).collect();
            loss(&p, &xs)
        });
        assert!(max_relative_error(&dxs.concat(), &num_x) < 1e-6);
    }

    #[test]
    fn conv_gradients() {
        let ks = 3;
        let m = Mat {
            rows: 3,
            cols: 4,
            data: pseudo(12, 3),
        };
        let mut k = pseudo(2 * ks * ks, 4);
        let b = pseudo(2, 5);
        let w = [pseudo(12, 6), pseudo(12, 7)];
        let loss = |m: &Mat, k: &[f64]| -> f64 {
            conv_forward(m, k, &b, ks)
                .iter()
                .zip(&w)
                .map(|(o, w)| o.data.iter().zip(w).map(|(a, c)| a * c).sum::<f64>())
                .sum()
        };
        let dout: Vec<Mat> = w
            .iter()
            .map(|w| Mat {
                rows: 3,
                cols: 4,
                data: w.clone(),
            })
            .collect();
        let mut gk = vec![0.0; k.len()];
        let mut gb = vec![0.0; 2];
        let dm = conv_backward(&m, &k, ks, &dout, &mut gk, &mut gb);
        let num = numeric_gradient(&mut k, 1e-6, |k| loss(&m, k));
        assert!(max_relative_error(&gk, &num) < 1e-6);
        let mut md = m.data.clone();
        let num_m = numeric_gradient(&mut md, 1e-6, |d| {
            loss(
                &Mat {
                    rows: 3,
                    cols: 4,
                    data: d.to_vec(),
                },
                &k,
            )
        });
        assert!(max_relative_error(&dm.data, &num_m) < 1e-6);
        assert!((gb[0] - w[0].iter().sum::<f64>()).abs() < 1e-12);
    }
}
