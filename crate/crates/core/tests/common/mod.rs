//! Test-only oracles, written independently of the engine's code paths.
#![allow(dead_code)]

use prosody_nn::engine::{Gate, LstmParams, Tensor};
use prosody_nn::rng::Rng;

/// Direct triple loop over `(o, t, c, k)` with explicit indexing.
pub fn conv1d_oracle(x: &[Vec<f64>], w: &[Vec<Vec<f64>>], b: &[f64], stride: usize) -> Vec<Vec<f64>> {
    let len = x[0].len();
    let k_len = w[0][0].len();
    let l_out = (len - k_len) / stride + 1;
    let mut y = vec![vec![0.0; l_out]; w.len()];
    for o in 0..w.len() {
        for t in 0..l_out {
            let mut acc = 0.0;
            for c in 0..x.len() {
                for k in 0..k_len {
                    acc += w[o][c][k] * x[c][t * stride + k];
                }
            }
            y[o][t] = acc + b[o];
        }
    }
    y
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn matvec(m: &Tensor, v: &[f64]) -> Vec<f64> {
    let (rows, cols) = (m.shape()[0], m.shape()[1]);
    (0..rows)
        .map(|r| (0..cols).map(|c| m.data()[r * cols + c] * v[c]).sum())
        .collect()
}

/// Step-by-step LSTM straight from the cell equations, using per-gate
/// matrices without packing.
pub fn lstm_oracle(seq: &[Vec<f64>], p: &LstmParams) -> (Vec<f64>, Vec<f64>) {
    let h_size = p.hidden();
    let mut h = vec![0.0; h_size];
    let mut c = vec![0.0; h_size];
    for x in seq {
        let pre = |g: Gate| -> Vec<f64> {
            let gp = p.gate(g);
            let wx = matvec(&gp.w, x);
            let uh = matvec(&gp.u, &h);
            (0..h_size).map(|k| wx[k] + uh[k] + gp.b.data()[k]).collect()
        };
        let i: Vec<f64> = pre(Gate::Input).into_iter().map(sigmoid).collect();
        let f: Vec<f64> = pre(Gate::Forget).into_iter().map(sigmoid).collect();
        let g: Vec<f64> = pre(Gate::Cell).into_iter().map(f64::tanh).collect();
        let o: Vec<f64> = pre(Gate::Output).into_iter().map(sigmoid).collect();
        for k in 0..h_size {
            c[k] = f[k] * c[k] + i[k] * g[k];
            h[k] = o[k] * c[k].tanh();
        }
    }
    (h, c)
}

pub fn random_tensor(shape: &[usize], bound: f64, rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform_range(-bound, bound)).collect()).unwrap()
}

pub fn random_lstm(hidden: usize, in_dim: usize, bound: f64, rng: &mut Rng) -> LstmParams {
    let mut p = LstmParams::zeros(hidden, in_dim);
    for t in p.tensors_mut() {
        for v in t.data_mut() {
            *v = rng.uniform_range(-bound, bound);
        }
    }
    p
}

/// Central difference of a scalar function of one flat vector.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, at: &[f64], eps: f64) -> Vec<f64> {
    let mut x = at.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + eps;
            let plus = f(&x);
            x[i] = orig - eps;
            let minus = f(&x);
            x[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}
