//! LSTM cell with forget gate and backpropagation through time.
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)      f = σ(W_f x + U_f h + b_f)
//! g = tanh(W_g x + U_g h + b_g)   o = σ(W_o x + U_o h + b_o)
//! c' = f ⊙ c + i ⊙ g              h' = o ⊙ tanh(c')
//! ```
//!
//! Parameters are stored per gate. The hot loops run on a packed copy where
//! the four gates are stacked (`4H` rows) and the recurrent matrix is kept
//! transposed, so both the forward accumulation and the backward outer
//! products walk contiguous memory.

use crate::engine::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Cell,
    Output,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Cell, Gate::Output];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Gate::Input => "input",
            Gate::Forget => "forget",
            Gate::Cell => "cell",
            Gate::Output => "output",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    /// `[hidden, in_dim]`
    pub w: Tensor,
    /// `[hidden, hidden]`
    pub u: Tensor,
    /// `[hidden]`
    pub b: Tensor,
}

/// Weights of one LSTM layer, indexed by [`Gate`]. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    gates: [GateParams; 4],
}

pub type LstmGrads = LstmParams;

impl LstmParams {
    pub fn new(gates: [GateParams; 4]) -> Result<Self> {
        let hidden = gates[0].b.len();
        let in_dim = gates[0].w.shape().get(1).copied().unwrap_or(0);
        for (g, p) in Gate::ALL.iter().zip(&gates) {
            p.w.expect_shape(&[hidden, in_dim], &format!("{} gate W", g.name()))?;
            p.u.expect_shape(&[hidden, hidden], &format!("{} gate U", g.name()))?;
            p.b.expect_shape(&[hidden], &format!("{} gate b", g.name()))?;
        }
        Ok(LstmParams { gates })
    }

    pub fn zeros(hidden: usize, in_dim: usize) -> Self {
        let gate = || GateParams {
            w: Tensor::zeros(&[hidden, in_dim]),
            u: Tensor::zeros(&[hidden, hidden]),
            b: Tensor::zeros(&[hidden]),
        };
        LstmParams {
            gates: [gate(), gate(), gate(), gate()],
        }
    }

    pub fn hidden(&self) -> usize {
        self.gates[0].b.len()
    }

    pub fn in_dim(&self) -> usize {
        self.gates[0].w.shape()[1]
    }

    pub fn gate(&self, gate: Gate) -> &GateParams {
        &self.gates[gate.index()]
    }

    pub fn gate_mut(&mut self, gate: Gate) -> &mut GateParams {
        &mut self.gates[gate.index()]
    }

    /// Tensors in declaration order: for each gate (input, forget, cell,
    /// output) its `W`, `U`, `b`.
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.gates.iter().flat_map(|g| [&g.w, &g.u, &g.b]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.gates
            .iter_mut()
            .flat_map(|g| [&mut g.w, &mut g.u, &mut g.b])
            .collect()
    }

    fn pack(&self) -> Packed {
        let (h, n_in) = (self.hidden(), self.in_dim());
        let rows = 4 * h;
        let mut w = vec![0.0; rows * n_in];
        let mut ut = vec![0.0; h * rows];
        let mut b = vec![0.0; rows];
        for (gi, g) in self.gates.iter().enumerate() {
            w[gi * h * n_in..(gi + 1) * h * n_in].copy_from_slice(g.w.data());
            b[gi * h..(gi + 1) * h].copy_from_slice(g.b.data());
            let u = g.u.data();
            for k in 0..h {
                for j in 0..h {
                    ut[j * rows + gi * h + k] = u[k * h + j];
                }
            }
        }
        Packed { h, n_in, w, ut, b }
    }
}

struct Packed {
    h: usize,
    n_in: usize,
    /// `[4H, in]`
    w: Vec<f64>,
    /// `[H, 4H]`: row `j` holds column `j` of every gate's `U`.
    ut: Vec<f64>,
    b: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Packed {
    /// One step. `acts` receives the post-activation gates `[i, f, g, o]`.
    #[allow(clippy::too_many_arguments)]
    fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64], acts: &mut [f64], c: &mut [f64], tanh_c: &mut [f64], h: &mut [f64]) {
        let hs = self.h;
        let rows = 4 * hs;
        acts.copy_from_slice(&self.b);
        if x.iter().any(|&v| v != 0.0) {
            for (r, a) in acts.iter_mut().enumerate() {
                let wr = &self.w[r * self.n_in..(r + 1) * self.n_in];
                *a += wr.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
            }
        }
        for (j, &hj) in h_prev.iter().enumerate() {
            if hj == 0.0 {
                continue;
            }
            let col = &self.ut[j * rows..(j + 1) * rows];
            for (a, &u) in acts.iter_mut().zip(col) {
                *a += hj * u;
            }
        }
        let (ifo, rest) = acts.split_at_mut(2 * hs);
        let (g, o) = rest.split_at_mut(hs);
        ifo.iter_mut().for_each(|v| *v = sigmoid(*v));
        g.iter_mut().for_each(|v| *v = v.tanh());
        o.iter_mut().for_each(|v| *v = sigmoid(*v));
        let (i, f) = ifo.split_at(hs);
        for k in 0..hs {
            c[k] = f[k] * c_prev[k] + i[k] * g[k];
            tanh_c[k] = c[k].tanh();
            h[k] = o[k] * tanh_c[k];
        }
    }
}

/// Everything the backward pass needs from one step.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gates `[i, f, g, o]`, each of length `hidden`.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

fn check_step_shapes(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &LstmParams) -> Result<()> {
    if x.len() != p.in_dim() || h_prev.len() != p.hidden() || c_prev.len() != p.hidden() {
        return Err(Error::Shape(format!(
            "lstm step: x {} / h {} / c {} vs in_dim {} hidden {}",
            x.len(),
            h_prev.len(),
            c_prev.len(),
            p.in_dim(),
            p.hidden()
        )));
    }
    Ok(())
}

/// A single cell update; returns `(h, c, cache)`.
pub fn lstm_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmParams,
) -> Result<(Vec<f64>, Vec<f64>, LstmStepCache)> {
    check_step_shapes(x, h_prev, c_prev, p)?;
    let packed = p.pack();
    let hs = p.hidden();
    let mut acts = vec![0.0; 4 * hs];
    let (mut c, mut tanh_c, mut h) = (vec![0.0; hs], vec![0.0; hs], vec![0.0; hs]);
    packed.step(x, h_prev, c_prev, &mut acts, &mut c, &mut tanh_c, &mut h);
    let cache = LstmStepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates: acts,
        tanh_c,
    };
    Ok((h, c, cache))
}

/// Activations of a full forward pass, stored flat per step.
#[derive(Clone, Debug)]
pub struct LstmCache {
    steps: usize,
    hidden: usize,
    in_dim: usize,
    xs: Vec<f64>,
    /// `h_0 ..= h_L`
    hs: Vec<f64>,
    /// `c_0 ..= c_L`
    cs: Vec<f64>,
    acts: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCache {
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Hidden state after `t` steps (`t = 0` is the zero initial state).
    pub fn hidden_state(&self, t: usize) -> &[f64] {
        &self.hs[t * self.hidden..(t + 1) * self.hidden]
    }

    pub fn cell_state(&self, t: usize) -> &[f64] {
        &self.cs[t * self.hidden..(t + 1) * self.hidden]
    }
}

fn check_sequence(seq: &Tensor, p: &LstmParams) -> Result<usize> {
    if seq.shape().len() != 2 || seq.shape()[1] != p.in_dim() {
        return Err(Error::Shape(format!(
            "lstm input must be [L, {}], got {:?}",
            p.in_dim(),
            seq.shape()
        )));
    }
    Ok(seq.shape()[0])
}

/// Runs the sequence `[L, in_dim]` from zero state; returns the final hidden
/// state and the cache for [`lstm_backward`].
pub fn lstm_forward(seq: &Tensor, p: &LstmParams) -> Result<(Vec<f64>, LstmCache)> {
    let steps = check_sequence(seq, p)?;
    let packed = p.pack();
    let (hs, n_in) = (p.hidden(), p.in_dim());
    let mut cache = LstmCache {
        steps,
        hidden: hs,
        in_dim: n_in,
        xs: seq.data().to_vec(),
        hs: vec![0.0; (steps + 1) * hs],
        cs: vec![0.0; (steps + 1) * hs],
        acts: vec![0.0; steps * 4 * hs],
        tanh_c: vec![0.0; steps * hs],
    };
    for t in 0..steps {
        let (h_done, h_rest) = cache.hs.split_at_mut((t + 1) * hs);
        let (c_done, c_rest) = cache.cs.split_at_mut((t + 1) * hs);
        packed.step(
            &cache.xs[t * n_in..(t + 1) * n_in],
            &h_done[t * hs..],
            &c_done[t * hs..],
            &mut cache.acts[t * 4 * hs..(t + 1) * 4 * hs],
            &mut c_rest[..hs],
            &mut cache.tanh_c[t * hs..(t + 1) * hs],
            &mut h_rest[..hs],
        );
    }
    Ok((cache.hidden_state(steps).to_vec(), cache))
}

/// Forward pass without keeping activations.
pub fn lstm_final_state(seq: &Tensor, p: &LstmParams) -> Result<Vec<f64>> {
    let steps = check_sequence(seq, p)?;
    let packed = p.pack();
    let (hs, n_in) = (p.hidden(), p.in_dim());
    let mut acts = vec![0.0; 4 * hs];
    let mut tanh_c = vec![0.0; hs];
    let (mut h, mut c) = (vec![0.0; hs], vec![0.0; hs]);
    let (mut h_next, mut c_next) = (vec![0.0; hs], vec![0.0; hs]);
    let xs = seq.data();
    for t in 0..steps {
        packed.step(&xs[t * n_in..(t + 1) * n_in], &h, &c, &mut acts, &mut c_next, &mut tanh_c, &mut h_next);
        std::mem::swap(&mut h, &mut h_next);
        std::mem::swap(&mut c, &mut c_next);
    }
    Ok(h)
}

/// Backpropagation through time from a gradient on the final hidden state.
pub fn lstm_backward(dh_final: &[f64], cache: &LstmCache, p: &LstmParams) -> Result<LstmGrads> {
    let (hs, n_in) = (p.hidden(), p.in_dim());
    if cache.hidden != hs || cache.in_dim != n_in {
        return Err(Error::Shape("lstm cache does not match params".into()));
    }
    if dh_final.len() != hs {
        return Err(Error::Shape(format!("dh has {} entries, hidden is {hs}", dh_final.len())));
    }
    let packed = p.pack();
    let rows = 4 * hs;
    let mut dw = vec![0.0; rows * n_in];
    let mut dut = vec![0.0; hs * rows];
    let mut db = vec![0.0; rows];

    let mut dh = dh_final.to_vec();
    let mut dc = vec![0.0; hs];
    let mut da = vec![0.0; rows];
    for t in (0..cache.steps).rev() {
        let acts = &cache.acts[t * rows..(t + 1) * rows];
        let tanh_c = &cache.tanh_c[t * hs..(t + 1) * hs];
        let c_prev = cache.cell_state(t);
        let h_prev = cache.hidden_state(t);
        let x = &cache.xs[t * n_in..(t + 1) * n_in];
        for k in 0..hs {
            let (i, f, g, o) = (acts[k], acts[hs + k], acts[2 * hs + k], acts[3 * hs + k]);
            let tc = tanh_c[k];
            let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
            da[k] = dck * g * i * (1.0 - i);
            da[hs + k] = dck * c_prev[k] * f * (1.0 - f);
            da[2 * hs + k] = dck * i * (1.0 - g * g);
            da[3 * hs + k] = dh[k] * tc * o * (1.0 - o);
            dc[k] = dck * f;
        }
        for (d, a) in db.iter_mut().zip(&da) {
            *d += a;
        }
        if x.iter().any(|&v| v != 0.0) {
            for (r, &a) in da.iter().enumerate() {
                for (d, &xv) in dw[r * n_in..(r + 1) * n_in].iter_mut().zip(x) {
                    *d += a * xv;
                }
            }
        }
        for (j, &hj) in h_prev.iter().enumerate() {
            let col = &packed.ut[j * rows..(j + 1) * rows];
            if hj != 0.0 {
                for (d, &a) in dut[j * rows..(j + 1) * rows].iter_mut().zip(&da) {
                    *d += hj * a;
                }
            }
            dh[j] = col.iter().zip(&da).map(|(u, a)| u * a).sum();
        }
    }

    let mut grads = LstmParams::zeros(hs, n_in);
    for (gi, g) in grads.gates.iter_mut().enumerate() {
        g.w.data_mut()
            .copy_from_slice(&dw[gi * hs * n_in..(gi + 1) * hs * n_in]);
        g.b.data_mut().copy_from_slice(&db[gi * hs..(gi + 1) * hs]);
        let u = g.u.data_mut();
        for k in 0..hs {
            for j in 0..hs {
                u[k * hs + j] = dut[j * rows + gi * hs + k];
            }
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_zero_state() {
        let p = LstmParams::zeros(3, 2);
        let (h, c, _) = lstm_step(&[0.7, -1.2], &[0.0; 3], &[0.0; 3], &p).unwrap();
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
    }

    #[test]
    fn zero_params_unit_cell() {
        let p = LstmParams::zeros(1, 1);
        let (h, c, _) = lstm_step(&[0.3], &[0.0], &[1.0], &p).unwrap();
        assert_eq!(c[0], 0.5);
        assert!((h[0] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        assert!((h[0] - 0.231059).abs() < 1e-6);
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut p = LstmParams::zeros(1, 1);
        p.gate_mut(Gate::Forget).b.fill(50.0);
        p.gate_mut(Gate::Cell).w.fill(0.8);
        p.gate_mut(Gate::Input).b.fill(0.3);
        let (x, c_prev) = (0.9, 0.4);
        let (_, c, cache) = lstm_step(&[x], &[0.0], &[c_prev], &p).unwrap();
        let (i, g) = (cache.gates[0], cache.gates[2]);
        assert!((c[0] - (c_prev + i * g)).abs() < 1e-9);
    }

    #[test]
    fn single_step_sequence_matches_step() {
        let mut p = LstmParams::zeros(2, 1);
        for (n, t) in p.tensors_mut().into_iter().enumerate() {
            for (m, v) in t.data_mut().iter_mut().enumerate() {
                *v = ((n * 7 + m * 3) % 11) as f64 / 11.0 - 0.5;
            }
        }
        let (h_step, _, _) = lstm_step(&[0.4], &[0.0; 2], &[0.0; 2], &p).unwrap();
        let (h_seq, _) = lstm_forward(&Tensor::new(vec![1, 1], vec![0.4]).unwrap(), &p).unwrap();
        assert_eq!(h_step, h_seq);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let p = LstmParams::zeros(2, 1);
        assert!(lstm_step(&[0.0, 1.0], &[0.0; 2], &[0.0; 2], &p).is_err());
        assert!(lstm_forward(&Tensor::zeros(&[4, 2]), &p).is_err());
        let (_, cache) = lstm_forward(&Tensor::zeros(&[4, 1]), &p).unwrap();
        assert!(lstm_backward(&[1.0; 3], &cache, &p).is_err());
    }

    #[test]
    fn final_state_without_cache_agrees() {
        let mut p = LstmParams::zeros(3, 1);
        for (n, t) in p.tensors_mut().into_iter().enumerate() {
            for (m, v) in t.data_mut().iter_mut().enumerate() {
                *v = ((n * 5 + m * 13) % 17) as f64 / 17.0 - 0.5;
            }
        }
        let seq = Tensor::new(vec![6, 1], vec![0.1, 0.5, -0.3, 0.0, 0.0, 0.9]).unwrap();
        let (h, _) = lstm_forward(&seq, &p).unwrap();
        assert_eq!(h, lstm_final_state(&seq, &p).unwrap());
    }
}
