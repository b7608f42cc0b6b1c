use serde::{Deserialize, Serialize};

use crate::contour::PADDED_LEN;
use crate::engine::{
    dense_backward, dense_forward, glorot_uniform, lstm_backward, lstm_forward, uniform_tensor,
    DenseParams, Gate, GateParams, LstmCache, LstmParams, Tensor,
};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub hidden_size: usize,
    /// Keep every n-th frame of the padded input.
    pub input_downsample: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            hidden_size: 32,
            input_downsample: 1,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::Config("hidden_size must be >= 1".into()));
        }
        if self.input_downsample == 0 || self.input_downsample > PADDED_LEN {
            return Err(Error::Config(format!(
                "input_downsample must be in 1..={PADDED_LEN}, got {}",
                self.input_downsample
            )));
        }
        Ok(())
    }

    /// Number of recurrent steps over a padded sample.
    pub fn steps(&self) -> usize {
        PADDED_LEN.div_ceil(self.input_downsample)
    }
}

const LSTM_INIT_BOUND: f64 = 0.08;
const FORGET_BIAS: f64 = 1.0;

/// LSTM over scalar frames → final hidden state → dense(2).
#[derive(Clone, Debug, PartialEq)]
pub struct LstmNet {
    pub(crate) config: LstmConfig,
    pub(crate) lstm: LstmParams,
    pub(crate) dense: DenseParams,
}

pub(crate) struct LstmNetCache {
    lstm: LstmCache,
    h_final: Vec<f64>,
}

impl LstmNet {
    pub fn new(config: LstmConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_size;
        let mut gate = |g: Gate| GateParams {
            w: uniform_tensor(&[h, 1], LSTM_INIT_BOUND, rng),
            u: uniform_tensor(&[h, h], LSTM_INIT_BOUND, rng),
            b: {
                let mut b = Tensor::zeros(&[h]);
                if g == Gate::Forget {
                    b.fill(FORGET_BIAS);
                }
                b
            },
        };
        let gates = [
            gate(Gate::Input),
            gate(Gate::Forget),
            gate(Gate::Cell),
            gate(Gate::Output),
        ];
        let lstm = LstmParams::new(gates)?;
        let dense = DenseParams::new(glorot_uniform(&[2, h], h, 2, rng), Tensor::zeros(&[2]))?;
        Ok(LstmNet {
            config,
            lstm,
            dense,
        })
    }

    pub(crate) fn from_tensors(config: LstmConfig, tensors: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        if tensors.len() != 14 {
            return Err(Error::Shape(format!("lstm needs 14 tensors, got {}", tensors.len())));
        }
        let mut it = tensors.into_iter();
        let mut next_gate = || GateParams {
            w: it.next().unwrap(),
            u: it.next().unwrap(),
            b: it.next().unwrap(),
        };
        let gates = [next_gate(), next_gate(), next_gate(), next_gate()];
        let lstm = LstmParams::new(gates)?;
        if lstm.hidden() != config.hidden_size || lstm.in_dim() != 1 {
            return Err(Error::Shape("lstm tensors do not match config".into()));
        }
        let dense_w = it.next().unwrap();
        let dense_b = it.next().unwrap();
        dense_w.expect_shape(&[2, config.hidden_size], "dense weights")?;
        Ok(LstmNet {
            config,
            lstm,
            dense: DenseParams::new(dense_w, dense_b)?,
        })
    }

    pub fn config(&self) -> &LstmConfig {
        &self.config
    }

    pub fn lstm(&self) -> &LstmParams {
        &self.lstm
    }

    pub fn dense(&self) -> &DenseParams {
        &self.dense
    }

    /// LSTM tensors in gate order, then dense weights and bias.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.lstm.tensors();
        v.push(&self.dense.weights);
        v.push(&self.dense.bias);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.lstm.tensors_mut();
        v.push(&mut self.dense.weights);
        v.push(&mut self.dense.bias);
        v
    }

    pub(crate) fn sequence(&self, input: &[f64]) -> Result<Tensor> {
        let frames: Vec<f64> = input
            .iter()
            .step_by(self.config.input_downsample)
            .copied()
            .collect();
        Tensor::new(vec![frames.len(), 1], frames)
    }

    pub(crate) fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        let seq = self.sequence(input)?;
        let h = crate::engine::lstm_final_state(&seq, &self.lstm)?;
        dense_forward(&h, &self.dense)
    }

    pub(crate) fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, LstmNetCache)> {
        let seq = self.sequence(input)?;
        let (h_final, lstm) = lstm_forward(&seq, &self.lstm)?;
        let logits = dense_forward(&h_final, &self.dense)?;
        Ok((logits, LstmNetCache { lstm, h_final }))
    }

    pub(crate) fn backward(&self, dlogits: &[f64], cache: &LstmNetCache) -> Result<Vec<Tensor>> {
        let (dh, dense_grads) = dense_backward(dlogits, &cache.h_final, &self.dense)?;
        let grads = lstm_backward(&dh, &cache.lstm, &self.lstm)?;
        let mut out: Vec<Tensor> = grads.tensors().into_iter().cloned().collect();
        out.push(dense_grads.weights);
        out.push(dense_grads.bias);
        Ok(out)
    }
}
