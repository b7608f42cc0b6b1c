use serde::{Deserialize, Serialize};

use crate::contour::PADDED_LEN;
use crate::engine::{
    conv1d_backward, conv1d_forward, conv1d_output_len, dense_backward, dense_forward,
    glorot_uniform, maxpool1d_backward, maxpool1d_forward, pool_output_len, relu, relu_backward,
    Conv1dCache, Conv1dParams, DenseParams, PoolCache, ReluCache, Tensor,
};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvNetConfig {
    pub n_filters: usize,
    pub kernel_len: usize,
    pub conv_stride: usize,
    pub pool_window: usize,
    pub pool_stride: usize,
}

impl Default for ConvNetConfig {
    fn default() -> Self {
        ConvNetConfig {
            n_filters: 6,
            kernel_len: 32,
            conv_stride: 4,
            pool_window: 4,
            pool_stride: 4,
        }
    }
}

/// Activation lengths through the stack for a 1024-frame input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvNetDims {
    pub conv_len: usize,
    pub pool_len: usize,
    pub dense_in: usize,
}

impl ConvNetConfig {
    pub fn dims(&self) -> Result<ConvNetDims> {
        if self.n_filters == 0 {
            return Err(Error::Config("n_filters must be >= 1".into()));
        }
        if self.conv_stride == 0 || self.pool_stride == 0 {
            return Err(Error::Config("strides must be >= 1".into()));
        }
        let conv_len = conv1d_output_len(PADDED_LEN, self.kernel_len, self.conv_stride)
            .ok_or_else(|| {
                Error::Config(format!(
                    "kernel_len {} does not fit {PADDED_LEN} frames",
                    self.kernel_len
                ))
            })?;
        let pool_len = pool_output_len(conv_len, self.pool_window, self.pool_stride)
            .ok_or_else(|| {
                Error::Config(format!(
                    "pool window {} does not fit conv output of {conv_len}",
                    self.pool_window
                ))
            })?;
        Ok(ConvNetDims {
            conv_len,
            pool_len,
            dense_in: self.n_filters * pool_len,
        })
    }
}

/// conv1d → ReLU → max pool → flatten → dense(2).
#[derive(Clone, Debug, PartialEq)]
pub struct ConvNet {
    pub(crate) config: ConvNetConfig,
    pub(crate) conv: Conv1dParams,
    pub(crate) dense: DenseParams,
}

pub(crate) struct ConvNetCache {
    conv: Conv1dCache,
    relu: ReluCache,
    pool: PoolCache,
    pool_shape: Vec<usize>,
    flat: Vec<f64>,
}

impl ConvNet {
    pub fn new(config: ConvNetConfig, rng: &mut Rng) -> Result<Self> {
        let dims = config.dims()?;
        let (f, k) = (config.n_filters, config.kernel_len);
        let conv = Conv1dParams::new(
            glorot_uniform(&[f, 1, k], k, f * k, rng),
            Tensor::zeros(&[f]),
            config.conv_stride,
        )?;
        let dense = DenseParams::new(
            glorot_uniform(&[2, dims.dense_in], dims.dense_in, 2, rng),
            Tensor::zeros(&[2]),
        )?;
        Ok(ConvNet {
            config,
            conv,
            dense,
        })
    }

    pub(crate) fn from_tensors(config: ConvNetConfig, mut tensors: Vec<Tensor>) -> Result<Self> {
        let dims = config.dims()?;
        if tensors.len() != 4 {
            return Err(Error::Shape(format!("convnet needs 4 tensors, got {}", tensors.len())));
        }
        let (f, k) = (config.n_filters, config.kernel_len);
        tensors[0].expect_shape(&[f, 1, k], "conv weights")?;
        tensors[2].expect_shape(&[2, dims.dense_in], "dense weights")?;
        let dense_b = tensors.pop().unwrap();
        let dense_w = tensors.pop().unwrap();
        let conv_b = tensors.pop().unwrap();
        let conv_w = tensors.pop().unwrap();
        Ok(ConvNet {
            config,
            conv: Conv1dParams::new(conv_w, conv_b, config.conv_stride)?,
            dense: DenseParams::new(dense_w, dense_b)?,
        })
    }

    pub fn config(&self) -> &ConvNetConfig {
        &self.config
    }

    pub fn conv(&self) -> &Conv1dParams {
        &self.conv
    }

    pub fn dense(&self) -> &DenseParams {
        &self.dense
    }

    /// Conv weights, conv bias, dense weights, dense bias.
    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![
            &self.conv.weights,
            &self.conv.bias,
            &self.dense.weights,
            &self.dense.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.conv.weights,
            &mut self.conv.bias,
            &mut self.dense.weights,
            &mut self.dense.bias,
        ]
    }

    pub(crate) fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ConvNetCache)> {
        let x = Tensor::new(vec![1, input.len()], input.to_vec())?;
        let (conv_out, conv) = conv1d_forward(&x, &self.conv)?;
        let (act, relu) = relu(&conv_out);
        let (pooled, pool) =
            maxpool1d_forward(&act, self.config.pool_window, self.config.pool_stride)?;
        let pool_shape = pooled.shape().to_vec();
        let flat = pooled.into_data();
        let logits = dense_forward(&flat, &self.dense)?;
        Ok((
            logits,
            ConvNetCache {
                conv,
                relu,
                pool,
                pool_shape,
                flat,
            },
        ))
    }

    pub(crate) fn backward(&self, dlogits: &[f64], cache: &ConvNetCache) -> Result<Vec<Tensor>> {
        let (dflat, dense_grads) = dense_backward(dlogits, &cache.flat, &self.dense)?;
        let dpool = Tensor::new(cache.pool_shape.clone(), dflat)?;
        let dact = maxpool1d_backward(&dpool, &cache.pool)?;
        let dconv = relu_backward(&dact, &cache.relu)?;
        let (_, conv_grads) = conv1d_backward(&dconv, &cache.conv, &self.conv)?;
        Ok(vec![
            conv_grads.weights,
            conv_grads.bias,
            dense_grads.weights,
            dense_grads.bias,
        ])
    }

    /// Smallest distance of any ReLU input from 0, and of any pool winner from
    /// its runner-up, for `input`. Finite differences are unreliable when
    /// either is tiny.
    pub fn kink_margin(&self, input: &[f64]) -> Result<f64> {
        let x = Tensor::new(vec![1, input.len()], input.to_vec())?;
        let (conv_out, _) = conv1d_forward(&x, &self.conv)?;
        let mut margin = conv_out
            .data()
            .iter()
            .map(|v| v.abs())
            .fold(f64::INFINITY, f64::min);
        let (act, _) = relu(&conv_out);
        let len = act.shape()[1];
        let (w, s) = (self.config.pool_window, self.config.pool_stride);
        let out_len = pool_output_len(len, w, s).unwrap_or(0);
        for c in 0..act.shape()[0] {
            let row = &act.data()[c * len..(c + 1) * len];
            for t in 0..out_len {
                let mut window: Vec<f64> = row[t * s..t * s + w].to_vec();
                window.sort_by(|a, b| b.total_cmp(a));
                if window.len() > 1 && window[0] > 0.0 {
                    margin = margin.min(window[0] - window[1]);
                }
            }
        }
        Ok(margin)
    }
}
