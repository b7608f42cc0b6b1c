use crate::engine::Tensor;
use crate::error::{Error, Result};

/// Filter bank of a valid (unpadded) 1-D cross-correlation.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1dParams {
    /// `[out_channels, in_channels, kernel_len]`
    pub weights: Tensor,
    /// `[out_channels]`
    pub bias: Tensor,
    pub stride: usize,
}

impl Conv1dParams {
    pub fn new(weights: Tensor, bias: Tensor, stride: usize) -> Result<Self> {
        if weights.shape().len() != 3 {
            return Err(Error::Shape(format!(
                "conv weights must be rank 3, got {:?}",
                weights.shape()
            )));
        }
        bias.expect_shape(&[weights.shape()[0]], "conv bias")?;
        if stride == 0 {
            return Err(Error::Config("conv stride must be >= 1".into()));
        }
        Ok(Conv1dParams {
            weights,
            bias,
            stride,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel_len(&self) -> usize {
        self.weights.shape()[2]
    }
}

/// `floor((len - kernel) / stride) + 1`, or `None` when the kernel does not fit.
pub fn conv1d_output_len(len: usize, kernel_len: usize, stride: usize) -> Option<usize> {
    if kernel_len == 0 || stride == 0 || len < kernel_len {
        None
    } else {
        Some((len - kernel_len) / stride + 1)
    }
}

#[derive(Clone, Debug)]
pub struct Conv1dCache {
    input: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv1dGrads {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// `y[o, t] = bias[o] + sum_{c,k} w[o, c, k] * x[c, t*stride + k]` for `x: [C_in, L]`.
pub fn conv1d_forward(x: &Tensor, p: &Conv1dParams) -> Result<(Tensor, Conv1dCache)> {
    let (c_out, c_in, k_len) = (p.out_channels(), p.in_channels(), p.kernel_len());
    if x.shape().len() != 2 || x.shape()[0] != c_in {
        return Err(Error::Shape(format!(
            "conv input must be [{c_in}, L], got {:?}",
            x.shape()
        )));
    }
    let len = x.shape()[1];
    let l_out = conv1d_output_len(len, k_len, p.stride).ok_or_else(|| {
        Error::Shape(format!("conv input length {len} shorter than kernel {k_len}"))
    })?;

    let xs = x.data();
    let w = p.weights.data();
    let mut y = vec![0.0; c_out * l_out];
    for o in 0..c_out {
        let row = &mut y[o * l_out..(o + 1) * l_out];
        for (t, out) in row.iter_mut().enumerate() {
            let start = t * p.stride;
            let mut acc = p.bias.data()[o];
            for c in 0..c_in {
                let taps = &w[(o * c_in + c) * k_len..(o * c_in + c + 1) * k_len];
                let window = &xs[c * len + start..c * len + start + k_len];
                acc += taps.iter().zip(window).map(|(a, b)| a * b).sum::<f64>();
            }
            *out = acc;
        }
    }
    Ok((
        Tensor::new(vec![c_out, l_out], y)?,
        Conv1dCache { input: x.clone() },
    ))
}

pub fn conv1d_backward(
    dy: &Tensor,
    cache: &Conv1dCache,
    p: &Conv1dParams,
) -> Result<(Tensor, Conv1dGrads)> {
    let (c_out, c_in, k_len) = (p.out_channels(), p.in_channels(), p.kernel_len());
    let len = cache.input.shape()[1];
    let l_out = conv1d_output_len(len, k_len, p.stride)
        .ok_or_else(|| Error::Shape("conv cache does not match params".into()))?;
    dy.expect_shape(&[c_out, l_out], "conv backward dy")?;

    let xs = cache.input.data();
    let w = p.weights.data();
    let dys = dy.data();
    let mut dx = vec![0.0; c_in * len];
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; c_out];
    for o in 0..c_out {
        for t in 0..l_out {
            let g = dys[o * l_out + t];
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            let start = t * p.stride;
            for c in 0..c_in {
                let base = (o * c_in + c) * k_len;
                let xoff = c * len + start;
                for k in 0..k_len {
                    dw[base + k] += g * xs[xoff + k];
                    dx[xoff + k] += g * w[base + k];
                }
            }
        }
    }
    Ok((
        Tensor::new(vec![c_in, len], dx)?,
        Conv1dGrads {
            weights: Tensor::new(p.weights.shape().to_vec(), dw)?,
            bias: Tensor::new(vec![c_out], db)?,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(w: &[f64], c_out: usize, c_in: usize, stride: usize) -> Conv1dParams {
        let k = w.len() / (c_out * c_in);
        Conv1dParams::new(
            Tensor::new(vec![c_out, c_in, k], w.to_vec()).unwrap(),
            Tensor::zeros(&[c_out]),
            stride,
        )
        .unwrap()
    }

    fn input(xs: &[f64]) -> Tensor {
        Tensor::new(vec![1, xs.len()], xs.to_vec()).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let (y, _) = conv1d_forward(&input(&[1.0, 2.0, 3.0, 4.0]), &params(&[1.0], 1, 1, 1)).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn difference_kernel() {
        let (y, _) =
            conv1d_forward(&input(&[1.0, 2.0, 3.0, 4.0]), &params(&[1.0, 0.0, -1.0], 1, 1, 1)).unwrap();
        assert_eq!(y.data(), &[-2.0, -2.0]);
    }

    #[test]
    fn strided_output_len() {
        let (y, _) = conv1d_forward(&input(&[0.0; 7]), &params(&[1.0; 3], 1, 1, 2)).unwrap();
        assert_eq!(y.shape(), &[1, 3]);
        assert_eq!(conv1d_output_len(1024, 32, 4), Some(249));
        assert_eq!(conv1d_output_len(3, 4, 1), None);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(conv1d_forward(&input(&[1.0, 2.0]), &params(&[1.0; 3], 1, 1, 1)).is_err());
        assert!(conv1d_forward(&input(&[1.0; 5]), &params(&[1.0; 6], 1, 2, 1)).is_err());
    }

    #[test]
    fn backward_zero_and_identity() {
        let p = params(&[1.0], 1, 1, 1);
        let (y, cache) = conv1d_forward(&input(&[1.0, 2.0, 3.0]), &p).unwrap();
        let (dx, g) = conv1d_backward(&y.zeros_like(), &cache, &p).unwrap();
        assert!(dx.data().iter().chain(g.weights.data()).chain(g.bias.data()).all(|&v| v == 0.0));

        let dy = Tensor::new(vec![1, 3], vec![0.5, -1.0, 2.0]).unwrap();
        let (dx, _) = conv1d_backward(&dy, &cache, &p).unwrap();
        assert_eq!(dx.data(), dy.data());
        assert!(conv1d_backward(&Tensor::zeros(&[1, 2]), &cache, &p).is_err());
    }
}
