use crate::engine::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    /// `[out_dim, in_dim]`
    pub weights: Tensor,
    /// `[out_dim]`
    pub bias: Tensor,
}

impl DenseParams {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::Shape(format!(
                "dense weights must be rank 2, got {:?}",
                weights.shape()
            )));
        }
        bias.expect_shape(&[weights.shape()[0]], "dense bias")?;
        Ok(DenseParams { weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// `y = W x + b`; `x` is read as a flat vector.
pub fn dense_forward(x: &[f64], p: &DenseParams) -> Result<Vec<f64>> {
    let (out_dim, in_dim) = (p.out_dim(), p.in_dim());
    if x.len() != in_dim {
        return Err(Error::Shape(format!("dense input {} != in_dim {in_dim}", x.len())));
    }
    let w = p.weights.data();
    Ok((0..out_dim)
        .map(|o| {
            p.bias.data()[o]
                + w[o * in_dim..(o + 1) * in_dim]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
        .collect())
}

/// Returns `(dx, grads)` for the forward input `x`.
pub fn dense_backward(dy: &[f64], x: &[f64], p: &DenseParams) -> Result<(Vec<f64>, DenseGrads)> {
    let (out_dim, in_dim) = (p.out_dim(), p.in_dim());
    if dy.len() != out_dim || x.len() != in_dim {
        return Err(Error::Shape(format!(
            "dense backward: dy {} / x {} vs [{out_dim}, {in_dim}]",
            dy.len(),
            x.len()
        )));
    }
    let w = p.weights.data();
    let mut dx = vec![0.0; in_dim];
    let mut dw = vec![0.0; out_dim * in_dim];
    for o in 0..out_dim {
        let g = dy[o];
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let drow = &mut dw[o * in_dim..(o + 1) * in_dim];
        for i in 0..in_dim {
            drow[i] = g * x[i];
            dx[i] += g * row[i];
        }
    }
    Ok((
        dx,
        DenseGrads {
            weights: Tensor::new(vec![out_dim, in_dim], dw)?,
            bias: Tensor::new(vec![out_dim], dy.to_vec())?,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_hand_example() {
        let eye = DenseParams::new(
            Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            Tensor::zeros(&[2]),
        )
        .unwrap();
        assert_eq!(dense_forward(&[3.0, -4.0], &eye).unwrap(), vec![3.0, -4.0]);

        let p = DenseParams::new(
            Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap(),
            Tensor::from_vec(vec![0.5]).unwrap(),
        )
        .unwrap();
        assert_eq!(dense_forward(&[2.0, 3.0], &p).unwrap(), vec![5.5]);
        assert!(dense_forward(&[2.0], &p).is_err());
    }

    #[test]
    fn backward_hand_example() {
        let p = DenseParams::new(
            Tensor::new(vec![1, 2], vec![1.0, -2.0]).unwrap(),
            Tensor::zeros(&[1]),
        )
        .unwrap();
        let (dx, g) = dense_backward(&[3.0], &[2.0, 5.0], &p).unwrap();
        assert_eq!(dx, vec![3.0, -6.0]);
        assert_eq!(g.weights.data(), &[6.0, 15.0]);
        assert_eq!(g.bias.data(), &[3.0]);
    }
}
