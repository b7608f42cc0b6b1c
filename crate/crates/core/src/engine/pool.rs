use crate::engine::Tensor;
use crate::error::{Error, Result};

/// Output length of a window/stride max pool, `None` if the window does not fit.
pub fn pool_output_len(len: usize, window: usize, stride: usize) -> Option<usize> {
    if window == 0 || stride == 0 || len < window {
        None
    } else {
        Some((len - window) / stride + 1)
    }
}

#[derive(Clone, Debug)]
pub struct PoolCache {
    input_shape: Vec<usize>,
    /// Flat input index of each output's winner.
    winners: Vec<usize>,
}

impl PoolCache {
    /// Winning position within each channel, per output element.
    pub fn winner_positions(&self) -> Vec<usize> {
        let len = self.input_shape[1];
        self.winners.iter().map(|w| w % len).collect()
    }
}

/// Max pool over `[C, L]`; ties go to the lowest index.
pub fn maxpool1d_forward(x: &Tensor, window: usize, stride: usize) -> Result<(Tensor, PoolCache)> {
    if x.shape().len() != 2 {
        return Err(Error::Shape(format!("pool input must be [C, L], got {:?}", x.shape())));
    }
    let (channels, len) = (x.shape()[0], x.shape()[1]);
    let l_out = pool_output_len(len, window, stride)
        .ok_or_else(|| Error::Shape(format!("pool window {window} exceeds length {len}")))?;
    let xs = x.data();
    let mut y = Vec::with_capacity(channels * l_out);
    let mut winners = Vec::with_capacity(channels * l_out);
    for c in 0..channels {
        for t in 0..l_out {
            let start = c * len + t * stride;
            let mut best = start;
            for i in start + 1..start + window {
                if xs[i] > xs[best] {
                    best = i;
                }
            }
            y.push(xs[best]);
            winners.push(best);
        }
    }
    Ok((
        Tensor::new(vec![channels, l_out], y)?,
        PoolCache {
            input_shape: x.shape().to_vec(),
            winners,
        },
    ))
}

pub fn maxpool1d_backward(dy: &Tensor, cache: &PoolCache) -> Result<Tensor> {
    if dy.len() != cache.winners.len() || dy.shape()[0] != cache.input_shape[0] {
        return Err(Error::Shape(format!(
            "pool backward dy {:?} does not match forward output",
            dy.shape()
        )));
    }
    let mut dx = Tensor::zeros(&cache.input_shape);
    let d = dx.data_mut();
    for (&w, &g) in cache.winners.iter().zip(dy.data()) {
        d[w] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let x = Tensor::new(vec![1, 4], vec![1.0, 3.0, 2.0, 0.0]).unwrap();
        let (y, cache) = maxpool1d_forward(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[3.0, 2.0]);
        assert_eq!(cache.winner_positions(), vec![1, 2]);
        let dx = maxpool1d_backward(&Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap(), &cache).unwrap();
        assert_eq!(dx.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let x = Tensor::new(vec![2, 6], vec![7.0; 12]).unwrap();
        let (_, cache) = maxpool1d_forward(&x, 3, 3).unwrap();
        assert_eq!(cache.winner_positions(), vec![0, 3, 0, 3]);
    }

    #[test]
    fn window_too_large() {
        let x = Tensor::zeros(&[1, 3]);
        assert!(maxpool1d_forward(&x, 4, 1).is_err());
    }

    #[test]
    fn overlapping_windows_accumulate() {
        let x = Tensor::new(vec![1, 3], vec![0.0, 5.0, 1.0]).unwrap();
        let (y, cache) = maxpool1d_forward(&x, 2, 1).unwrap();
        assert_eq!(y.data(), &[5.0, 5.0]);
        let dx = maxpool1d_backward(&Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap(), &cache).unwrap();
        assert_eq!(dx.data(), &[0.0, 3.0, 0.0]);
    }
}
