use crate::engine::Tensor;
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct ReluCache {
    input: Tensor,
}

pub fn relu(x: &Tensor) -> (Tensor, ReluCache) {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    (y, ReluCache { input: x.clone() })
}

/// Passes `dy` where the forward input was strictly positive.
pub fn relu_backward(dy: &Tensor, cache: &ReluCache) -> Result<Tensor> {
    dy.expect_shape(cache.input.shape(), "relu backward")?;
    let mut dx = dy.clone();
    for (d, &x) in dx.data_mut().iter_mut().zip(cache.input.data()) {
        if x <= 0.0 {
            *d = 0.0;
        }
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_and_backward() {
        let (y, _) = relu(&Tensor::from_vec(vec![-1.0, 0.0, 2.0]).unwrap());
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);

        let (_, cache) = relu(&Tensor::from_vec(vec![-1.0, 2.0]).unwrap());
        let dx = relu_backward(&Tensor::from_vec(vec![5.0, 5.0]).unwrap(), &cache).unwrap();
        assert_eq!(dx.data(), &[0.0, 5.0]);
        assert!(relu_backward(&Tensor::zeros(&[3]), &cache).is_err());
    }
}
