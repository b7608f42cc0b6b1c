use crate::engine::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn token(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Plain SGD or bias-corrected Adam. Moment buffers are created lazily on the
/// first step, shaped like the parameters they track.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !learning_rate.is_finite() || learning_rate <= 0.0 {
            return Err(Error::Config(format!("learning rate must be > 0, got {learning_rate}")));
        }
        Ok(Optimizer {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Optimizer::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Result<Self> {
        Optimizer::new(OptimizerKind::Adam, learning_rate)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if !p.same_shape(g) {
                return Err(Error::Shape(format!(
                    "parameter {:?} vs gradient {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    p.add_scaled(g, -self.learning_rate)?;
                }
            }
            OptimizerKind::Adam => {
                if self.first_moment.is_empty() {
                    self.first_moment = grads.iter().map(Tensor::zeros_like).collect();
                    self.second_moment = grads.iter().map(Tensor::zeros_like).collect();
                } else if self.first_moment.len() != grads.len()
                    || self.first_moment.iter().zip(grads).any(|(m, g)| !m.same_shape(g))
                {
                    return Err(Error::Shape("gradients changed shape between steps".into()));
                }
                self.step += 1;
                let t = self.step as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
                {
                    let pd = p.data_mut();
                    for (((theta, &gi), mi), vi) in pd
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                        *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *theta -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                    }
                }
                return Ok(());
            }
        }
        self.step += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::from_vec(vec![v]).unwrap()
    }

    #[test]
    fn sgd_step() {
        let mut theta = scalar(1.0);
        Optimizer::sgd(0.1).unwrap().step(&mut [&mut theta], &[scalar(2.0)]).unwrap();
        assert!((theta.data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        for g in [1e-3, 0.5, -3.0, 250.0] {
            let mut theta = scalar(0.0);
            let mut opt = Optimizer::adam(0.01).unwrap();
            opt.step(&mut [&mut theta], &[scalar(g)]).unwrap();
            let delta = theta.data()[0].abs();
            assert!(delta <= 0.01 && (delta - 0.01).abs() < 1e-6, "g={g} delta={delta}");
            assert_eq!(theta.data()[0].signum(), -g.signum());
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut theta = Tensor::from_vec(vec![0.3, -1.5]).unwrap();
            let before = theta.clone();
            let mut opt = Optimizer::new(kind, 0.1).unwrap();
            for _ in 0..3 {
                opt.step(&mut [&mut theta], &[Tensor::zeros(&[2])]).unwrap();
            }
            assert_eq!(theta, before);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut theta = scalar(1.0);
        let mut opt = Optimizer::adam(0.1).unwrap();
        assert!(opt.step(&mut [&mut theta], &[Tensor::zeros(&[2])]).is_err());
        assert!(opt.step(&mut [&mut theta], &[]).is_err());
        assert!(Optimizer::sgd(0.0).is_err());
    }
}
