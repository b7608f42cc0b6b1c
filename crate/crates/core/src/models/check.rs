//! Whole-model gradient verification at a random, kink-free point.

use crate::contour::{ClassLabel, PADDED_LEN};
use crate::engine::{grad_check, Tensor};
use crate::error::{Error, Result};
use crate::models::{ArchConfig, ModelBundle, Network};
use crate::rng::{Rng, Stream};

/// Minimum distance from any ReLU or max-pool kink at the check point.
pub const KINK_MARGIN: f64 = 1e-3;
const MAX_DRAWS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Coordinates checked per tensor; larger tensors are subsampled.
    pub max_coords: usize,
    /// Corrupt the first tensor's analytic gradient by 5% before comparing,
    /// to prove the check can fail.
    pub inject_fault: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-4,
            max_coords: 200,
            inject_fault: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub layer: &'static str,
    pub tensor: String,
    pub max_error: f64,
    pub checked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGradCheck {
    pub tensors: Vec<TensorCheck>,
}

impl ModelGradCheck {
    pub fn max_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_error).fold(0.0, f64::max)
    }

    /// Worst error per layer, in first-appearance order.
    pub fn layers(&self) -> Vec<(&'static str, f64)> {
        let mut out: Vec<(&'static str, f64)> = Vec::new();
        for t in &self.tensors {
            match out.iter_mut().find(|(l, _)| *l == t.layer) {
                Some((_, e)) => *e = e.max(t.max_error),
                None => out.push((t.layer, t.max_error)),
            }
        }
        out
    }
}

fn fill_uniform(t: &mut Tensor, bound: f64, rng: &mut Rng) {
    for v in t.data_mut() {
        *v = rng.uniform_range(-bound, bound);
    }
}

/// Draws a model and input. LSTM weights are redrawn from U(-0.5, 0.5).
/// ConvNet points use wide conv weights and inputs so that pre-activations
/// sit well away from zero, and are redrawn until the kink margin exceeds
/// [`KINK_MARGIN`].
fn check_point(arch: &ArchConfig, rng: &mut Rng) -> Result<(ModelBundle, Vec<f64>)> {
    let mut model = arch.build(rng)?;
    let draw_input = |rng: &mut Rng, bound: f64| -> Vec<f64> {
        (0..PADDED_LEN).map(|_| rng.uniform_range(-bound, bound)).collect()
    };
    match &mut model.network {
        Network::Lstm(net) => {
            // Wider than the training init so recurrent gradients are not
            // swamped by finite-difference rounding.
            for t in net.lstm.tensors_mut() {
                fill_uniform(t, 0.5, rng);
            }
            let input = draw_input(rng, 1.0);
            Ok((model, input))
        }
        Network::ConvNet(net) => {
            for _ in 0..MAX_DRAWS {
                fill_uniform(&mut net.conv.weights, 1.0, rng);
                fill_uniform(&mut net.conv.bias, 1.0, rng);
                let input = draw_input(rng, 2.0);
                if net.kink_margin(&input)? > KINK_MARGIN {
                    return Ok((model, input));
                }
            }
            Err(Error::Numeric(format!(
                "no kink-free check point found in {MAX_DRAWS} draws"
            )))
        }
    }
}

/// Compares backpropagated gradients of one sample's loss against central
/// differences for every parameter tensor of a model built from `arch`.
pub fn check_model_gradients(arch: &ArchConfig, seed: u64, options: &GradCheckOptions) -> Result<ModelGradCheck> {
    let mut rng = Rng::stream(seed, Stream::GradCheck, 0);
    let (model, input) = check_point(arch, &mut rng)?;
    let label = ClassLabel::ALL[rng.below(2) as usize];

    let (_, mut analytic) = model.forward_backward(&input, label)?;
    if options.inject_fault {
        analytic[0].scale(1.05);
    }
    let mut params: Vec<Tensor> = model.tensors().into_iter().cloned().collect();
    let mut probe = model.clone();
    let loss = |ts: &[Tensor]| -> Result<f64> {
        probe.set_tensors(ts)?;
        probe.loss(&input, label)
    };
    let report = grad_check(loss, &mut params, &analytic, options.eps, options.max_coords, &mut rng)?;

    let tensors = model
        .tensor_names()
        .into_iter()
        .zip(report.per_tensor.iter().zip(&report.checked))
        .map(|((layer, tensor), (&max_error, &checked))| TensorCheck {
            layer,
            tensor,
            max_error,
            checked,
        })
        .collect();
    Ok(ModelGradCheck { tensors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ConvNetConfig, LstmConfig};

    #[test]
    fn small_models_pass_and_faults_are_caught() {
        let convnet = ArchConfig::ConvNet(ConvNetConfig::default());
        let lstm = ArchConfig::Lstm(LstmConfig {
            hidden_size: 4,
            input_downsample: 64,
        });
        for arch in [convnet, lstm] {
            let ok = check_model_gradients(&arch, 1, &GradCheckOptions::default()).unwrap();
            assert!(ok.max_error() < 1e-5, "{ok:?}");
            let faulty = GradCheckOptions {
                inject_fault: true,
                ..GradCheckOptions::default()
            };
            let bad = check_model_gradients(&arch, 1, &faulty).unwrap();
            assert!(bad.max_error() > 1e-3);
        }
    }

    #[test]
    fn layers_aggregate_tensors() {
        let check = ModelGradCheck {
            tensors: vec![
                TensorCheck { layer: "conv", tensor: "a".into(), max_error: 1e-7, checked: 1 },
                TensorCheck { layer: "conv", tensor: "b".into(), max_error: 3e-7, checked: 1 },
                TensorCheck { layer: "dense", tensor: "c".into(), max_error: 2e-7, checked: 1 },
            ],
        };
        assert_eq!(check.layers(), vec![("conv", 3e-7), ("dense", 2e-7)]);
        assert_eq!(check.max_error(), 3e-7);
    }
}
