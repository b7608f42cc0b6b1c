//! The two classifier architectures, inference, and model files.

mod check;
mod convnet;
mod format;
mod lstm;

use serde::{Deserialize, Serialize};

pub use check::{check_model_gradients, GradCheckOptions, ModelGradCheck, TensorCheck, KINK_MARGIN};
pub use convnet::{ConvNet, ConvNetConfig, ConvNetDims};
pub use format::{load_model, load_model_file, save_model, save_model_file, FORMAT_VERSION, MAGIC};
pub use lstm::{LstmConfig, LstmNet};

use crate::contour::{ClassLabel, PaddedSample, PADDED_LEN};
use crate::engine::{softmax, softmax_cross_entropy, LossOutput, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArchTag {
    ConvNet,
    Lstm,
}

impl ArchTag {
    pub fn token(self) -> &'static str {
        match self {
            ArchTag::ConvNet => "convnet",
            ArchTag::Lstm => "lstm",
        }
    }

    pub(crate) fn byte(self) -> u8 {
        match self {
            ArchTag::ConvNet => 0,
            ArchTag::Lstm => 1,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(ArchTag::ConvNet),
            1 => Some(ArchTag::Lstm),
            _ => None,
        }
    }
}

impl std::str::FromStr for ArchTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convnet" => Ok(ArchTag::ConvNet),
            "lstm" => Ok(ArchTag::Lstm),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

/// An architecture together with its hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "lowercase")]
pub enum ArchConfig {
    ConvNet(ConvNetConfig),
    Lstm(LstmConfig),
}

impl ArchConfig {
    pub fn tag(&self) -> ArchTag {
        match self {
            ArchConfig::ConvNet(_) => ArchTag::ConvNet,
            ArchConfig::Lstm(_) => ArchTag::Lstm,
        }
    }

    pub fn default_for(tag: ArchTag) -> Self {
        match tag {
            ArchTag::ConvNet => ArchConfig::ConvNet(ConvNetConfig::default()),
            ArchTag::Lstm => ArchConfig::Lstm(LstmConfig::default()),
        }
    }

    pub fn build(&self, rng: &mut Rng) -> Result<ModelBundle> {
        match self {
            ArchConfig::ConvNet(cfg) => build_convnet(*cfg, rng),
            ArchConfig::Lstm(cfg) => build_lstm(*cfg, rng),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Network {
    ConvNet(ConvNet),
    Lstm(LstmNet),
}

/// Where a set of weights came from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub epochs: usize,
    pub data_digest: String,
    /// 1-based epoch whose snapshot was kept, if trained.
    pub selected_epoch: Option<usize>,
}

/// Architecture, parameters and provenance: the unit of training output.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub network: Network,
    pub provenance: Provenance,
}

pub fn build_convnet(config: ConvNetConfig, rng: &mut Rng) -> Result<ModelBundle> {
    Ok(ModelBundle {
        network: Network::ConvNet(ConvNet::new(config, rng)?),
        provenance: Provenance::default(),
    })
}

pub fn build_lstm(config: LstmConfig, rng: &mut Rng) -> Result<ModelBundle> {
    Ok(ModelBundle {
        network: Network::Lstm(LstmNet::new(config, rng)?),
        provenance: Provenance::default(),
    })
}

/// Activations kept between [`ModelBundle::forward_backward`] halves.
enum Cache {
    ConvNet(convnet::ConvNetCache),
    Lstm(lstm::LstmNetCache),
}

fn check_input(input: &[f64]) -> Result<()> {
    if input.len() != PADDED_LEN {
        return Err(Error::Shape(format!(
            "model input has {} frames, expected {PADDED_LEN}",
            input.len()
        )));
    }
    Ok(())
}

impl ModelBundle {
    pub fn arch(&self) -> ArchTag {
        match self.network {
            Network::ConvNet(_) => ArchTag::ConvNet,
            Network::Lstm(_) => ArchTag::Lstm,
        }
    }

    pub fn arch_config(&self) -> ArchConfig {
        match &self.network {
            Network::ConvNet(n) => ArchConfig::ConvNet(n.config),
            Network::Lstm(n) => ArchConfig::Lstm(n.config),
        }
    }

    pub fn as_convnet(&self) -> Option<&ConvNet> {
        match &self.network {
            Network::ConvNet(n) => Some(n),
            Network::Lstm(_) => None,
        }
    }

    pub fn as_lstm(&self) -> Option<&LstmNet> {
        match &self.network {
            Network::Lstm(n) => Some(n),
            Network::ConvNet(_) => None,
        }
    }

    /// Parameter tensors in declaration (and file) order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        match &self.network {
            Network::ConvNet(n) => n.tensors(),
            Network::Lstm(n) => n.tensors(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match &mut self.network {
            Network::ConvNet(n) => n.tensors_mut(),
            Network::Lstm(n) => n.tensors_mut(),
        }
    }

    /// `(layer, tensor)` names aligned with [`ModelBundle::tensors`].
    pub fn tensor_names(&self) -> Vec<(&'static str, String)> {
        match &self.network {
            Network::ConvNet(_) => vec![
                ("conv", "conv.weights".into()),
                ("conv", "conv.bias".into()),
                ("dense", "dense.weights".into()),
                ("dense", "dense.bias".into()),
            ],
            Network::Lstm(_) => {
                let mut names = Vec::new();
                for g in crate::engine::Gate::ALL {
                    for part in ["W", "U", "b"] {
                        names.push(("lstm", format!("lstm.{}.{part}", g.name())));
                    }
                }
                names.push(("dense", "dense.weights".into()));
                names.push(("dense", "dense.bias".into()));
                names
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Replaces every parameter, keeping the architecture.
    pub fn set_tensors(&mut self, values: &[Tensor]) -> Result<()> {
        let mut targets = self.tensors_mut();
        if targets.len() != values.len() || targets.iter().zip(values).any(|(t, v)| !t.same_shape(v)) {
            return Err(Error::Shape("replacement tensors do not match the model".into()));
        }
        for (t, v) in targets.iter_mut().zip(values) {
            t.data_mut().copy_from_slice(v.data());
        }
        Ok(())
    }

    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_input(input)?;
        let logits = match &self.network {
            Network::ConvNet(n) => n.forward(input)?.0,
            Network::Lstm(n) => n.logits(input)?,
        };
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::Numeric(format!("non-finite logits {logits:?}")));
        }
        Ok(logits)
    }

    fn forward_cached(&self, input: &[f64]) -> Result<(Vec<f64>, Cache)> {
        check_input(input)?;
        Ok(match &self.network {
            Network::ConvNet(n) => {
                let (l, c) = n.forward(input)?;
                (l, Cache::ConvNet(c))
            }
            Network::Lstm(n) => {
                let (l, c) = n.forward(input)?;
                (l, Cache::Lstm(c))
            }
        })
    }

    /// Cross-entropy loss of one sample and its gradient for every tensor.
    pub fn forward_backward(&self, input: &[f64], label: ClassLabel) -> Result<(LossOutput, Vec<Tensor>)> {
        let (logits, cache) = self.forward_cached(input)?;
        let out = softmax_cross_entropy(&logits, label)?;
        let grads = match (&self.network, &cache) {
            (Network::ConvNet(n), Cache::ConvNet(c)) => n.backward(&out.dlogits, c)?,
            (Network::Lstm(n), Cache::Lstm(c)) => n.backward(&out.dlogits, c)?,
            _ => unreachable!("cache built from the same network"),
        };
        Ok((out, grads))
    }

    pub fn loss(&self, input: &[f64], label: ClassLabel) -> Result<f64> {
        Ok(softmax_cross_entropy(&self.logits(input)?, label)?.loss)
    }
}

/// `[p_statement, p_question]`.
pub fn predict(model: &ModelBundle, sample: &PaddedSample) -> Result<[f64; 2]> {
    predict_values(model, sample.values())
}

pub fn predict_values(model: &ModelBundle, values: &[f64]) -> Result<[f64; 2]> {
    let p = softmax(&model.logits(values)?);
    Ok([p[0], p[1]])
}

/// Argmax of the class probabilities; ties go to `Statement`.
pub fn label_from_probs(probs: [f64; 2]) -> ClassLabel {
    if probs[1] > probs[0] {
        ClassLabel::WhQuestion
    } else {
        ClassLabel::Statement
    }
}

pub fn classify(model: &ModelBundle, sample: &PaddedSample) -> Result<ClassLabel> {
    Ok(label_from_probs(predict(model, sample)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(values: Vec<f64>) -> PaddedSample {
        PaddedSample::new(values, PADDED_LEN, ClassLabel::Statement, "t").unwrap()
    }

    #[test]
    fn default_convnet_shapes() {
        let dims = ConvNetConfig::default().dims().unwrap();
        assert_eq!(dims.conv_len, 249);
        assert_eq!(dims.pool_len, 62);
        assert_eq!(dims.dense_in, 372);
        let m = build_convnet(ConvNetConfig::default(), &mut Rng::new(1)).unwrap();
        assert_eq!(m.tensors()[0].shape(), &[6, 1, 32]);
        assert_eq!(m.param_count(), 944);
    }

    #[test]
    fn oversized_kernel_is_rejected() {
        let cfg = ConvNetConfig {
            kernel_len: 1025,
            ..Default::default()
        };
        assert!(matches!(build_convnet(cfg, &mut Rng::new(1)), Err(Error::Config(_))));
    }

    #[test]
    fn builds_are_seed_deterministic() {
        for cfg in [ArchConfig::ConvNet(Default::default()), ArchConfig::Lstm(Default::default())] {
            let a = cfg.build(&mut Rng::new(5)).unwrap();
            let b = cfg.build(&mut Rng::new(5)).unwrap();
            let c = cfg.build(&mut Rng::new(6)).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn lstm_shapes() {
        let m = build_lstm(LstmConfig::default(), &mut Rng::new(2)).unwrap();
        let lstm = m.as_lstm().unwrap().lstm();
        for g in crate::engine::Gate::ALL {
            assert_eq!(lstm.gate(g).w.shape(), &[32, 1]);
            assert_eq!(lstm.gate(g).u.shape(), &[32, 32]);
        }
        assert!(lstm.gate(crate::engine::Gate::Forget).b.data().iter().all(|&b| b == 1.0));
        let cfg = LstmConfig {
            input_downsample: 4,
            ..Default::default()
        };
        assert_eq!(cfg.steps(), 256);
        assert!(LstmConfig { hidden_size: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zero_weights_predict_half() {
        let mut m = build_convnet(ConvNetConfig::default(), &mut Rng::new(3)).unwrap();
        m.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        assert_eq!(predict(&m, &sample(vec![0.4; PADDED_LEN])).unwrap(), [0.5, 0.5]);
    }

    #[test]
    fn classify_tie_and_argmax() {
        assert_eq!(label_from_probs([0.9, 0.1]), ClassLabel::Statement);
        assert_eq!(label_from_probs([0.5, 0.5]), ClassLabel::Statement);
        assert_eq!(label_from_probs([0.2, 0.8]), ClassLabel::WhQuestion);
    }

    #[test]
    fn wrong_input_length() {
        let m = build_convnet(ConvNetConfig::default(), &mut Rng::new(3)).unwrap();
        assert!(matches!(m.logits(&[0.0; 10]), Err(Error::Shape(_))));
    }
}
