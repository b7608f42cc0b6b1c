//! Training protocol, evaluation and k-fold cross-validation.
//!
//! Training runs a fixed number of epochs and keeps the parameter snapshot
//! from the epoch with the lowest mean training loss (earliest on ties).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{split_kfold, ClassLabel, Dataset};
use crate::engine::{Optimizer, OptimizerKind, Tensor};
use crate::error::{Error, Result};
use crate::models::{classify, ArchConfig, ModelBundle};
use crate::rng::{derive_seed, Rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(with = "optimizer_token")]
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

mod optimizer_token {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::engine::OptimizerKind;

    pub fn serialize<S: Serializer>(kind: &OptimizerKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(kind.token())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<OptimizerKind, D::Error> {
        let token = String::deserialize(d)?;
        token.parse().map_err(serde::de::Error::custom)
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 18,
            batch_size: 32,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            seed: 42,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best: ModelBundle,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch of `best`.
    pub best_epoch: usize,
}

/// 1-based index of the smallest loss; the earliest wins ties.
pub fn select_best_epoch(losses: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &l) in losses.iter().enumerate() {
        if best.is_none_or(|(_, b)| l < b) {
            best = Some((i + 1, l));
        }
    }
    best.map(|(i, _)| i)
}

pub fn train(model: &ModelBundle, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(model, data, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_progress<F>(
    model: &ModelBundle,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochRecord),
{
    cfg.validate()?;
    if !data.has_both_classes() {
        return Err(Error::Dataset("training set must contain both classes".into()));
    }
    let mut current = model.clone();
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate)?;
    let samples = data.samples();
    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, Vec<Tensor>)> = None;

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            Rng::stream(cfg.seed, Stream::Batches, epoch as u64).shuffle(&mut order);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut acc: Option<Vec<Tensor>> = None;
            for &i in batch {
                let s = &samples[i];
                let (out, grads) = current.forward_backward(s.values(), s.label())?;
                if !out.loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss at epoch {epoch}, batch {}",
                        b + 1
                    )));
                }
                loss_sum += out.loss;
                if crate::models::label_from_probs([out.probs[0], out.probs[1]]) == s.label() {
                    correct += 1;
                }
                match acc.as_mut() {
                    None => acc = Some(grads),
                    Some(total) => {
                        for (t, g) in total.iter_mut().zip(&grads) {
                            t.add_scaled(g, 1.0)?;
                        }
                    }
                }
            }
            let mut grads = acc.expect("non-empty batch");
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| g.scale(scale));
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient at epoch {epoch}, batch {}",
                    b + 1
                )));
            }
            optimizer.step(&mut current.tensors_mut(), &grads)?;
        }
        let record = EpochRecord {
            epoch,
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
        };
        on_epoch(&record);
        if best.as_ref().is_none_or(|(_, l, _)| record.loss < *l) {
            let snapshot = current.tensors().into_iter().cloned().collect();
            best = Some((epoch, record.loss, snapshot));
        }
        history.push(record);
    }

    let (best_epoch, _, snapshot) = best.expect("at least one epoch");
    let mut best_model = model.clone();
    best_model.set_tensors(&snapshot)?;
    best_model.provenance.seed = cfg.seed;
    best_model.provenance.epochs = cfg.epochs;
    best_model.provenance.data_digest = data.digest();
    best_model.provenance.selected_epoch = Some(best_epoch);
    Ok(TrainOutcome {
        best: best_model,
        history,
        best_epoch,
    })
}

/// Confusion counts with rows = true label, columns = predicted label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion(pub [[usize; 2]; 2]);

impl Confusion {
    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        self.0[0][0] + self.0[1][1]
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    /// Share of `label` samples predicted as `label`; `None` if there are none.
    pub fn recall(&self, label: ClassLabel) -> Option<f64> {
        let row = self.0[label.index()];
        let n = row[0] + row[1];
        (n > 0).then(|| row[label.index()] as f64 / n as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: Confusion,
}

pub fn evaluate(model: &ModelBundle, test: &Dataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Dataset("empty test set".into()));
    }
    let mut counts = [[0usize; 2]; 2];
    for s in test.samples() {
        let predicted = classify(model, s)?;
        counts[s.label().index()][predicted.index()] += 1;
    }
    let confusion = Confusion(counts);
    Ok(EvalReport {
        accuracy: confusion.accuracy(),
        confusion,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile at probability `p` of sorted values: the order statistic at
/// 1-based position `1 + (n - 1) p`, interpolating linearly between neighbors.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

pub fn summarize(values: &[f64]) -> Result<FiveNumberSummary> {
    if values.is_empty() {
        return Err(Error::Config("cannot summarize an empty list".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in summary input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(FiveNumberSummary {
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    /// 0-based.
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub accuracy: f64,
    pub selected_epoch: usize,
    pub selected_loss: f64,
    pub confusion: Confusion,
    pub model_seed: u64,
    pub shuffle_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub accuracies: Vec<f64>,
    pub summary: FiveNumberSummary,
}

/// Everything `cross_validate` produces; serializes as the CV report file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub k: usize,
    pub n_samples: usize,
    pub data_digest: String,
    pub fold_sizes: Vec<usize>,
    pub folds: Vec<FoldReport>,
    pub summary: CvSummary,
}

impl CvReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("cv report: {e}")))
    }
}

fn run_fold(
    arch: &ArchConfig,
    data: &Dataset,
    split: &crate::contour::FoldSplit,
    fold: usize,
    cfg: &TrainConfig,
) -> Result<FoldReport> {
    let model_seed = derive_seed(cfg.seed, Stream::Init, fold as u64);
    let shuffle_seed = derive_seed(cfg.seed, Stream::Batches, fold as u64);
    let train_set = data.subset(&split.train_indices(fold))?;
    let test_set = data.subset(split.test_indices(fold))?;
    let model = arch.build(&mut Rng::new(model_seed))?;
    let fold_cfg = TrainConfig {
        seed: shuffle_seed,
        ..*cfg
    };
    let outcome = train(&model, &train_set, &fold_cfg)?;
    let eval = evaluate(&outcome.best, &test_set)?;
    Ok(FoldReport {
        fold,
        train_size: train_set.len(),
        test_size: test_set.len(),
        accuracy: eval.accuracy,
        selected_epoch: outcome.best_epoch,
        selected_loss: outcome.history[outcome.best_epoch - 1].loss,
        confusion: eval.confusion,
        model_seed,
        shuffle_seed,
    })
}

/// k-fold cross-validation: each fold trains a freshly initialized model on
/// the other folds and tests on itself. `jobs > 1` runs folds on a thread
/// pool; the report does not depend on it.
pub fn cross_validate(
    arch: &ArchConfig,
    data: &Dataset,
    k: usize,
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<CvReport> {
    cfg.validate()?;
    let split = split_kfold(data.len(), k, cfg.seed)?;
    let folds: Vec<FoldReport> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..k)
                .into_par_iter()
                .map(|i| run_fold(arch, data, &split, i, cfg))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        (0..k)
            .map(|i| run_fold(arch, data, &split, i, cfg))
            .collect::<Result<Vec<_>>>()?
    };
    let accuracies: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let summary = summarize(&accuracies)?;
    Ok(CvReport {
        arch: *arch,
        train: *cfg,
        k,
        n_samples: data.len(),
        data_digest: data.digest(),
        fold_sizes: split.sizes(),
        folds,
        summary: CvSummary {
            accuracies,
            summary,
        },
    })
}

/// One shuffled train/test split with `test_fraction` of the data held out;
/// used for single-split runs such as the LSTM experiment.
pub fn holdout_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let n = data.len();
    let n_test = ((n as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::Dataset("split leaves an empty side".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::stream(seed, Stream::Folds, u64::MAX).shuffle(&mut order);
    let (test, train) = order.split_at(n_test);
    Ok((data.subset(train)?, data.subset(test)?))
}
