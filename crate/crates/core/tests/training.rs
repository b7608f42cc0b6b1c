use proptest::prelude::*;
use prosody_nn::contour::{ClassLabel, Dataset, PipelineOptions};
use prosody_nn::engine::OptimizerKind;
use prosody_nn::models::*;
use prosody_nn::rng::Rng;
use prosody_nn::synth::{synth_dataset, NoiseLevel, SynthConfig};
use prosody_nn::training::*;

fn corpus(n_stmt: usize, n_q: usize, noise: NoiseLevel, seed: u64) -> Dataset {
    let cfg = SynthConfig {
        n_statements: n_stmt,
        n_questions: n_q,
        seed,
        noise_level: noise,
        ..SynthConfig::default()
    };
    synth_dataset(&cfg, &PipelineOptions::default()).unwrap()
}

fn same_params(a: &ModelBundle, b: &ModelBundle) -> bool {
    a.tensors()
        .iter()
        .zip(b.tensors())
        .all(|(x, y)| x.data().iter().zip(y.data()).all(|(u, v)| u.to_bits() == v.to_bits()))
}

#[test]
fn default_history_has_eighteen_records_and_selection_is_minimal() {
    let data = corpus(30, 40, NoiseLevel::Moderate, 5);
    let model = build_convnet(ConvNetConfig::default(), &mut Rng::new(1)).unwrap();
    let out = train(&model, &data, &TrainConfig::default()).unwrap();
    assert_eq!(out.history.len(), 18);
    assert!(out.history.iter().enumerate().all(|(i, r)| r.epoch == i + 1));
    let kept = out.history[out.best_epoch - 1].loss;
    assert!(out.history.iter().all(|r| kept <= r.loss));
    assert!(out.history[..out.best_epoch - 1].iter().all(|r| kept < r.loss));
    assert_eq!(out.best.provenance.selected_epoch, Some(out.best_epoch));
    assert_eq!(out.best.provenance.epochs, 18);
    assert_eq!(out.best.provenance.data_digest, data.digest());
}

#[test]
fn kept_snapshot_equals_a_run_stopped_at_that_epoch() {
    let data = corpus(20, 25, NoiseLevel::Moderate, 6);
    let model = build_convnet(ConvNetConfig::default(), &mut Rng::new(2)).unwrap();
    let cfg = TrainConfig { epochs: 8, ..TrainConfig::default() };
    let full = train(&model, &data, &cfg).unwrap();
    let short_cfg = TrainConfig { epochs: full.best_epoch, ..cfg };
    let short = train(&model, &data, &short_cfg).unwrap();
    assert_eq!(short.best_epoch, full.best_epoch);
    assert!(same_params(&short.best, &full.best));
    assert_eq!(&full.history[..full.best_epoch], &short.history[..]);
}

#[test]
fn training_is_deterministic() {
    let data = corpus(15, 15, NoiseLevel::Low, 7);
    for arch in [
        ArchConfig::ConvNet(ConvNetConfig::default()),
        ArchConfig::Lstm(LstmConfig { hidden_size: 4, input_downsample: 16 }),
    ] {
        let model = arch.build(&mut Rng::new(3)).unwrap();
        let cfg = TrainConfig { epochs: 3, batch_size: 7, ..TrainConfig::default() };
        let a = train(&model, &data, &cfg).unwrap();
        let b = train(&model, &data, &cfg).unwrap();
        assert!(same_params(&a.best, &b.best));
        assert_eq!(a.history, b.history);
        let c = train(&model, &data, &TrainConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.history, c.history);
    }
}

#[test]
fn sgd_and_unshuffled_runs_work() {
    let data = corpus(10, 10, NoiseLevel::Low, 8);
    let model = build_convnet(ConvNetConfig::default(), &mut Rng::new(4)).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        optimizer: OptimizerKind::Sgd,
        learning_rate: 0.05,
        shuffle: false,
        ..TrainConfig::default()
    };
    let out = train(&model, &data, &cfg).unwrap();
    assert_eq!(out.history.len(), 2);
    assert!(out.history.iter().all(|r| r.loss.is_finite()));
}

#[test]
fn bad_configs_and_one_class_data_are_rejected() {
    let data = corpus(5, 5, NoiseLevel::Zero, 9);
    let model = build_convnet(ConvNetConfig::default(), &mut Rng::new(5)).unwrap();
    for cfg in [
        TrainConfig { epochs: 0, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { learning_rate: -1.0, ..TrainConfig::default() },
    ] {
        assert!(train(&model, &data, &cfg).is_err());
    }
    let statements = data.subset(&[0, 1, 2]).unwrap();
    assert!(train(&model, &statements, &TrainConfig::default()).is_err());
}

#[test]
fn convnet_fits_a_noise_free_corpus() {
    let data = synth_dataset(
        &SynthConfig { noise_level: NoiseLevel::Zero, ..SynthConfig::default() },
        &PipelineOptions::default(),
    )
    .unwrap();
    let model = build_convnet(ConvNetConfig::default(), &mut Rng::new(6)).unwrap();
    let out = train(&model, &data, &TrainConfig::default()).unwrap();
    let acc = evaluate(&out.best, &data).unwrap().accuracy;
    assert!(acc >= 0.99, "training accuracy {acc}");
}

#[test]
fn constant_classifier_scores_the_class_share() {
    let data = synth_dataset(&SynthConfig::default(), &PipelineOptions::default()).unwrap();
    assert_eq!(data.class_counts(), [1966, 2860]);
    let mut model = build_convnet(ConvNetConfig::default(), &mut Rng::new(7)).unwrap();
    for t in model.tensors_mut() {
        t.fill(0.0);
    }
    let n = model.tensors().len();
    model.tensors_mut()[n - 1].data_mut()[0] = 1.0;
    let report = evaluate(&model, &data).unwrap();
    assert_eq!(report.accuracy, 1966.0 / 4826.0);
    assert_eq!(report.confusion.0, [[1966, 0], [2860, 0]]);
    assert_eq!(report.confusion.recall(ClassLabel::Statement), Some(1.0));
    assert_eq!(report.confusion.recall(ClassLabel::WhQuestion), Some(0.0));
}

#[test]
fn cross_validation_partitions_and_is_job_independent() {
    let data = corpus(23, 30, NoiseLevel::Moderate, 11);
    let arch = ArchConfig::ConvNet(ConvNetConfig::default());
    let cfg = TrainConfig { epochs: 2, ..TrainConfig::default() };
    let serial = cross_validate(&arch, &data, 5, &cfg, 1).unwrap();
    let parallel = cross_validate(&arch, &data, 5, &cfg, 3).unwrap();
    assert_eq!(serial.to_json(), parallel.to_json());

    assert_eq!(serial.fold_sizes, vec![11, 11, 11, 10, 10]);
    assert_eq!(serial.folds.len(), 5);
    for (i, f) in serial.folds.iter().enumerate() {
        assert_eq!(f.fold, i);
        assert_eq!(f.train_size + f.test_size, 53);
        assert_eq!(f.confusion.total(), f.test_size);
        assert_eq!(f.accuracy, f.confusion.accuracy());
    }
    let seeds: std::collections::BTreeSet<u64> = serial.folds.iter().map(|f| f.model_seed).collect();
    assert_eq!(seeds.len(), 5);
    assert_eq!(CvReport::from_json(&serial.to_json()).unwrap(), serial);
}

#[test]
fn holdout_split_sizes() {
    let data = corpus(40, 60, NoiseLevel::Zero, 12);
    let (train_set, test_set) = holdout_split(&data, 0.1, 42).unwrap();
    assert_eq!((train_set.len(), test_set.len()), (90, 10));
    let (a, _) = holdout_split(&data, 0.1, 42).unwrap();
    assert_eq!(a.digest(), train_set.digest());
    assert!(holdout_split(&data, 0.0, 42).is_err());
    assert!(holdout_split(&data, 1.0, 42).is_err());
}

/// Type-7 quantile written from the textbook formula
/// `Q(p) = x[j] + g (x[j+1] - x[j])`, `h = (n-1) p`, `j = floor(h)`, `g = h - j`.
fn quantile_oracle(values: &[f64], p: f64) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (x.len() as f64 - 1.0) * p;
    let j = h.floor() as usize;
    let g = h - h.floor();
    let upper = x[(j + 1).min(x.len() - 1)];
    x[j] + g * (upper - x[j])
}

proptest! {
    #[test]
    fn summary_matches_quantile_oracle(values in prop::collection::vec(0.0f64..1.0, 1..40)) {
        let s = summarize(&values).unwrap();
        prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
        for (got, p) in [(s.min, 0.0), (s.q1, 0.25), (s.median, 0.5), (s.q3, 0.75), (s.max, 1.0)] {
            prop_assert!((got - quantile_oracle(&values, p)).abs() <= 1e-12);
        }
        let mut reversed = values.clone();
        reversed.reverse();
        prop_assert_eq!(summarize(&reversed).unwrap(), s);
    }

    #[test]
    fn constant_lists_summarize_to_the_constant(v in 0.0f64..1.0, n in 1usize..20) {
        let s = summarize(&vec![v; n]).unwrap();
        prop_assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (v, v, v, v, v));
    }
}

#[test]
fn summary_examples() {
    let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
    assert!(summarize(&[]).is_err());
    assert!(summarize(&[f64::NAN]).is_err());
}
