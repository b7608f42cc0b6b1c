//! k-fold cross-validation with a five-number summary of fold accuracies.
//! The report is identical for any number of jobs.

use prosody_nn::contour::PipelineOptions;
use prosody_nn::models::{ArchConfig, ArchTag};
use prosody_nn::synth::{synth_dataset, SynthConfig};
use prosody_nn::training::{cross_validate, TrainConfig};

fn main() -> prosody_nn::Result<()> {
    let data = synth_dataset(
        &SynthConfig {
            n_statements: 300,
            n_questions: 420,
            ..SynthConfig::default()
        },
        &PipelineOptions::default(),
    )?;
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = cross_validate(&ArchConfig::default_for(ArchTag::ConvNet), &data, 5, &cfg, jobs)?;

    for f in &report.folds {
        println!(
            "fold {}: {} test samples, accuracy {:.4}, kept epoch {}",
            f.fold + 1,
            f.test_size,
            f.accuracy,
            f.selected_epoch
        );
    }
    let s = report.summary.summary;
    println!("Min. {:.4}  1st Qu. {:.4}  Median {:.4}  3rd Qu. {:.4}  Max. {:.4}", s.min, s.q1, s.median, s.q3, s.max);
    Ok(())
}
