//! Train the LSTM classifier on a single 90/10 split.
//!
//! At one frame per step the LSTM unrolls over 1024 steps, most of them
//! padding, and learns very little. Feeding every 32nd frame (32 steps)
//! trains in seconds and does much better. Pass a downsampling factor as
//! the first argument to compare.

use prosody_nn::contour::PipelineOptions;
use prosody_nn::models::{ArchConfig, LstmConfig};
use prosody_nn::rng::Rng;
use prosody_nn::synth::{synth_dataset, SynthConfig};
use prosody_nn::training::{evaluate, holdout_split, train, TrainConfig};

fn main() -> prosody_nn::Result<()> {
    let downsample = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(32);
    let data = synth_dataset(&SynthConfig::default(), &PipelineOptions::default())?;
    let (train_set, test_set) = holdout_split(&data, 0.1, 42)?;

    let arch = ArchConfig::Lstm(LstmConfig {
        input_downsample: downsample,
        ..LstmConfig::default()
    });
    let model = arch.build(&mut Rng::new(42))?;
    let outcome = train(&model, &train_set, &TrainConfig::default())?;
    for r in &outcome.history {
        println!("epoch {:>2}  loss {:.4}  accuracy {:.4}", r.epoch, r.loss, r.accuracy);
    }
    let report = evaluate(&outcome.best, &test_set)?;
    println!(
        "downsample {downsample}: kept epoch {}, test accuracy {:.4} on {} samples",
        outcome.best_epoch,
        report.accuracy,
        test_set.len()
    );
    Ok(())
}
