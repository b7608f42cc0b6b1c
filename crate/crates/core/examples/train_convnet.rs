//! Train the default ConvNet, keep the lowest-loss epoch, evaluate it and
//! save it as a `.pcnm` file.

use prosody_nn::contour::PipelineOptions;
use prosody_nn::models::{load_model_file, save_model_file, ArchConfig, ArchTag};
use prosody_nn::rng::Rng;
use prosody_nn::synth::{synth_dataset, SynthConfig};
use prosody_nn::training::{evaluate, holdout_split, train_with_progress, TrainConfig};

fn main() -> prosody_nn::Result<()> {
    let data = synth_dataset(&SynthConfig::default(), &PipelineOptions::default())?;
    let (train_set, test_set) = holdout_split(&data, 0.2, 1)?;

    let model = ArchConfig::default_for(ArchTag::ConvNet).build(&mut Rng::new(42))?;
    println!("{} parameters", model.param_count());
    let outcome = train_with_progress(&model, &train_set, &TrainConfig::default(), |r| {
        println!("epoch {:>2}  loss {:.4}  accuracy {:.4}", r.epoch, r.loss, r.accuracy);
    })?;
    println!("kept epoch {}", outcome.best_epoch);

    let report = evaluate(&outcome.best, &test_set)?;
    println!("held-out accuracy {:.4}", report.accuracy);
    println!("confusion {:?}", report.confusion.0);

    let path = std::env::temp_dir().join("convnet.pcnm");
    save_model_file(&outcome.best, &path)?;
    let reloaded = load_model_file(&path)?;
    assert_eq!(reloaded, outcome.best);
    println!("saved {}", path.display());
    Ok(())
}
