//! Train a ConvNet briefly, then export its filters (CSV and SVG) and plot
//! one contour of each class.

use std::path::Path;

use prosody_nn::contour::PipelineOptions;
use prosody_nn::models::{ArchConfig, ArchTag};
use prosody_nn::plot::{contour_svg, filters_csv, filters_svg};
use prosody_nn::rng::Rng;
use prosody_nn::synth::{generate_contours, synth_dataset, SynthConfig};
use prosody_nn::training::{train, TrainConfig};
use prosody_nn::Error;

fn write(path: &Path, text: &str) -> prosody_nn::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> prosody_nn::Result<()> {
    let out = std::env::temp_dir().join("prosody-nn-plots");
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let config = SynthConfig {
        n_statements: 150,
        n_questions: 200,
        ..SynthConfig::default()
    };
    let data = synth_dataset(&config, &PipelineOptions::default())?;
    let model = ArchConfig::default_for(ArchTag::ConvNet).build(&mut Rng::new(42))?;
    let trained = train(&model, &data, &TrainConfig::default())?.best;

    let weights = &trained.as_convnet().expect("a ConvNet").conv().weights;
    write(&out.join("filters.csv"), &filters_csv(weights)?)?;
    write(&out.join("filters.svg"), &filters_svg(weights)?)?;

    let contours = generate_contours(&config)?;
    for label in ["statement", "wh_question"] {
        if let Some(c) = contours.iter().find(|c| c.label().token() == label) {
            write(&out.join(format!("{label}.svg")), &contour_svg(c, label))?;
        }
    }
    Ok(())
}
