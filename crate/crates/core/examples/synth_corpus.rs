//! Generate a labeled synthetic corpus on disk and inspect it.
//!
//! ```text
//! cargo run --release --example synth_corpus -- [out_dir]
//! ```

use std::path::PathBuf;

use prosody_nn::contour::PipelineOptions;
use prosody_nn::synth::{gen_corpus, NoiseLevel, SynthConfig};

fn main() -> prosody_nn::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("prosody-nn-synth"));

    // The default config reproduces the full 1966 + 2860 corpus; a smaller
    // one keeps this example quick.
    let config = SynthConfig {
        n_statements: 200,
        n_questions: 300,
        noise_level: NoiseLevel::Moderate,
        ..SynthConfig::default()
    };
    let corpus = gen_corpus(&config, &out, &PipelineOptions::default())?;

    let [stmt, q] = corpus.dataset.class_counts();
    println!("{stmt} statements, {q} wh-questions");
    println!("manifest: {}", corpus.manifest_path.display());
    println!("config:   {}", corpus.config_path.display());
    println!("digest:   {}", corpus.digest);

    let first = &corpus.dataset.samples()[0];
    println!(
        "first sample: speaker {}, {} voiced frames of {}",
        first.speaker_id(),
        first.valid_len(),
        first.values().len()
    );
    Ok(())
}
