//! Load hand-written contours (CSV and Praat PitchTier) through a manifest.
//!
//! Each file becomes a fixed-length sample: resampled every 12.5 ms,
//! divided by 500 and zero-padded to 1024 frames.

use prosody_nn::contour::{load_manifest_file, PipelineOptions};

const CSV: &str = "time_s,f0_hz\n0.00,210\n0.10,220\n0.20,0\n0.25,0\n0.30,190\n0.50,170\n";

/// Short text format, as written by Praat's "Save as short text file".
const PITCHTIER: &str = "File type = \"ooTextFile\"
Object class = \"PitchTier\"

0
0.6
3
0.05
180
0.30
240
0.55
170
";

fn main() -> prosody_nn::Result<()> {
    let dir = std::env::temp_dir().join("prosody-nn-load");
    std::fs::create_dir_all(&dir).map_err(|e| prosody_nn::Error::io(&dir, e))?;
    let files = [
        ("a.csv", CSV),
        ("b.PitchTier", PITCHTIER),
        (
            "manifest.csv",
            "path,label,speaker_id\na.csv,statement,spk1\nb.PitchTier,wh_question,spk2\n",
        ),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| prosody_nn::Error::io(&path, e))?;
    }

    let data = load_manifest_file(&dir.join("manifest.csv"), &PipelineOptions::default())?;
    for s in data.samples() {
        let preview: Vec<String> = s.values()[..8].iter().map(|v| format!("{v:.3}")).collect();
        println!(
            "{:<11} {}: {} frames, starts [{}]",
            s.label().token(),
            s.speaker_id(),
            s.valid_len(),
            preview.join(", ")
        );
    }
    println!("dataset digest {}", data.digest());
    Ok(())
}
