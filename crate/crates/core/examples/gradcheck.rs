//! Verify backpropagation against central finite differences, then show
//! that a deliberately corrupted gradient is caught.

use prosody_nn::models::{check_model_gradients, ArchConfig, ArchTag, GradCheckOptions, LstmConfig};

fn main() -> prosody_nn::Result<()> {
    let archs = [
        ArchConfig::default_for(ArchTag::ConvNet),
        ArchConfig::Lstm(LstmConfig {
            hidden_size: 8,
            input_downsample: 32,
        }),
    ];
    for arch in archs {
        let check = check_model_gradients(&arch, 42, &GradCheckOptions::default())?;
        println!("{}", arch.tag().token());
        for t in &check.tensors {
            println!("  {:<6} {:<12} {:>3} coords  max rel error {:.2e}", t.layer, t.tensor, t.checked, t.max_error);
        }
    }

    let faulty = GradCheckOptions {
        inject_fault: true,
        ..GradCheckOptions::default()
    };
    let bad = check_model_gradients(&ArchConfig::default_for(ArchTag::ConvNet), 42, &faulty)?;
    println!("with an injected 5% fault: max rel error {:.2e}", bad.max_error());
    Ok(())
}
