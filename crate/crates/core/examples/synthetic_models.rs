//! Writes two synthetic residual models to a directory and prints their
//! neuronsim heatmap and localization profile.
//!
//!     cargo run --release -p cwsim-core --example synthetic_models -- /tmp/cwsim-demo

use cwsim::analysis::LocalizationOptions;
use cwsim::synth;
use cwsim::tensorstore::{write_representation_dump, CorpusInfo};
use cwsim::{Analyzer, Measure, MeasureOptions};

fn main() -> cwsim::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "cwsim-demo".into());
    let out = std::path::Path::new(&out);
    let words = 300;
    let mut rng = synth::rng(7);
    let inputs = synth::gaussian_matrix(words, 64, &mut rng);
    let mut manifests = Vec::new();
    for name in ["alpha", "beta"] {
        let layers = synth::residual_model(inputs.as_ref(), 32, 4, 0.5, &mut rng)?;
        let corpus = CorpusInfo::word_level(vec![words]);
        manifests.push(write_representation_dump(out.join(name), name, corpus, &layers)?);
    }

    let an = Analyzer::open(&manifests)?;
    let layers = an.all_layers();
    let h = an.build_heatmap(&layers, Measure::NeuronSim, &MeasureOptions::default())?;
    println!("neuronsim ({})", h.orientation);
    for (label, row) in h.row_labels.iter().zip(&h.values) {
        let cells: Vec<String> = row.iter().map(|v| format!("{:.3}", v.unwrap_or(f64::NAN))).collect();
        println!("{:>8} {}", label.to_string(), cells.join(" "));
    }
    println!(
        "within-model mean {:.3}, cross-model mean {:.3}",
        h.block_mean(0..4, 0..4, true).unwrap_or(f64::NAN),
        h.block_mean(0..4, 4..8, false).unwrap_or(f64::NAN)
    );

    let profile = an.localization_profile(&layers, &LocalizationOptions::default())?;
    println!("\nlayer     neuronsim  svsim   score");
    for e in &profile.entries {
        println!(
            "{:>8}  {:.3}      {:.3}   {:+.3}",
            e.layer.to_string(),
            e.neuronsim_mean,
            e.svsim_mean,
            e.localization_score
        );
    }
    Ok(())
}
