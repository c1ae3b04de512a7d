//! Renders the L (saturation × lightness) and R (hue × lightness)
//! cross-sections of P("greenish" | c) to PGM files and counts the hue
//! maxima of R at mid lightness.
//!
//! cargo run --release --example denotation -- out-dir

use std::path::Path;

use colordesc::corpus::{synthetic, Dataset, Description, Split};
use colordesc::denotation::{
    cross_sections, hue_profile, periodic_peaks, probability_field, write_denotation, GridSpec,
};
use colordesc::models::{train_model, ModelFamily, TrainingConfig};

pub fn run_example(outdir: &Path, grid: GridSpec, epochs: usize) -> colordesc::Result<String> {
    let train = Dataset::from_pairs(Split::Train, synthetic::generate(6000, 0.05, 1))?;
    let config = TrainingConfig {
        max_epochs: epochs,
        batch_size: 32,
        ..TrainingConfig::default()
    };
    let (model, _) = train_model(ModelFamily::Rnn, &train, None, &config)?;
    let d = Description::new("greenish")?;
    let field = probability_field(&model, &d, grid)?;
    let files = write_denotation(outdir, &d, &field, &[("model", "synthetic rnn".into())])?;
    let (_, r) = cross_sections(&field)?;
    // lightness column closest to 60%
    let col = ((0.6 * grid.n_l as f64) as usize).min(grid.n_l - 1);
    let peaks = periodic_peaks(&hue_profile(&r, col));
    let hues: Vec<String> = peaks.iter().map(|&i| format!("{:.0}", grid.hue(i))).collect();
    Ok(format!(
        "wrote {} and {}\nhue maxima at lightness {:.0}: [{}]\n",
        files.left.display(),
        files.right.display(),
        grid.lightness(col),
        hues.join(", ")
    ))
}

fn main() -> colordesc::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "denotation-out".into());
    print!("{}", run_example(Path::new(&out), GridSpec::new(72, 20, 20)?, 6)?);
    Ok(())
}
