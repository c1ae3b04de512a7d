//! Saves a model, reloads it, and checks scores agree bit for bit. Also
//! shows the error for a truncated file.

use std::fs;
use std::path::Path;

use colordesc::corpus::{synthetic, ColorHsv, Dataset, Description, Split};
use colordesc::models::{load_checkpoint, save_checkpoint, train_model, DescriptionModel, ModelFamily, TrainingConfig};

pub fn run_example(dir: &Path) -> colordesc::Result<String> {
    let train = Dataset::from_pairs(Split::Train, synthetic::generate(500, 0.1, 1))?;
    let config = TrainingConfig {
        max_epochs: 1,
        ..TrainingConfig::default()
    };
    let (model, _) = train_model(ModelFamily::Rnn, &train, None, &config)?;
    let path = dir.join("model.ckpt");
    save_checkpoint(&model, &path)?;
    let back = load_checkpoint(&path)?;

    let c = ColorHsv::new(250.0, 70.0, 40.0)?;
    let d = Description::new("dark blue")?;
    let (a, b) = (model.score_description(&c, &d)?, back.score_description(&c, &d)?);
    let mut out = format!(
        "{} bytes, {} parameters\nscore before {a:.9}, after {b:.9}, identical bits: {}\n",
        fs::metadata(&path).map(|m| m.len()).unwrap_or(0),
        back.count_params(),
        a.to_bits() == b.to_bits()
    );

    let bytes = fs::read(&path).unwrap();
    let cut = dir.join("truncated.ckpt");
    fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    match load_checkpoint(&cut) {
        Err(e) => out += &format!("truncated file: {e}\n"),
        Ok(_) => out += "truncated file unexpectedly loaded\n",
    }
    Ok(out)
}

fn main() -> colordesc::Result<()> {
    let dir = std::env::temp_dir().join("colordesc-checkpoint-example");
    fs::create_dir_all(&dir).unwrap();
    print!("{}", run_example(&dir)?);
    Ok(())
}
