//! Trains all three model families on the synthetic corpus and prints
//! dev-set perplexity, AIC and accuracy for each.

use colordesc::corpus::{synthetic, Dataset, Split};
use colordesc::eval::evaluate;
use colordesc::features::FeatureScheme;
use colordesc::models::{train_model, ModelFamily, TrainingConfig};

pub fn run_example(n_train: usize, epochs: usize) -> colordesc::Result<String> {
    let train = Dataset::from_pairs(Split::Train, synthetic::generate(n_train, 0.1, 1))?;
    let dev = Dataset::from_pairs(Split::Dev, synthetic::generate(n_train / 4, 0.1, 2))?;
    let mut out = String::from("model   feats     perp     AIC        acc\n");
    for (family, features) in [
        (ModelFamily::Rnn, FeatureScheme::Fourier),
        (ModelFamily::Rnn, FeatureScheme::Raw),
        (ModelFamily::Atomic, FeatureScheme::Fourier),
        (ModelFamily::Hm, FeatureScheme::Buckets),
    ] {
        let config = TrainingConfig {
            features,
            max_epochs: epochs,
            batch_size: 32,
            ..TrainingConfig::default()
        };
        let (model, _) = train_model(family, &train, Some(&dev), &config)?;
        let r = evaluate(&model, &dev, 10, true)?;
        out += &format!(
            "{:<7} {:<8} {:>6.3} {:>10.1} {:>6.1}%\n",
            family.to_string(),
            features.to_string(),
            r.perplexity,
            r.aic,
            r.accuracy
        );
    }
    Ok(out)
}

fn main() -> colordesc::Result<()> {
    print!("{}", run_example(4000, 8)?);
    Ok(())
}
