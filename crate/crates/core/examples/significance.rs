//! Compares two models on the same dev items with the paired permutation
//! test, on per-item log-probabilities and on top-1 hits.

use colordesc::corpus::{synthetic, Dataset, Split};
use colordesc::eval::{evaluate, permutation_test, DEFAULT_ROUNDS};
use colordesc::features::FeatureScheme;
use colordesc::models::{train_model, ModelFamily, TrainingConfig};

pub fn run_example(rounds: usize) -> colordesc::Result<String> {
    let train = Dataset::from_pairs(Split::Train, synthetic::generate(2000, 0.1, 1))?;
    let dev = Dataset::from_pairs(Split::Dev, synthetic::generate(400, 0.1, 2))?;
    let config = TrainingConfig {
        max_epochs: 4,
        batch_size: 32,
        ..TrainingConfig::default()
    };
    let (rnn, _) = train_model(ModelFamily::Rnn, &train, Some(&dev), &config)?;
    let (hm, _) = train_model(
        ModelFamily::Hm,
        &train,
        None,
        &TrainingConfig {
            features: FeatureScheme::Buckets,
            ..config
        },
    )?;
    let a = evaluate(&rnn, &dev, 10, true)?;
    let b = evaluate(&hm, &dev, 10, true)?;
    let mut out = format!(
        "rnn perplexity {:.3} accuracy {:.1}%\nhm  perplexity {:.3} accuracy {:.1}%\n",
        a.perplexity, a.accuracy, b.perplexity, b.accuracy
    );
    for metric in ["logprob", "accuracy"] {
        let p = permutation_test(&a.per_item(metric)?, &b.per_item(metric)?, rounds, 0)?;
        out += &format!("{metric:<9} p = {p:.4} (R = {rounds})\n");
    }
    Ok(out)
}

fn main() -> colordesc::Result<()> {
    print!("{}", run_example(DEFAULT_ROUNDS)?);
    Ok(())
}
