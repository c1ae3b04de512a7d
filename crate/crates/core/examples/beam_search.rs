//! Top-1 descriptions by beam width, plus a few samples, for a handful of
//! colors under a briefly trained sequence model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use colordesc::corpus::{synthetic, ColorHsv, Dataset, Split};
use colordesc::models::{train_model, DescriptionModel, ModelFamily, TrainingConfig};

pub fn run_example(epochs: usize) -> colordesc::Result<String> {
    let train = Dataset::from_pairs(Split::Train, synthetic::generate(2000, 0.1, 1))?;
    let config = TrainingConfig {
        max_epochs: epochs,
        batch_size: 32,
        ..TrainingConfig::default()
    };
    let (model, _) = train_model(ModelFamily::Rnn, &train, None, &config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = String::new();
    for (h, s, v) in [(0.0, 90.0, 90.0), (120.0, 80.0, 30.0), (220.0, 20.0, 95.0), (64.0, 80.0, 80.0)] {
        let c = ColorHsv::new(h, s, v)?;
        out += &format!("{c}\n");
        for width in [1, 3, 10] {
            let d = model.predict_top1(&c, width);
            let lp = model.score_description(&c, &d)?;
            out += &format!("  beam {width:>2}: {:<14} p = {:.3}\n", d.normalized(), lp.exp());
        }
        let samples: Vec<String> = (0..4)
            .map(|_| model.sample(&c, &mut rng, 20).normalized())
            .collect();
        out += &format!("  samples: {}\n", samples.join(" | "));
    }
    Ok(out)
}

fn main() -> colordesc::Result<()> {
    print!("{}", run_example(6)?);
    Ok(())
}
