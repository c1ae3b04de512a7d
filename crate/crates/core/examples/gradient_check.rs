//! Central-difference check of the sequence model's analytic gradient in
//! f64 on a tiny model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use colordesc::corpus::{ColorHsv, Vocabulary, END_ID, START_ID};
use colordesc::kernel::Parameters;
use colordesc::models::{SequenceBatch, SequenceConfig, SequenceModel};

pub fn run_example(seed: u64) -> colordesc::Result<String> {
    let delta = 1e-4;
    let vocab = Vocabulary::with_content(["light", "blue"])?;
    let config = SequenceConfig {
        hidden: 4,
        embedding_dim: 3,
        ..SequenceConfig::default()
    };
    let mut m = SequenceModel::<f64>::init(config, vocab, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colors = (0..2)
        .map(|_| ColorHsv::new(rng.random_range(0.0..360.0), 50.0, 50.0))
        .collect::<colordesc::Result<Vec<_>>>()?;
    let batch = SequenceBatch::new(colors, vec![vec![START_ID, 3, 4, END_ID], vec![START_ID, 4, END_ID]], END_ID);

    let (loss, grad) = m.gradient(&batch, None, true)?;
    let mut out = format!("loss {loss:.6}\n");
    let names: Vec<String> = grad.tensors().iter().map(|(n, _)| n.to_string()).collect();
    for (ti, name) in names.iter().enumerate() {
        let analytic = grad.tensors()[ti].1.data().to_vec();
        let mut worst = 0.0f64;
        for (e, a) in analytic.iter().enumerate() {
            let orig = m.params.tensors()[ti].1.data()[e];
            m.params.tensors_mut()[ti].1.data_mut()[e] = orig + delta;
            let up = m.gradient(&batch, None, true)?.0;
            m.params.tensors_mut()[ti].1.data_mut()[e] = orig - delta;
            let down = m.gradient(&batch, None, true)?.0;
            m.params.tensors_mut()[ti].1.data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * delta);
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
        out += &format!("{name:<10} {:>5} values, max relative error {worst:.1e}\n", analytic.len());
    }
    Ok(out)
}

fn main() -> colordesc::Result<()> {
    print!("{}", run_example(0)?);
    Ok(())
}
