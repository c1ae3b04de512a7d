//! The histogram baseline: bucket backoff, smoothing and parameter count.

use colordesc::corpus::{synthetic, ColorHsv, Dataset, Description, Split};
use colordesc::models::HistogramModel;

pub fn run_example() -> colordesc::Result<String> {
    let train = Dataset::from_pairs(Split::Train, synthetic::generate(3000, 0.1, 4))?;
    let hm = HistogramModel::fit(&train, 1.0)?;
    let mut out = format!(
        "{} descriptions, {} free parameters\n",
        hm.inventory.len(),
        hm.count_params()
    );
    let level = ["90x10x10", "45x5x5", "global"];
    for (h, s, v) in [(5.0, 95.0, 95.0), (200.0, 60.0, 20.0), (359.9, 0.0, 100.0)] {
        let c = ColorHsv::new(h, s, v)?;
        let (lvl, bucket) = hm.bucket_for(&c).expect("fitted model");
        let top = hm.predict_top1(&c);
        out += &format!(
            "{c}: bucket {} ({} items), top-1 {:?} p = {:.3}\n",
            level[lvl],
            bucket.total,
            top.normalized(),
            hm.probability(&c, &top)
        );
    }
    let unseen = Description::new("chartreuse")?;
    let c = ColorHsv::new(90.0, 80.0, 80.0)?;
    out += &format!(
        "unseen description {:?} gets the smoothing floor p = {:.2e}\n",
        unseen.normalized(),
        hm.probability(&c, &unseen)
    );
    Ok(out)
}

fn main() -> colordesc::Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
