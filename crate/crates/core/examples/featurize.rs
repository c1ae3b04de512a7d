//! Color featurizations: raw, bucket indices and the 54-dim Fourier vector.
//!
//! cargo run --example featurize -- 83 80 28 --hsl

use colordesc::corpus::{ColorHsl, ColorHsv};
use colordesc::features::{bucket_index, fourier_features, hsl_to_hsv, hsv_to_hsl, raw_features};

pub fn run_example(args: &[String]) -> colordesc::Result<String> {
    let nums: Vec<f64> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let [a, b, c] = match nums.as_slice() {
        [a, b, c] => [*a, *b, *c],
        _ => [83.0, 80.0, 28.0],
    };
    let color = if args.iter().any(|a| a == "--hsl") {
        hsl_to_hsv(ColorHsl::new(a, b, c)?)
    } else {
        ColorHsv::new(a, b, c)?
    };
    let hsl = hsv_to_hsl(color);
    let mut out = format!(
        "{color}  (hsl {:.1}, {:.1}, {:.1})\n",
        hsl.h, hsl.s, hsl.l
    );
    out += &format!("raw      {:?}\n", raw_features(&color));
    out += &format!("buckets  {:?}\n", bucket_index(&color).as_array());
    let f = fourier_features(&color);
    out += "fourier  (j, k, l): re, im\n";
    for n in 0..27 {
        let (j, k, l) = (n / 9, n / 3 % 3, n % 3);
        out += &format!("  ({j}, {k}, {l}): {:+.4}, {:+.4}\n", f[n], f[n + 27]);
    }
    Ok(out)
}

fn main() -> colordesc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    print!("{}", run_example(&args)?);
    Ok(())
}
