//! Acceptance suite. Prints one PASS / FAIL / SKIP line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Criteria 7, 8 and the bimodality half of 9 need the full color corpus;
//! point `COLORDESC_MANIFEST` at a train/dev/test manifest to run them.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use colordesc::corpus::{
    synthetic, ColorHsv, Dataset, Description, Manifest, Split, Vocabulary, END_ID, START_ID, UNK_ID,
};
use colordesc::denotation::{
    cross_sections, hue_profile, periodic_peaks, probability_field, to_gray, CrossSection, GridSpec,
    ProbField,
};
use colordesc::eval::{accuracy, aic, log2_probs, perplexity_from_log2, perplexity_of, permutation_test};
use colordesc::features::{fourier_features, FeatureScheme};
use colordesc::kernel::{Parameters, Tensor};
use colordesc::models::checkpoint::{from_bytes, to_bytes};
use colordesc::models::{
    beam_search, train_model, Conditioning, DescriptionModel, Model, ModelFamily, SequenceBatch,
    SequenceConfig, SequenceModel, TrainingConfig,
};

type Outcome = Result<String, String>;

enum Status {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn hsv(h: f64, s: f64, v: f64) -> ColorHsv {
    ColorHsv::new(h, s, v).unwrap()
}

fn random_color(rng: &mut ChaCha8Rng) -> ColorHsv {
    hsv(
        rng.random_range(0.0..360.0),
        rng.random_range(0.0..=100.0),
        rng.random_range(0.0..=100.0),
    )
}

// ---------------------------------------------------------------- 1

fn batch_loss(m: &SequenceModel<f64>, batch: &SequenceBatch) -> f64 {
    m.gradient(batch, None, true).unwrap().0
}

fn gradient_check() -> Outcome {
    const DELTA: f64 = 1e-4;
    const TOL: f64 = 1e-4;
    // relative error |a - n| / max(|a|, |n|, FLOOR)
    const FLOOR: f64 = 1e-6;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let vocab = Vocabulary::with_content(["x", "y"]).unwrap();
        assert_eq!(vocab.len(), 5);
        let config = SequenceConfig {
            features: FeatureScheme::Fourier,
            embedding_dim: 3,
            hidden: 4,
            conditioning: if seed < 3 {
                Conditioning::EveryStep
            } else {
                Conditioning::InitState
            },
            ..SequenceConfig::default()
        };
        let mut m = SequenceModel::<f64>::init(config, vocab, seed).unwrap();
        // move away from the symmetric, saturated initialization
        let noise = Normal::new(0.0, 0.3).unwrap();
        for (_, t) in m.params.tensors_mut() {
            for x in t.data_mut() {
                *x += noise.sample(&mut rng);
            }
        }
        let mut colors = Vec::new();
        let mut seqs = Vec::new();
        for _ in 0..3 {
            colors.push(random_color(&mut rng));
            let len = rng.random_range(1..=3);
            let mut s = vec![START_ID];
            s.extend((0..len).map(|_| rng.random_range(UNK_ID..5)));
            s.push(END_ID);
            seqs.push(s);
        }
        let batch = SequenceBatch::new(colors, seqs, END_ID);
        let (_, grad) = m.gradient(&batch, None, true).unwrap();
        let analytic: Vec<Vec<f64>> = grad.tensors().iter().map(|(_, t)| t.data().to_vec()).collect();
        let names: Vec<String> = grad.tensors().iter().map(|(n, _)| n.to_string()).collect();
        for (ti, name) in names.iter().enumerate() {
            for (e, &a) in analytic[ti].iter().enumerate() {
                let orig = m.params.tensors()[ti].1.data()[e];
                m.params.tensors_mut()[ti].1.data_mut()[e] = orig + DELTA;
                let up = batch_loss(&m, &batch);
                m.params.tensors_mut()[ti].1.data_mut()[e] = orig - DELTA;
                let down = batch_loss(&m, &batch);
                m.params.tensors_mut()[ti].1.data_mut()[e] = orig;
                let numeric = (up - down) / (2.0 * DELTA);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
                if rel > worst {
                    worst = rel;
                }
                ensure(rel <= TOL, || {
                    format!("seed {seed}, {name}[{e}]: analytic {a:e}, numeric {numeric:e}, rel {rel:e}")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} parameters over 5 seeds, max relative error {worst:.2e} (≤ {TOL:e})"))
}

// ---------------------------------------------------------------- 2

fn fourier_suite() -> Outcome {
    let f = fourier_features(&hsv(0.0, 0.0, 0.0));
    ensure(f[..27].iter().all(|&x| x == 1.0) && f[27..].iter().all(|&x| x == 0.0), || {
        "(0,0,0) is not 27 ones followed by 27 zeros".into()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let c = random_color(&mut rng);
        let f = fourier_features(&c);
        let norm2: f64 = f.iter().map(|x| x * x).sum();
        ensure((norm2 - 27.0).abs() <= 1e-9, || format!("‖f‖² = {norm2} at {c}"))?;
        for n in 0..27 {
            let m = f[n].hypot(f[n + 27]);
            ensure((m - 1.0).abs() <= 1e-12, || format!("|f_{n}| = {m} at {c}"))?;
        }
    }
    let mut worst_ratio = 0.0f64;
    for k in 1..=9 {
        let eps = 10f64.powi(-k);
        for _ in 0..50 {
            let (s, v) = (rng.random_range(0.0..=100.0), rng.random_range(0.0..=100.0));
            let a = fourier_features(&hsv(eps, s, v));
            let b = fourier_features(&hsv(360.0 - eps, s, v));
            let dist: f64 = (0..27).map(|n| (a[n] - b[n]).hypot(a[n + 27] - b[n + 27])).sum();
            let bound = 4.0 * PI * eps / 360.0 * 27.0;
            ensure(dist <= bound + 1e-12, || {
                format!("periodicity: eps {eps:e}: distance {dist:e} > bound {bound:e}")
            })?;
            worst_ratio = worst_ratio.max(dist / bound);
        }
    }
    Ok(format!(
        "origin, unit modulus on 1000 colors, periodicity bound (max distance/bound {worst_ratio:.4})"
    ))
}

// ---------------------------------------------------------------- 3

fn memorization_pairs() -> Dataset {
    let words = [
        "red", "green", "blue", "dark", "light", "pale", "bright", "deep", "grey", "pink", "teal",
        "olive",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen = std::collections::BTreeSet::new();
    let mut pairs = Vec::new();
    while pairs.len() < 50 {
        let len = rng.random_range(1..=3);
        let d: Vec<&str> = (0..len).map(|_| words[rng.random_range(0..words.len())]).collect();
        let d = d.join(" ");
        if seen.insert(d.clone()) {
            pairs.push((random_color(&mut rng), d));
        }
    }
    Dataset::from_pairs(Split::Train, pairs).unwrap()
}

fn memorization() -> Outcome {
    let data = memorization_pairs();
    let config = TrainingConfig {
        features: FeatureScheme::Fourier,
        dropout: 0.0,
        max_epochs: 500,
        batch_size: 10,
        learning_rate: 0.1,
        patience: 0,
        seed: 0,
        ..TrainingConfig::default()
    };
    let start = Instant::now();
    let (model, log) = train_model(ModelFamily::Rnn, &data, None, &config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let ppl = perplexity_of(&model, &data, false).map_err(|e| e.to_string())?;
    let acc = accuracy(&model, &data, 10);
    let detail = format!(
        "{} epochs, train perplexity {ppl:.4}, beam-10 accuracy {acc:.1}%, {:.1}s",
        log.epochs_trained,
        elapsed.as_secs_f64()
    );
    ensure(ppl < 1.1 && acc == 100.0 && elapsed < Duration::from_secs(120), || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 4

fn peaked_model(content: &[&str], seed: u64) -> SequenceModel<f64> {
    let vocab = Vocabulary::with_content(content.iter().copied()).unwrap();
    let config = SequenceConfig {
        embedding_dim: 4,
        hidden: 5,
        ..SequenceConfig::default()
    };
    let mut m = SequenceModel::<f64>::init(config, vocab, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.5).unwrap();
    let (rows, cols) = (m.params.out.w.rows(), m.params.out.w.cols());
    m.params.out.w = Tensor::from_vec(&[rows, cols], (0..rows * cols).map(|_| noise.sample(&mut rng)).collect())
        .unwrap();
    for x in m.params.lstm.w_x.data_mut() {
        *x = noise.sample(&mut rng);
    }
    m
}

fn sequences(alphabet: &[usize], len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                alphabet.iter().map(move |&t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    out
}

fn sequence_mass() -> Outcome {
    const MAX_LEN: usize = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_mass = 0.0f64;
    // total vocabulary 5: every token except </s> may precede </s>
    for seed in 0..3 {
        let m = peaked_model(&["x", "y"], seed);
        let c = random_color(&mut rng);
        let alphabet: Vec<usize> = (0..5).filter(|&t| t != END_ID).collect();
        let mut mass = 0.0;
        for len in 0..=MAX_LEN {
            for w in sequences(&alphabet, len) {
                let mut ids = vec![START_ID];
                ids.extend(&w);
                ids.push(END_ID);
                mass += m.log_prob_ids(&c, &ids).exp();
            }
        }
        let mut residual = 0.0;
        for w in sequences(&alphabet, MAX_LEN) {
            let mut prefix = vec![START_ID];
            prefix.extend(&w);
            let p_prefix: f64 = (1..prefix.len())
                .map(|t| m.next_distribution(&c, &prefix[..t])[prefix[t]])
                .product();
            let p_end = m.next_distribution(&c, &prefix)[END_ID];
            residual += p_prefix * (1.0 - p_end);
        }
        let total = mass + residual;
        worst_mass = worst_mass.max((total - 1.0).abs());
        ensure((total - 1.0).abs() <= 1e-5, || {
            format!("seed {seed}: Σ P(d) {mass} + residual {residual} = {total}")
        })?;
    }

    // three content tokens: 27 prefixes of length 3, so width 27 is exhaustive
    let mut agree = 0;
    for seed in 0..20 {
        let m = peaked_model(&["x", "y", "z"], 100 + seed);
        let c = random_color(&mut rng);
        let content: Vec<usize> = (3..6).collect();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for len in 1..=MAX_LEN {
            for w in sequences(&content, len) {
                let mut ids = vec![START_ID];
                ids.extend(&w);
                ids.push(END_ID);
                let lp = m.log_prob_ids(&c, &ids);
                if best.as_ref().is_none_or(|(b, bw)| lp > *b || (lp == *b && w < *bw)) {
                    best = Some((lp, w));
                }
            }
        }
        let (lp, w) = best.unwrap();
        let beam = beam_search(&m, &c, 27, MAX_LEN);
        ensure(beam.ids == w && (beam.log_prob - lp).abs() < 1e-12, || {
            format!("seed {seed}: beam {:?} ({}) vs exhaustive {w:?} ({lp})", beam.ids, beam.log_prob)
        })?;
        agree += 1;
    }
    Ok(format!(
        "mass within {worst_mass:.1e} of 1 on 3 models; width-27 beam = exhaustive argmax on {agree}/20 models"
    ))
}

// ---------------------------------------------------------------- 5

fn exact_permutation_p(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let observed = d.iter().sum::<f64>().abs();
    let tol = 1e-12 * d.iter().map(|x| x.abs()).sum::<f64>();
    let mut extreme = 0;
    for mask in 0u32..(1 << n) {
        let s: f64 = (0..n).map(|i| if mask >> i & 1 == 1 { -d[i] } else { d[i] }).sum();
        if s.abs() + tol >= observed {
            extreme += 1;
        }
    }
    extreme as f64 / (1u32 << n) as f64
}

fn metric_oracles() -> Outcome {
    let ppl = perplexity_from_log2(&[0.5f64.log2(), 0.125f64.log2()], false).map_err(|e| e.to_string())?;
    ensure(ppl == 4.0, || format!("perplexity of {{1/2, 1/8}} = {ppl}"))?;
    let a = aic(1000.0, 50);
    ensure(a == 2100.0, || format!("AIC(1000, 50) = {a}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for trial in 0..5 {
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..0.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v - rng.random_range(-0.6..1.0)).collect();
        let exact = exact_permutation_p(&x, &y);
        let approx = permutation_test(&x, &y, 10_000, trial).map_err(|e| e.to_string())?;
        worst = worst.max((approx - exact).abs());
        ensure((approx - exact).abs() <= 0.02, || {
            format!("trial {trial}: approximate p {approx} vs exact {exact}")
        })?;
    }
    let same = permutation_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], 10_000, 0).map_err(|e| e.to_string())?;
    ensure(same == 1.0, || format!("identical inputs give p = {same}"))?;
    Ok(format!("perplexity 4, AIC 2100, |p̂ − p| ≤ {worst:.4} on 5 trials, identical → p = 1"))
}

// ---------------------------------------------------------------- 6

fn aic_reconciliation() -> Outcome {
    let n = 108_545.0f64;
    let two_ell = 2.0 * n * 12.35f64.log2();
    ensure((two_ell - 7.88e5).abs() / 7.88e5 < 0.005, || format!("2ℓ = {two_ell}"))?;
    let implied_k = (8.33e5 - two_ell) / 2.0;
    ensure((implied_k - 2.2e4).abs() / 2.2e4 < 0.05, || format!("implied k = {implied_k}"))?;
    let mut counts = Vec::new();
    for v in [100usize, 400, 900] {
        let vocab = Vocabulary::from_tokens(
            ["<s>", "</s>", "<unk>"]
                .iter()
                .map(|s| s.to_string())
                .chain((0..v - 3).map(|i| format!("w{i}")))
                .collect(),
        )
        .unwrap();
        let m = SequenceModel::<f32>::init(SequenceConfig::default(), vocab, 0).unwrap();
        let k = m.count_params() as f64;
        ensure(k >= implied_k / 2.0 && k <= implied_k * 2.0, || {
            format!("V={v}: count_params {k} outside [{:.0}, {:.0}]", implied_k / 2.0, implied_k * 2.0)
        })?;
        counts.push(format!("V={v}: {k}"));
    }
    // k(V) = 7660 + 41 V for the default architecture
    let v_lo = ((implied_k / 2.0 - 7660.0) / 41.0).ceil();
    let v_hi = ((implied_k * 2.0 - 7660.0) / 41.0).floor();
    Ok(format!(
        "2ℓ = {two_ell:.4e}, implied k = {implied_k:.0}; {}; within 2× for V in [{v_lo}, {v_hi}]",
        counts.join(", ")
    ))
}

// ---------------------------------------------------------------- 7, 8

fn corpus() -> Option<(Manifest, PathBuf)> {
    let path = PathBuf::from(std::env::var_os("COLORDESC_MANIFEST")?);
    Some((Manifest::load(&path).expect("COLORDESC_MANIFEST must name a readable manifest"), path))
}

fn load(m: &Manifest, split: Split) -> Result<Dataset, String> {
    m.load_split(split, Default::default()).map_err(|e| e.to_string())
}

fn subsample_ordering(m: &Manifest) -> Outcome {
    let mut train = load(m, Split::Train)?;
    let dev = load(m, Split::Dev)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    rand::seq::SliceRandom::shuffle(train.items.as_mut_slice(), &mut rng);
    train.items.truncate(50_000);
    let fit = |family, features| {
        let config = TrainingConfig {
            features,
            ..TrainingConfig::default()
        };
        train_model(family, &train, Some(&dev), &config).map_err(|e| e.to_string())
    };
    let per_item = |model: &Model| log2_probs(model, &dev).map_err(|e| e.to_string());
    let rnn_fourier = per_item(&fit(ModelFamily::Rnn, FeatureScheme::Fourier)?.0)?;
    let atomic_fourier = per_item(&fit(ModelFamily::Atomic, FeatureScheme::Fourier)?.0)?;
    let rnn_raw = per_item(&fit(ModelFamily::Rnn, FeatureScheme::Raw)?.0)?;
    let ppl = |x: &[f64]| perplexity_from_log2(x, true).unwrap();
    let (p_rf, p_af, p_rr) = (ppl(&rnn_fourier), ppl(&atomic_fourier), ppl(&rnn_raw));
    let finite = |x: &[f64]| x.iter().map(|v| v.max(-1e3)).collect::<Vec<_>>();
    let sig_atomic = permutation_test(&finite(&rnn_fourier), &finite(&atomic_fourier), 10_000, 0)
        .map_err(|e| e.to_string())?;
    let sig_raw = permutation_test(&finite(&rnn_fourier), &finite(&rnn_raw), 10_000, 0)
        .map_err(|e| e.to_string())?;
    let detail = format!(
        "dev perplexity rnn/fourier {p_rf:.3}, atomic/fourier {p_af:.3} (p={sig_atomic}), rnn/raw {p_rr:.3} (p={sig_raw})"
    );
    ensure(p_rf < p_af && p_rf < p_rr && sig_atomic < 0.05 && sig_raw < 0.05, || detail.clone())?;
    Ok(detail)
}

fn full_reproduction(m: &Manifest) -> Result<(String, Model), String> {
    let train = load(m, Split::Train)?;
    let dev = load(m, Split::Dev)?;
    let test = load(m, Split::Test)?;
    let (model, _) = train_model(ModelFamily::Rnn, &train, Some(&dev), &TrainingConfig::default())
        .map_err(|e| e.to_string())?;
    let dev_ppl = perplexity_of(&model, &dev, true).map_err(|e| e.to_string())?;
    let dev_acc = accuracy(&model, &dev, 10);
    let test_ppl = perplexity_of(&model, &test, true).map_err(|e| e.to_string())?;
    let detail = format!("dev perplexity {dev_ppl:.3} (≤ 13.0), dev accuracy {dev_acc:.2}% (≥ 39.0), test perplexity {test_ppl:.3} (≤ 13.2)");
    ensure(dev_ppl <= 13.0 && dev_acc >= 39.0 && test_ppl <= 13.2, || detail.clone())?;
    Ok((detail, model))
}

// ---------------------------------------------------------------- 9

fn pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut v = format!("P5\n{width} {height}\n255\n").into_bytes();
    v.extend_from_slice(pixels);
    v
}

fn pgm_goldens() -> Outcome {
    let grid = GridSpec::new(2, 2, 2).unwrap();
    // value at (hue i, saturation j, lightness k) = 4i + 2j + k + 1
    let values = (0..8).map(|n| (n + 1) as f64).collect();
    let field = ProbField::from_values(grid, values).unwrap();
    let (l, r) = cross_sections(&field).map_err(|e| e.to_string())?;
    // L(s,l) sums over hue: [[1+5, 2+6], [3+7, 4+8]] / 36
    // R(h,l) sums over saturation: [[1+3, 2+4], [5+7, 6+8]] / 36
    for (sec, sums) in [(&l, [6.0, 8.0, 10.0, 12.0]), (&r, [4.0, 6.0, 12.0, 14.0])] {
        for (got, want) in sec.mass.iter().zip(sums) {
            ensure((got - want / 36.0).abs() < 1e-15, || format!("marginal {got} vs {}", want / 36.0))?;
        }
    }
    // columns are saturation (L) or hue (R); the top row is the lighter
    // half. Gray levels: round(255 · ln(x/min) / ln(max/min) + ½).
    let golden_l = pgm(2, 2, &[106, 255, 0, 188]);
    let golden_r = pgm(2, 2, &[83, 255, 0, 224]);
    let got_l = l.to_image().map_err(|e| e.to_string())?.to_pgm();
    let got_r = r.to_image().map_err(|e| e.to_string())?.to_pgm();
    ensure(got_l == golden_l, || format!("L image {got_l:?} != {golden_l:?}"))?;
    ensure(got_r == golden_r, || format!("R image {got_r:?} != {golden_r:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..200 {
        let n = rng.random_range(2..40);
        let mass: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
        let total: f64 = mass.iter().sum();
        let grid = GridSpec::new(1, n, 1).unwrap();
        let field = ProbField::from_values(grid, mass.iter().map(|m| m / total).collect()).unwrap();
        let (sec, _) = cross_sections(&field).unwrap();
        let shift = rng.random_range(-50.0..50.0);
        let a = sec.to_image().unwrap().to_pgm();
        let b: CrossSection = sec.shifted(shift);
        ensure(a == b.to_image().unwrap().to_pgm(), || {
            format!("trial {trial}: image changed under log shift {shift}")
        })?;
    }
    ensure(to_gray(&[0.0, -1.0, -2.0]).unwrap() == [255, 128, 0], || "rounding".into())?;
    Ok("2×2×2 L/R goldens byte-exact; 200 random log shifts leave images unchanged".into())
}

fn greenish_bimodality(model: &Model) -> Outcome {
    let d = Description::new("greenish").unwrap();
    let field = probability_field(model, &d, GridSpec::default()).map_err(|e| e.to_string())?;
    let (_, r) = cross_sections(&field).map_err(|e| e.to_string())?;
    let grid = field.grid;
    let profile = hue_profile(&r, grid.n_l / 2);
    let peaks = periodic_peaks(&profile);
    let hues: Vec<String> = peaks.iter().map(|&i| format!("{:.0}°", grid.hue(i))).collect();
    let detail = format!("{} hue maxima at mid lightness: {}", peaks.len(), hues.join(", "));
    ensure(peaks.len() >= 2, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 10

fn checkpoint_roundtrip() -> Outcome {
    let data = Dataset::from_pairs(Split::Train, synthetic::generate(400, 0.1, 10)).unwrap();
    let config = TrainingConfig {
        max_epochs: 2,
        batch_size: 32,
        ..TrainingConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let probes: Vec<(ColorHsv, Description)> = (0..100)
        .map(|_| {
            let item = &data.items[rng.random_range(0..data.len())];
            (random_color(&mut rng), item.description.clone())
        })
        .collect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for family in [ModelFamily::Rnn, ModelFamily::Atomic, ModelFamily::Hm] {
        let (model, _) = train_model(family, &data, None, &config).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("{family}.ckpt"));
        colordesc::models::save_checkpoint(&model, &path).map_err(|e| e.to_string())?;
        let back = colordesc::models::load_checkpoint(&path).map_err(|e| e.to_string())?;
        ensure(back == model, || format!("{family}: loaded model differs"))?;
        ensure(to_bytes(&back).unwrap() == to_bytes(&model).unwrap(), || {
            format!("{family}: re-serialization differs")
        })?;
        ensure(from_bytes(&std::fs::read(&path).unwrap()).is_ok(), || "reparse".into())?;
        for (c, d) in &probes {
            let a = model.score_description(c, d).unwrap();
            let b = back.score_description(c, d).unwrap();
            ensure(a.to_bits() == b.to_bits(), || format!("{family}: {a} vs {b} at {c}, {d:?}"))?;
        }
    }
    Ok("rnn, atomic, hm: 100 probes each bit-identical after save/load".into())
}

// ----------------------------------------------------------------

fn status(o: Outcome) -> Status {
    match o {
        Ok(s) => Status::Pass(s),
        Err(s) => Status::Fail(s),
    }
}

fn main() {
    // cargo passes harness flags such as --nocapture; listing requests get
    // an empty list so tooling does not run the suite twice
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let corpus = corpus();
    let mut results: Vec<(&str, &str, Status)> = Vec::new();
    let mut timed = |id: &'static str, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let s = status(f());
        let s = match s {
            Status::Pass(d) => Status::Pass(format!("{d} [{:.1}s]", t.elapsed().as_secs_f64())),
            other => other,
        };
        results.push((id, name, s));
    };
    timed("1", "gradient check", &gradient_check);
    timed("2", "fourier featurizer", &fourier_suite);
    timed("3", "memorization", &memorization);
    timed("4", "sequence mass and exact beam", &sequence_mass);
    timed("5", "metric oracles", &metric_oracles);
    timed("6", "AIC reconciliation", &aic_reconciliation);
    timed("9a", "PGM goldens and shift invariance", &pgm_goldens);
    timed("10", "checkpoint roundtrip", &checkpoint_roundtrip);
    const GATE: &str = "needs the color corpus: set COLORDESC_MANIFEST";
    match &corpus {
        Some((m, _)) => {
            results.push(("7", "subsample ordering", status(subsample_ordering(m))));
            match full_reproduction(m) {
                Ok((detail, model)) => {
                    results.push(("8", "full-data reproduction", Status::Pass(detail)));
                    results.push(("9b", "greenish bimodality", status(greenish_bimodality(&model))));
                }
                Err(e) => {
                    results.push(("8", "full-data reproduction", Status::Fail(e)));
                    results.push(("9b", "greenish bimodality", Status::Skip("criterion 8 model unavailable".into())));
                }
            }
        }
        None => {
            results.push(("7", "subsample ordering", Status::Skip(GATE.into())));
            results.push(("8", "full-data reproduction", Status::Skip(GATE.into())));
            results.push(("9b", "greenish bimodality", Status::Skip(GATE.into())));
        }
    }
    results.sort_by_key(|(id, _, _)| {
        let digits: String = id.chars().take_while(|c| c.is_ascii_digit()).collect();
        (digits.parse::<u32>().unwrap(), id.to_string())
    });
    let mut failed = 0;
    for (id, name, s) in &results {
        let (tag, detail) = match s {
            Status::Pass(d) => ("PASS", d),
            Status::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Status::Skip(d) => ("SKIP", d),
        };
        println!("criterion {id:<3} {tag}  {name}: {detail}");
    }
    if failed > 0 {
        eprintln!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
