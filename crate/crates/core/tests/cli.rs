use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use colordesc::corpus::synthetic;
use colordesc::eval::EvalReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_colordesc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_csv(path: &Path, rows: &[(f64, f64, f64, String)]) {
    let mut text = String::from("h,s,v,description\n");
    for (h, s, v, d) in rows {
        text.push_str(&format!("{h},{s},{v},{d}\n"));
    }
    fs::write(path, text).unwrap();
}

fn synthetic_rows(n: usize, seed: u64) -> Vec<(f64, f64, f64, String)> {
    synthetic::generate(n, 0.05, seed)
        .into_iter()
        .map(|(c, d)| (c.h, c.s, c.v, d))
        .collect()
}

/// A small synthetic corpus plus manifest; returns the manifest path.
fn corpus(dir: &Path) -> PathBuf {
    write_csv(&dir.join("train.csv"), &synthetic_rows(300, 1));
    write_csv(&dir.join("dev.csv"), &synthetic_rows(80, 2));
    write_csv(&dir.join("test.csv"), &synthetic_rows(80, 3));
    let manifest = dir.join("splits.manifest");
    fs::write(&manifest, "train=train.csv\ndev=dev.csv\ntest=test.csv\n").unwrap();
    manifest
}

fn train(manifest: &Path, out: &Path, family: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--family",
        family,
        "--data",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--max-epochs",
        "2",
        "--batch-size",
        "32",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn train_writes_checkpoint_log_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let out = dir.path().join("run1");
    let o = train(&manifest, &out, "rnn", &["--features", "fourier"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("model.ckpt").is_file());
    let log = fs::read_to_string(out.join("train.log")).unwrap();
    assert!(log.lines().count() >= 2);
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["perplexity"].as_f64().unwrap() > 1.0);
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run-meta.json")).unwrap()).unwrap();
    assert_eq!(meta["prng"], "chacha8");
    assert_eq!(meta["config"]["family"], "rnn");
    assert_eq!(meta["config"]["training"]["seed"], 0);
    assert!(meta["version"].is_string());
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = train(&manifest, out, "rnn", &["--seed", "11", "--deterministic", "true"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(
        fs::read(a.join("model.ckpt")).unwrap(),
        fs::read(b.join("model.ckpt")).unwrap()
    );
}

#[test]
fn missing_data_is_a_usage_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`data`"), "{}", stderr(&o));

    let manifest = dir.path().join("only-dev.manifest");
    fs::write(&manifest, "dev=dev.csv\n").unwrap();
    let o = run(&["train", "--data", manifest.to_str().unwrap(), "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`train`"), "{}", stderr(&o));
}

#[test]
fn bad_flags_and_config_values_exit_2() {
    assert_eq!(run(&["train", "--family", "lstm", "--data", "x"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        run(&["top1", "--checkpoint", "x", "--hsv", "1,2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["top1", "--checkpoint", "x", "--hsv", "10,200,50"]).status.code(),
        Some(2)
    );
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        format!(
            "family = atomic\nseed = 4\nmax_epochs = 1\ndata = {}\nout = from-file\n",
            manifest.display()
        ),
    )
    .unwrap();
    let out = dir.path().join("from-flag");
    let o = run(&[
        "train",
        "--config",
        conf.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run-meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["family"], "atomic");
    assert_eq!(meta["config"]["training"]["seed"], 5);
    assert_eq!(meta["config"]["training"]["max_epochs"], 1);
    assert!(!dir.path().join("from-file").exists());
}

#[test]
fn eval_report_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let out = dir.path().join("run");
    assert!(train(&manifest, &out, "hm", &[]).status.success());
    let ckpt = out.join("model.ckpt");
    let report = dir.path().join("dev.json");
    let eval = |path: &Path| {
        run(&[
            "eval",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--data",
            manifest.to_str().unwrap(),
            "--split",
            "dev",
            "--out",
            path.to_str().unwrap(),
        ])
    };
    let o = eval(&report);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = EvalReport::load(&report).unwrap();
    assert_eq!(r.n, 80);
    assert_eq!(r.split, "dev");
    assert!(r.perplexity > 1.0 && r.aic > 0.0 && r.k > 0 && r.ell_bits > 0.0);
    assert!(dir.path().join("dev.json.run-meta.json").is_file());

    let again = dir.path().join("dev2.json");
    assert!(eval(&again).status.success());
    let mut r2 = EvalReport::load(&again).unwrap();
    r2.created = r.created;
    assert_eq!(r2, r);

    let o = run(&["compare", report.to_str().unwrap(), again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("p = 1 "), "{}", stdout(&o));

    let test_report = dir.path().join("test.json");
    let o = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--data",
        manifest.to_str().unwrap(),
        "--split",
        "test",
        "--out",
        test_report.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let mut short = EvalReport::load(&test_report).unwrap();
    short.log2_probs.truncate(10);
    short.hits.truncate(10);
    short.split = "dev".into();
    short.save(&test_report).unwrap();
    let o = run(&["compare", report.to_str().unwrap(), test_report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn uniform_model_has_perplexity_two() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![
        (10.0, 50.0, 50.0, "a".to_string()),
        (10.0, 50.0, 50.0, "b".to_string()),
    ];
    write_csv(&dir.path().join("train.csv"), &rows);
    write_csv(&dir.path().join("dev.csv"), &rows);
    let manifest = dir.path().join("m");
    fs::write(&manifest, "train=train.csv\ndev=dev.csv\n").unwrap();
    let out = dir.path().join("hm");
    assert!(train(&manifest, &out, "hm", &[]).status.success());
    let report = dir.path().join("r.json");
    let o = run(&[
        "eval",
        "--checkpoint",
        out.join("model.ckpt").to_str().unwrap(),
        "--data",
        manifest.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(EvalReport::load(&report).unwrap().perplexity, 2.0);
}

#[test]
fn sample_top1_and_color_flags() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let out = dir.path().join("run");
    assert!(train(&manifest, &out, "rnn", &[]).status.success());
    let ckpt = out.join("model.ckpt");
    let ck = ckpt.to_str().unwrap();

    let sample = || run(&["sample", "--checkpoint", ck, "--hsv", "0,0,0", "--n", "5", "--seed", "7"]);
    let a = sample();
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a).lines().count(), 5);
    assert!(stdout(&a).lines().all(|l| !l.trim().is_empty()));
    assert_eq!(stdout(&a), stdout(&sample()));

    let via_hsv = run(&["top1", "--checkpoint", ck, "--hsv", "120,100,100"]);
    let via_hsl = run(&["top1", "--checkpoint", ck, "--hsl", "120,100,50"]);
    assert!(via_hsv.status.success());
    assert_eq!(stdout(&via_hsv), stdout(&via_hsl));
    assert_eq!(stdout(&via_hsv).lines().count(), 1);

    let o = run(&["top1", "--checkpoint", ck, "--hsv", "1,2,3", "--hsl", "1,2,3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn denotation_writes_images_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let out = dir.path().join("run");
    assert!(train(&manifest, &out, "rnn", &[]).status.success());
    let ck = out.join("model.ckpt");
    let img = dir.path().join("img");
    let o = run(&[
        "denotation",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--desc",
        "greenish",
        "--grid",
        "12x5x4",
        "--out",
        img.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let l = fs::read(img.join("greenish-L.pgm")).unwrap();
    let r = fs::read(img.join("greenish-R.pgm")).unwrap();
    assert!(l.starts_with(b"P5\n5 4\n255\n"));
    assert_eq!(l.len(), b"P5\n5 4\n255\n".len() + 20);
    assert!(r.starts_with(b"P5\n12 4\n255\n"));
    let meta = fs::read_to_string(img.join("greenish.meta")).unwrap();
    assert!(meta.contains("grid=12x5x4"), "{meta}");

    let o = run(&[
        "denotation",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--desc",
        "zzyzx qwerty",
        "--out",
        img.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn corrupt_checkpoint_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ckpt");
    fs::write(&bad, b"CLRDESC\0\x01\0\0\0").unwrap();
    let o = run(&["top1", "--checkpoint", bad.to_str().unwrap(), "--hsv", "1,2,3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("offset"), "{}", stderr(&o));
}
