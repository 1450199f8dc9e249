use std::path::Path;
use std::process::{Command, Output};

fn fedleak(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedleak"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .env_remove("FEDLEAK_OUT")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = fedleak(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL: &[&str] = &["generate", "--samples", "2000", "--snps", "20", "--causal", "4"];

fn trained(dir: &Path) {
    ok(dir, SMALL);
    ok(dir, &["train", "--jobs", "2"]);
}

fn read(dir: &Path, f: &str) -> String {
    std::fs::read_to_string(dir.join(f)).unwrap()
}

#[test]
fn generate_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(
        a.path(),
        &["generate", "--seed", "7", "--samples", "1000", "--snps", "10"],
    );
    ok(
        b.path(),
        &["generate", "--seed", "7", "--samples", "1000", "--snps", "10"],
    );
    for f in ["dataset.csv", "shards.json", "run.toml"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn indivisible_samples_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedleak(dir.path(), &["generate", "--samples", "1001", "--clients", "5"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn default_generate_reports_balanced_labels() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["generate"]);
    let rate: f64 = stdout
        .split("positive_rate ")
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.45..=0.55).contains(&rate), "{rate}");
    assert!(stdout.contains("client 4 train 3200 test 800"));
}

#[test]
fn train_without_dataset_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedleak(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("dataset.csv") && stderr(&out).contains("generate"));
}

#[test]
fn corrupt_dataset_is_io_class_error_with_line() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), SMALL);
    let text = read(dir.path(), "dataset.csv");
    let broken = text.replacen("\n0,", "\n3,", 1);
    std::fs::write(dir.path().join("dataset.csv"), broken).unwrap();
    let out = fedleak(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("dataset.csv:"), "{}", stderr(&out));
}

#[test]
fn train_writes_rounds_and_records_mitigation() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), SMALL);
    ok(
        dir.path(),
        &["train", "--rounds", "10", "--clip-norm", "1", "--noise-sigma", "0.1"],
    );
    assert_eq!(read(dir.path(), "rounds.jsonl").lines().count(), 10);
    assert!(dir.path().join("rounds/round_010.toml").exists());
    let manifest = read(dir.path(), "run.toml");
    assert!(
        manifest.contains("clip_norm = 1.0") && manifest.contains("noise_sigma = 0.1"),
        "{manifest}"
    );
}

#[test]
fn bare_mitigation_flags_use_defaults() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), SMALL);
    ok(dir.path(), &["train", "--clip-norm", "--noise-sigma"]);
    let manifest = read(dir.path(), "run.toml");
    assert!(
        manifest.contains("clip_norm = 0.05") && manifest.contains("noise_sigma = 0.01"),
        "{manifest}"
    );
}

#[test]
fn retraining_and_jobs_do_not_change_the_model() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), SMALL);
    ok(dir.path(), &["train", "--jobs", "1", "--noise-sigma", "0.01"]);
    let first = read(dir.path(), "model.toml");
    ok(dir.path(), &["train", "--jobs", "4", "--noise-sigma", "0.01"]);
    assert_eq!(first, read(dir.path(), "model.toml"));
}

#[test]
fn bad_mitigation_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), SMALL);
    let out = fedleak(dir.path(), &["train", "--clip-norm", "-1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn fixed_threshold_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    ok(
        dir.path(),
        &["attack", "--attack", "gradient_mia", "--threshold", "0.45"],
    );
    let log = read(dir.path(), "attack_logs.csv");
    let rows: Vec<&str> = log.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("gradient_mia,5,0.450000,"), "{}", rows[0]);
}

#[test]
fn all_attacks_cover_every_type() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    ok(dir.path(), &["attack", "--attack", "all"]);
    let log = read(dir.path(), "attack_logs.csv");
    for kind in ["mia,", "gradient_mia,", "label_inference,5,,"] {
        assert!(log.lines().any(|l| l.starts_with(kind)), "{kind}");
    }
}

#[test]
fn sweep_logs_one_row_per_grid_value() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    ok(dir.path(), &["attack", "--attack", "mia", "--sweep", "0.1:0.9:0.05"]);
    assert_eq!(read(dir.path(), "attack_logs.csv").lines().count(), 18);
}

#[test]
fn per_client_scope_logs_each_client() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    ok(
        dir.path(),
        &[
            "attack",
            "--attack",
            "mia",
            "--threshold",
            "0.5",
            "--scope",
            "per_client",
        ],
    );
    let log = read(dir.path(), "attack_logs.csv");
    assert_eq!(log.lines().filter(|l| l.starts_with("mia,1,0.500000,")).count(), 5);
}

#[test]
fn unknown_attack_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedleak(dir.path(), &["attack", "--attack", "shadow"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("mia, gradient_mia, label_inference, all"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn snapshot_attack_reads_historical_round() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    ok(
        dir.path(),
        &[
            "attack",
            "--attack",
            "mia",
            "--threshold",
            "0.5",
            "--snapshot-round",
            "0",
        ],
    );
    // the zero model assigns 0.5 to every sample, so all are predicted members
    assert!(read(dir.path(), "attack_logs.csv").contains("mia,5,0.500000,0.500000,1.000000,0.666667"));
    let out = fedleak(dir.path(), &["attack", "--snapshot-round", "99"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn analyze_before_attack_names_stage() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    let out = fedleak(dir.path(), &["analyze"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("fedleak attack"), "{}", stderr(&out));
}

#[test]
fn analyze_writes_four_tables() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    ok(dir.path(), &["attack", "--attack", "mia"]);
    ok(dir.path(), &["attack", "--attack", "label_inference"]);
    ok(dir.path(), &["analyze", "--bins", "12"]);
    let hist = read(dir.path(), "hist_gradnorm.csv");
    assert_eq!(hist.lines().count(), 13);
    let counted: u64 = hist
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<u64> = l.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
            f[0] + f[1]
        })
        .sum();
    assert_eq!(counted, 800);
    assert_eq!(read(dir.path(), "pca_coords.csv").lines().count(), 2001);
    assert_eq!(read(dir.path(), "snp_corr.csv").lines().count(), 21);
    let radar = read(dir.path(), "radar.csv");
    assert_eq!(
        radar
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap())
            .collect::<Vec<_>>(),
        ["mia", "label_inference"]
    );
}

#[test]
fn report_verifies_and_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    ok(dir.path(), &["attack", "--gradient-dump"]);
    ok(dir.path(), &["analyze"]);
    let out = fedleak(dir.path(), &["report", "--verify"]);
    assert_eq!(out.status.code(), Some(1), "no report yet");
    ok(dir.path(), &["report"]);
    ok(dir.path(), &["report", "--verify"]);

    let report: toml::Table = toml::from_str(&read(dir.path(), "report.toml")).unwrap();
    let digests = report["digests"].as_table().unwrap();
    assert!(digests.contains_key("gradient_dump.csv") && digests.contains_key("rounds/round_010.toml"));
    let radar = read(dir.path(), "radar.csv");
    let metrics = report["metrics"].as_array().unwrap();
    assert_eq!(metrics.len(), radar.lines().count() - 1);
    for (m, line) in metrics.iter().zip(radar.lines().skip(1)) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(m["attack_type"].as_str().unwrap(), f[0]);
        for (key, v) in ["precision", "recall", "f1"].iter().zip(&f[1..]) {
            assert_eq!(m[*key].as_float().unwrap(), v.parse::<f64>().unwrap());
        }
    }

    let path = dir.path().join("pca_coords.csv");
    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 2;
    bytes[last] ^= 1;
    std::fs::write(&path, bytes).unwrap();
    let out = fedleak(dir.path(), &["report", "--verify"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("pca_coords.csv"));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fedleak"))
        .args(["generate", "--samples", "500", "--snps", "5", "--causal", "2"])
        .env("FEDLEAK_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("dataset.csv").exists());
}

#[test]
fn seed_is_remembered_between_stages() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let small_seeded: Vec<&str> = SMALL.iter().copied().chain(["--seed", "3"]).collect();
    ok(a.path(), &small_seeded);
    ok(a.path(), &["train"]);
    ok(b.path(), &small_seeded);
    ok(b.path(), &["train", "--seed", "3"]);
    assert_eq!(read(a.path(), "model.toml"), read(b.path(), "model.toml"));
    assert!(read(a.path(), "run.toml").starts_with("seed = 3\n"));
}
