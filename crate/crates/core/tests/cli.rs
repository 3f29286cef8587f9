use std::path::Path;
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "--set=globe.n=300",
    "--set=globe.r=8",
    "--set=models.hidden=8",
    "--set=models.k_sae=6",
    "--set=models.bb_epochs=2",
    "--set=models.sae_epochs=2",
    "--set=models.cbm_epochs=2",
];

fn frustlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frustlab"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("spawn frustlab")
}

#[test]
fn theory_check_is_reproducible_and_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = [
        "theory-check",
        "--preset",
        "quick",
        "--reps",
        "4",
        "--seed",
        "9",
        "--set",
        "theory.n_mc=5000",
    ];
    let first = frustlab(&[&args[..], &["--workers", "3"]].concat(), &a);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let second = frustlab(&[&args[..], &["--workers", "1"]].concat(), &b);
    assert!(second.status.success());
    let runs = std::fs::read(a.join("runs.csv")).unwrap();
    assert_eq!(runs, std::fs::read(b.join("runs.csv")).unwrap());
    assert_eq!(String::from_utf8(runs).unwrap().lines().count(), 5);
    for file in ["tests.csv", "timings.csv", "summary.txt", "config.toml"] {
        assert!(a.join(file).exists(), "{file}");
    }
}

#[test]
fn written_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let out = frustlab(
        &[
            "theory-check",
            "--preset",
            "quick",
            "--reps",
            "2",
            "--set",
            "theory.n_mc=3000",
        ],
        &first,
    );
    assert!(out.status.success());
    let cfg = first.join("config.toml");
    let second = dir.path().join("second");
    let out = frustlab(
        &[
            "theory-check",
            "--preset",
            "quick",
            "--config",
            cfg.to_str().unwrap(),
        ],
        &second,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        std::fs::read(first.join("runs.csv")).unwrap(),
        std::fs::read(second.join("runs.csv")).unwrap()
    );
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["globe", "--p-low", "0.9", "--p-high", "0.1"][..],
        &["globe", "--preset", "enormous"],
        &["synthetic", "--set", "synthetic.nonsense=1"],
        &["theory-check", "--set", "theory.n_mc=many"],
    ] {
        let out = frustlab(args, dir.path());
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
    }
}

#[test]
fn missing_input_file_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = frustlab(
        &["realworld", "--input", "/nonexistent/emb.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_fisher_windows_produce_null_rows_and_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        &[
            "globe",
            "--preset",
            "quick",
            "--reps",
            "2",
            "--p-low",
            "0.49999999",
            "--p-high",
            "0.5",
        ][..],
        TINY,
    ]
    .concat();
    let out = frustlab(&args, dir.path());
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut reader = csv::Reader::from_path(dir.path().join("runs.csv")).unwrap();
    let err = reader
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == "error")
        .unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| !r[err].is_empty()));
}

#[test]
fn globe_smoke_run_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let args = [&["globe", "--preset", "quick", "--reps", "2"][..], TINY].concat();
    let out = frustlab(&args, dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let tests = std::fs::read_to_string(dir.path().join("tests.csv")).unwrap();
    assert!(
        tests
            .lines()
            .any(|l| l.starts_with("gamma_fisher,sphere,cylinder")),
        "{tests}"
    );
}
