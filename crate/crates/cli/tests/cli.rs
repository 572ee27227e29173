use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fock_tomo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fock-tomo"))
        .current_dir(dir)
        .env_remove("FOCK_TOMO_CONFIG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = fock_tomo(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn key(report: &str, name: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(name)?.strip_prefix('='))
        .unwrap_or_else(|| panic!("no {name} in report"))
        .to_string()
}

fn key_f64(report: &str, name: &str) -> f64 {
    key(report, name).parse().unwrap()
}

fn without_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# generated_at_unix="))
        .collect::<Vec<_>>()
        .join("\n")
}

const REFERENCE_RUN: &[&str] = &[
    "simulate",
    "--eta",
    "0.553",
    "--n-vacuum",
    "200000",
    "--n-fock",
    "12000",
    "--seed",
    "42",
    "-o",
    "run.txt",
];

#[test]
fn simulate_writes_one_line_per_sample() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), REFERENCE_RUN);
    let text = fs::read_to_string(tmp.path().join("run.txt")).unwrap();
    let body = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(body, 212_000);
}

#[test]
fn simulate_is_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let args = [
        "simulate",
        "--n-vacuum",
        "5000",
        "--n-fock",
        "3000",
        "--seed",
        "9",
        "--scale",
        "3",
        "--offset",
        "-1",
    ];
    ok(tmp.path(), &[&args[..], &["-o", "a.txt"]].concat());
    ok(tmp.path(), &[&args[..], &["-o", "b.txt"]].concat());
    assert_eq!(
        fs::read(tmp.path().join("a.txt")).unwrap(),
        fs::read(tmp.path().join("b.txt")).unwrap()
    );
}

#[test]
fn reference_scale_reconstruction() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), REFERENCE_RUN);
    let report = ok(tmp.path(), &["reconstruct", "run.txt", "-o", "rec"]);
    let eta = key_f64(&report, "efficiency.eta_hat");
    assert!((0.51..=0.60).contains(&eta), "eta_hat = {eta}");
    assert!(key_f64(&report, "wigner_origin.value") < 0.0);
    for name in ["report.txt", "report.json", "wigner.tsv", "histogram.tsv"] {
        assert!(tmp.path().join("rec").join(name).is_file(), "{name}");
    }
    let table = fs::read_to_string(tmp.path().join("rec/wigner.tsv")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("# bandwidth=")));
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 401);

    ok(tmp.path(), &["reconstruct", "run.txt", "-o", "again"]);
    for name in ["report.txt", "report.json", "wigner.tsv", "histogram.tsv"] {
        let a = fs::read_to_string(tmp.path().join("rec").join(name)).unwrap();
        let b = fs::read_to_string(tmp.path().join("again").join(name)).unwrap();
        assert_eq!(without_timestamp(&a), without_timestamp(&b), "{name}");
    }
}

#[test]
fn vacuum_only_run() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &["simulate", "--n-fock", "0", "--seed", "3", "-o", "vac.txt"],
    );
    let report = ok(tmp.path(), &["reconstruct", "vac.txt", "-o", "rec"]);
    assert_eq!(key(&report, "analyzed_source"), "V");
    let eta = key_f64(&report, "efficiency.eta_hat");
    assert!(
        eta <= 3.0 * key_f64(&report, "efficiency.eta_stderr") + 1e-12,
        "eta_hat = {eta}"
    );
    let rho = key_f64(&report, "diagonal.rho_00");
    assert!((rho - 1.0).abs() <= 3.0 * key_f64(&report, "diagonal.sigma_00"));
}

#[test]
fn corrupt_header_leaves_no_output() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &["simulate", "--n-vacuum", "5000", "--n-fock", "2000", "-o", "run.txt"],
    );
    let text = fs::read_to_string(tmp.path().join("run.txt")).unwrap();
    fs::write(
        tmp.path().join("bad.txt"),
        text.replace("# n_fock=2000", "# n_fock=twenty"),
    )
    .unwrap();
    let out = fock_tomo(tmp.path(), &["reconstruct", "bad.txt", "-o", "rec"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!tmp.path().join("rec").exists());
}

#[test]
fn full_pipeline_agrees_with_budget() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), REFERENCE_RUN);
    ok(tmp.path(), &["reconstruct", "run.txt", "-o", "rec"]);
    let budget = ok(tmp.path(), &["budget", "-o", "budget.json"]);
    assert!((key_f64(&budget, "eta_predicted") - 0.577_229_31).abs() < 1e-8);
    let merged = ok(
        tmp.path(),
        &[
            "report",
            "--reconstruction",
            "rec/report.json",
            "--budget",
            "budget.json",
            "-o",
            "final",
        ],
    );
    assert_eq!(key(&merged, "agreement.passes"), "true");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("final/report.json")).unwrap()).unwrap();
    assert_eq!(json["agreement"]["passes"], true);
}

#[test]
fn budget_factor_file() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("f.txt"),
        "# test\nhalf 0.5 0.1 direct\nvis 0.9 0 visibility_squared\n",
    )
    .unwrap();
    let out = ok(tmp.path(), &["budget", "--factors", "f.txt"]);
    assert!((key_f64(&out, "eta_predicted") - 0.405).abs() < 1e-12);
    fs::write(tmp.path().join("g.txt"), "half 1.5 0 direct\n").unwrap();
    assert_eq!(
        fock_tomo(tmp.path(), &["budget", "--factors", "g.txt"]).status.code(),
        Some(3)
    );
}

#[test]
fn report_without_budget_marks_it_absent() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &["simulate", "--n-vacuum", "20000", "--n-fock", "5000", "-o", "run.txt"],
    );
    ok(tmp.path(), &["reconstruct", "run.txt", "-o", "rec"]);
    let merged = ok(
        tmp.path(),
        &["report", "--reconstruction", "rec/report.json", "-o", "final"],
    );
    assert_eq!(key(&merged, "budget"), "absent");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("final/report.json")).unwrap()).unwrap();
    assert!(json["budget"].is_null());
}

#[test]
fn mismatched_versions_are_rejected() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &["simulate", "--n-vacuum", "20000", "--n-fock", "5000", "-o", "run.txt"],
    );
    ok(tmp.path(), &["reconstruct", "run.txt", "-o", "rec"]);
    ok(tmp.path(), &["budget", "-o", "budget.json"]);
    let path = tmp.path().join("rec/report.json");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(
        &path,
        text.replacen("\"format_version\": 1", "\"format_version\": 99", 1),
    )
    .unwrap();
    let out = fock_tomo(
        tmp.path(),
        &["report", "--reconstruction", "rec/report.json", "-o", "final"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
    assert!(!tmp.path().join("final").exists());

    let b = tmp.path().join("budget.json");
    let text = fs::read_to_string(&b).unwrap();
    fs::write(&b, text.replacen("\"format_version\": 1", "\"format_version\": 2", 1)).unwrap();
    fs::write(&path, fs::read_to_string(&path).unwrap().replacen("99", "1", 1)).unwrap();
    let out = fock_tomo(
        tmp.path(),
        &[
            "report",
            "--reconstruction",
            "rec/report.json",
            "--budget",
            "budget.json",
            "-o",
            "final",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
}

#[test]
fn exit_status_classes() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(fock_tomo(tmp.path(), &["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        fock_tomo(tmp.path(), &["simulate", "--eta", "1.5", "-o", "x"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        fock_tomo(tmp.path(), &["reconstruct", "missing.txt"]).status.code(),
        Some(5)
    );
    assert!(fock_tomo(tmp.path(), &["--help"]).status.success());
}

#[test]
fn config_file_supplies_defaults() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("cfg"),
        "n_vacuum=3000\nn-fock=1000\nseed=5\nbandwidth-scale=2\n",
    )
    .unwrap();
    let run = |extra: &[&str], out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_fock-tomo"))
            .current_dir(tmp.path())
            .env("FOCK_TOMO_CONFIG", "cfg")
            .args([&["simulate", "-o", out][..], extra].concat())
            .status()
            .unwrap();
        assert!(status.success());
        fs::read_to_string(tmp.path().join(out)).unwrap()
    };
    let text = run(&[], "a.txt");
    assert!(text.contains("# n_vacuum=3000") && text.contains("# n_fock=1000") && text.contains("# seed=5"));
    let text = run(&["--seed", "6"], "b.txt");
    assert!(text.contains("# seed=6"));

    fs::write(tmp.path().join("bad"), "no_such_flag=1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fock-tomo"))
        .current_dir(tmp.path())
        .env("FOCK_TOMO_CONFIG", "bad")
        .args(["budget"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
