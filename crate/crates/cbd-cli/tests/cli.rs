//! End-to-end tests of the `cbd` binary: spec'd exit codes, line formats,
//! and the round trips between subcommands.

use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbd"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/prbox.json")
}

#[test]
fn measure_prbox_cnt1_exact() {
    let out = run(&["measure", "--system", "prbox", "--measures", "cnt1", "--mode", "rational"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "cnt1 1/2 contextual\n");
}

#[test]
fn measure_defaults_on_fixture_file() {
    let path = fixture_path();
    let out = run(&["measure", "--system", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines,
        vec![
            "cnt1 1/2 contextual",
            "cnt2 1/2 contextual",
            "cnt3 1/3 contextual",
            "cntf 1 contextual",
        ]
    );
}

#[test]
fn check_exit_codes() {
    let out = run(&["check", "--system", "deterministic"]);
    assert_eq!(stdout(&out), "noncontextual\n");
    assert_eq!(code(&out), 1);

    let out = run(&["check", "--system", "prbox"]);
    assert_eq!(stdout(&out), "contextual\n");
    assert_eq!(code(&out), 0);
}

#[test]
fn ncnt2_on_contextual_system_exits_4() {
    let out = run(&["measure", "--measures", "ncnt2", "--system", "prbox"]);
    assert_eq!(code(&out), 4);
    assert_eq!(stdout(&out), "");
    assert!(!out.stderr.is_empty());
}

#[test]
fn ncnt2_in_float_mode() {
    let out = run(&["measure", "--system", "coins", "--measures", "ncnt2", "--mode", "float"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "ncnt2 0.25 noncontextual\n");
}

#[test]
fn cyclic_emits_the_prbox_system() {
    let out = run(&["cyclic", "--n", "4", "--correlations", "1,1,1,-1"]);
    assert_eq!(code(&out), 0);
    let emitted: cbd::system::System<cbd::BigRational> =
        cbd::io::parse_system_str(&stdout(&out)).expect("emitted file parses");
    let fixture: cbd::system::System<cbd::BigRational> =
        cbd::io::parse_system_file(&fixture_path()).expect("fixture parses");
    assert_eq!(emitted, fixture);
}

#[test]
fn cyclic_accepts_leading_negative_expectations() {
    let out = run(&["cyclic", "--n", "3", "--correlations", "-1,-1,-1"]);
    assert_eq!(code(&out), 0);
    let emitted: cbd::system::System<cbd::BigRational> =
        cbd::io::parse_system_str(&stdout(&out)).expect("emitted file parses");
    assert_eq!(emitted.format().n_contexts(), 3);

    let out = run(&[
        "cyclic",
        "--n",
        "2",
        "--correlations",
        "-1/2,1/2",
        "--marginals",
        "-1/4,0,0,1/4",
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn cyclic_rejects_bad_shapes() {
    let out = run(&["cyclic", "--n", "3", "--correlations", "1,1"]);
    assert_eq!(code(&out), 2);

    let out = run(&["cyclic", "--n", "2", "--correlations", "1,x"]);
    assert_eq!(code(&out), 2);

    let out = run(&["cyclic", "--n", "2", "--correlations", "1,1", "--marginals", "0,0,0"]);
    assert_eq!(code(&out), 2);

    // Expectations outside [-1, 1] describe no distribution.
    let out = run(&["cyclic", "--n", "2", "--correlations", "2,0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn random_is_reproducible_and_seed_sensitive() {
    let a = run(&["random", "--format", "cyclic-3", "--seed", "7"]);
    let b = run(&["random", "--format", "cyclic-3", "--seed", "7"]);
    let c = run(&["random", "--format", "cyclic-3", "--seed", "8"]);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    assert_ne!(stdout(&a), stdout(&c));

    let system: cbd::system::System<cbd::BigRational> =
        cbd::io::parse_system_str(&stdout(&a)).expect("random output parses");
    assert_eq!(system.format().n_contexts(), 3);
}

#[test]
fn random_reuses_the_format_of_a_file() {
    let path = fixture_path();
    let out = run(&["random", "--format", path.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(code(&out), 0);
    let system: cbd::system::System<cbd::BigRational> =
        cbd::io::parse_system_str(&stdout(&out)).expect("random output parses");
    let fixture: cbd::system::System<cbd::BigRational> =
        cbd::io::parse_system_file(&path).expect("fixture parses");
    assert_eq!(system.format(), fixture.format());
    assert_ne!(system, fixture);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&["measure", "--system", "no-such-thing"])), 2);
    assert_eq!(code(&run(&["measure", "--system", "prbox", "--measures", "cnt9"])), 2);
    assert_eq!(code(&run(&["random", "--format", "hexagonal"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["verify", "--suite", "large"])), 2);
}

#[test]
fn variable_cap_from_environment() {
    let out = run_env(&["check", "--system", "prbox"], "CBD_MAX_VARS", "4");
    assert_eq!(code(&out), 3);

    let out = run_env(&["check", "--system", "prbox"], "CBD_MAX_VARS", "banana");
    assert_eq!(code(&out), 2);

    let out = run_env(&["check", "--system", "prbox"], "CBD_MAX_VARS", "8");
    assert_eq!(code(&out), 0);
}

#[test]
fn pm1_files_load_through_the_cli() {
    let path = std::env::temp_dir().join(format!("cbd-cli-pm1-{}.json", std::process::id()));
    std::fs::write(
        &path,
        r#"{"convention": "pm1", "n": 4, "correlations": [1, 1, 1, -1],
           "marginals": [0, 0, 0, 0, 0, 0, 0, 0]}"#,
    )
    .expect("temp file writes");
    let out = run(&["check", "--system", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(stdout(&out), "contextual\n");
    assert_eq!(code(&out), 0);
}

#[test]
fn verify_small_suite_passes() {
    let out = run(&["verify", "--suite", "small"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.lines().count() >= 20);
    assert!(text.lines().all(|l| l.ends_with("pass")));
}
