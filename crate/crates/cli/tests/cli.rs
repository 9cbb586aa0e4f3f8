//! Exit-code and output contracts of the `keyfold` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn keyfold() -> Command {
    Command::new(env!("CARGO_BIN_EXE_keyfold"))
}

fn workspace_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn sim_converging_scenario_exits_zero_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let output = keyfold()
        .arg("sim")
        .arg(workspace_path("scenarios/seven_member_join.toml"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", stdout(&output));
    let text = stdout(&output);
    assert!(text.contains("updated=[5, 2, 0]"), "{text}");
    assert!(text.contains("broadcast=[5, 2]"));
    assert!(dir.path().join("seven_member_join.report.txt").exists());
    let csv = std::fs::read_to_string(dir.path().join("seven_member_join.report.csv")).unwrap();
    assert!(csv.starts_with("event,kind,member,converged,"));
    assert!(csv.lines().count() >= 3);
}

#[test]
fn sim_report_dir_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let output = keyfold()
        .arg("sim")
        .arg(workspace_path("scenarios/seven_member_join.toml"))
        .env("KEYFOLD_REPORT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(dir.path().join("seven_member_join.report.txt").exists());
}

#[test]
fn sim_delivery_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let output = keyfold()
        .arg("sim")
        .arg(workspace_path("scenarios/sixteen_member_noisy_uncoded.toml"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", stdout(&output));
    assert!(stdout(&output).contains("failures=true"));
}

#[test]
fn sim_usage_errors_exit_one() {
    let output = keyfold().arg("sim").arg("/nonexistent.toml").output().unwrap();
    assert_eq!(output.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[group]\nprime = \"24\"\nbase = \"5\"\n[sim]\nseed = 1\n").unwrap();
    let output = keyfold().arg("sim").arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("not prime"));
}

#[test]
fn ldpc_encode_decode_roundtrip() {
    let output = keyfold()
        .args(["ldpc", "encode", "--matrix", "builtin-8x16", "--bits", "11010011"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let word = stdout(&output).trim().to_string();
    assert_eq!(word, "1101001101000100");

    let output = keyfold()
        .args(["ldpc", "decode", "--matrix", "builtin-8x16", "--bits", &word])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout(&output).contains("info=11010011 trials=1"));

    // Every single wire flip comes back corrected.
    for pos in 0..16 {
        let output = keyfold()
            .args([
                "ldpc",
                "roundtrip",
                "--matrix",
                "builtin-8x16",
                "--bits",
                "11010011",
                "--flip",
                &pos.to_string(),
            ])
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0), "flip {pos}: {}", stdout(&output));
        assert!(stdout(&output).contains("ok"));
    }
}

#[test]
fn ldpc_file_matrix_matches_builtin() {
    let output = keyfold()
        .args(["ldpc", "encode", "--bits", "11010011", "--matrix"])
        .arg(workspace_path("matrices/ldpc_8x16.txt"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert_eq!(stdout(&output).trim(), "1101001101000100");
}

#[test]
fn ldpc_unrecoverable_word_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.txt");
    std::fs::write(&toy, "3 4\n1 1 0 0\n0 1 1 0\n0 0 1 1\n").unwrap();
    // The only codewords are 0000 and 1111; this word is equidistant.
    let output = keyfold()
        .args(["ldpc", "decode", "--bits", "0110", "--matrix"])
        .arg(&toy)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "{}", stdout(&output));
    let text = stdout(&output);
    assert!(text.contains("UNRECOVERABLE"), "{text}");
    assert!(text.contains("syndrome=111"));
}

#[test]
fn ldpc_bad_bits_exit_one() {
    let output = keyfold()
        .args(["ldpc", "encode", "--matrix", "builtin-8x16", "--bits", "11x"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));

    let output = keyfold()
        .args(["ldpc", "encode", "--matrix", "builtin-8x16", "--bits", "111"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn bench_csv_is_stable_apart_from_times() {
    let run = || -> Vec<String> {
        let output = keyfold()
            .args(["bench", "--sizes", "2,4,8", "--seed", "5"])
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0));
        stdout(&output)
            .lines()
            .skip(1)
            .take(6)
            .map(|line| {
                // Blank the hardware-dependent time column.
                let mut cols: Vec<&str> = line.split(',').collect();
                cols[2] = "-";
                cols.join(",")
            })
            .collect()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    assert!(a[0].starts_with("2,etf,-,1,1"), "{}", a[0]);
    assert!(a[1].starts_with("2,plain-dh-baseline,-,1,1"));
}
