//! End-to-end checks of the binary: every subcommand runs, output is
//! deterministic under a fixed seed, and failures exit with the right codes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-code"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary should launch");
    assert!(
        out.status.success(),
        "command {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_of(args: &[&str]) -> String {
    String::from_utf8(run_ok(args).stdout).expect("stdout should be UTF-8")
}

fn path_str(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().expect("temp path").to_owned()
}

// ---------------------------------------------------------------------------
// gen + Matrix Market round trip
// ---------------------------------------------------------------------------

#[test]
fn gen_writes_a_loadable_matrix_and_reruns_identically() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = path_str(dir.path(), "a.mtx");

    let msg = stdout_of(&[
        "gen", "--rows", "30", "--cols", "20", "--nnz", "55", "--seed", "9", "--out", &out,
    ]);
    assert!(msg.contains("30 x 20"), "report line: {msg}");
    assert!(msg.contains("55 nonzeros"), "report line: {msg}");

    let first = std::fs::read_to_string(&out).expect("written file");
    assert!(first.starts_with("%%MatrixMarket matrix coordinate real general"));
    assert_eq!(first.lines().count(), 2 + 55);

    // Same seed, same bytes.
    run_ok(&[
        "gen", "--rows", "30", "--cols", "20", "--nnz", "55", "--seed", "9", "--out", &out,
    ]);
    let second = std::fs::read_to_string(&out).expect("rewritten file");
    assert_eq!(first, second);
}

// ---------------------------------------------------------------------------
// threshold
// ---------------------------------------------------------------------------

#[test]
fn threshold_output_is_deterministic_json() {
    let args = [
        "threshold", "--dist", "wave", "--mn", "9", "--trials", "40", "--seed", "7",
    ];
    let first = stdout_of(&args);
    let second = stdout_of(&args);
    assert_eq!(first, second);

    let parsed: serde_json::Value = serde_json::from_str(&first).expect("stdout is JSON");
    let mean = parsed["mean"].as_f64().expect("mean field");
    assert!(mean >= 9.0, "threshold cannot beat the block count: {mean}");
}

#[test]
fn threshold_writes_a_histogram_csv() {
    let dir = tempfile::tempdir().expect("tempdir");
    let hist = path_str(dir.path(), "hist.csv");
    run_ok(&[
        "threshold", "--dist", "robust", "--mn", "4", "--trials", "25", "--seed", "3",
        "--hist-out", &hist,
    ]);
    let text = std::fs::read_to_string(&hist).expect("histogram file");
    assert!(text.starts_with("K,count\n"), "header: {text}");
    assert!(text.lines().count() >= 2);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[test]
fn simulate_end_to_end_with_csv() {
    let dir = tempfile::tempdir().expect("tempdir");
    let csv = path_str(dir.path(), "trials.csv");
    let args = [
        "simulate", "--scheme", "sparse", "--m", "2", "--n", "2", "--N", "8",
        "--stragglers", "1", "--trials", "4", "--seed", "1", "--rows", "60", "--cols", "60",
        "--nnz", "300", "--csv-out", &csv,
    ];
    let summary = stdout_of(&args);
    assert!(summary.contains("sparse-code/v1"), "summary: {summary}");
    assert!(summary.contains("\"sparse\""), "summary: {summary}");

    let table = std::fs::read_to_string(&csv).expect("csv file");
    assert_eq!(table.lines().count(), 1 + 4, "one header plus one row per trial");
    assert!(table.starts_with("trial,scheme,k_used,"));

    // Determinism end to end.
    let again = stdout_of(&args);
    assert_eq!(summary, again);
    let table_again = std::fs::read_to_string(&csv).expect("csv file");
    assert_eq!(table, table_again);
}

#[test]
fn simulate_accepts_matrix_market_inputs() {
    let dir = tempfile::tempdir().expect("tempdir");
    let a = path_str(dir.path(), "a.mtx");
    let b = path_str(dir.path(), "b.mtx");
    run_ok(&[
        "gen", "--rows", "40", "--cols", "40", "--nnz", "160", "--seed", "11", "--out", &a,
    ]);
    run_ok(&[
        "gen", "--rows", "40", "--cols", "40", "--nnz", "160", "--seed", "12", "--out", &b,
    ]);
    let summary = stdout_of(&[
        "simulate", "--scheme", "uncoded", "--m", "2", "--n", "2", "--N", "4",
        "--trials", "2", "--seed", "5", "--input-a", &a, "--input-b", &b,
    ]);
    assert!(summary.contains("\"uncoded\""), "summary: {summary}");
}

#[test]
fn simulate_rejects_a_missing_input_file() {
    let out = bin()
        .args([
            "simulate", "--scheme", "uncoded", "--m", "2", "--n", "2", "--N", "4",
            "--trials", "1", "--input-a", "/nonexistent/a.mtx", "--input-b", "/nonexistent/b.mtx",
        ])
        .output()
        .expect("binary should launch");
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "stderr: {stderr}");
    assert!(stderr.contains("a.mtx"), "stderr: {stderr}");
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[test]
fn analyze_reports_exact_matching_for_a_file_distribution() {
    // Degree always 1 over three blocks: matching succeeds only when the
    // three draws are distinct, which happens with probability 6/27 = 2/9.
    let dir = tempfile::tempdir().expect("tempdir");
    let dist_path = dir.path().join("single.json");
    let dist = single_degree_distribution(3);
    std::fs::write(
        &dist_path,
        serde_json::to_string(&dist).expect("serialize distribution"),
    )
    .expect("write distribution");

    let text = stdout_of(&[
        "analyze",
        "--dist-file",
        dist_path.to_str().expect("temp path"),
        "--matching",
    ]);
    assert!(text.contains("mean degree: 1 = 1"), "output: {text}");
    assert!(
        text.contains("exact matching probability: 2/9"),
        "output: {text}"
    );
}

#[test]
fn analyze_runs_the_decodability_checks() {
    let text = stdout_of(&[
        "analyze", "--dist", "wave", "--d", "12", "--strengthened", "--k-rows", "14",
        "--grid", "60",
    ]);
    // Two JSON reports, each with a verdict.
    assert_eq!(text.matches("\"feasible\"").count(), 2, "output: {text}");
    assert!(text.contains("\"k_rows\": 14"), "output: {text}");
}

#[test]
fn analyze_without_an_action_is_a_usage_error() {
    let out = bin()
        .args(["analyze", "--dist", "wave", "--d", "8"])
        .output()
        .expect("binary should launch");
    assert_eq!(out.status.code(), Some(2));
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

#[test]
fn optimize_smoke_prints_distribution_and_report() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out_path = path_str(dir.path(), "design.json");
    let text = stdout_of(&[
        "optimize", "--d", "4", "--p-m", "0.1", "--grid", "80", "--out", &out_path,
    ]);
    let parsed: serde_json::Value = serde_json::from_str(&text).expect("stdout is JSON");
    assert!(parsed["report"]["feasibility"]["mean_degree"].as_f64().is_some());
    assert!(parsed["distribution"].is_object() || parsed["distribution"].is_array());

    let on_disk = std::fs::read_to_string(&out_path).expect("json file");
    assert_eq!(text.trim_end(), on_disk.trim_end());

    // The written distribution feeds straight back into analyze.
    let report = stdout_of(&["analyze", "--dist-file", &out_path, "--matching"]);
    assert!(report.contains("sequential matching estimate"), "output: {report}");
}

// ---------------------------------------------------------------------------
// process-level behavior
// ---------------------------------------------------------------------------

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = bin().arg("frobnicate").output().expect("binary should launch");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_env_is_validated() {
    let ok = bin()
        .env("SPARSE_CODE_THREADS", "1")
        .args(["threshold", "--dist", "wave", "--mn", "4", "--trials", "5", "--seed", "2"])
        .output()
        .expect("binary should launch");
    assert!(ok.status.success());

    let bad = bin()
        .env("SPARSE_CODE_THREADS", "zero")
        .args(["threshold", "--dist", "wave", "--mn", "4", "--trials", "5", "--seed", "2"])
        .output()
        .expect("binary should launch");
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("SPARSE_CODE_THREADS"));
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

fn single_degree_distribution(d: usize) -> sparse_code::DegreeDistribution {
    let zero = sparse_code::BigRational::from_integer(0.into());
    let mut probs = vec![zero; d];
    probs[0] = sparse_code::BigRational::from_integer(1.into());
    sparse_code::DegreeDistribution::from_probs(probs).expect("valid distribution")
}
