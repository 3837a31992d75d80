use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oap-scale")).args(args).output().expect("binary runs")
}

fn report(args: &[&str]) -> (Value, i32) {
    let out = run(args);
    let text = String::from_utf8(out.stdout).unwrap();
    let v: Value = serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("{e}: {text}"));
    (v, out.status.code().unwrap())
}

fn write_mm(path: &Path, rows: &[&[f64]]) {
    let n = rows.len();
    let mut s = format!("%%MatrixMarket matrix coordinate real general\n{n} {n} {}\n", n * n);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            s += &format!("{} {} {v}\n", i + 1, j + 1);
        }
    }
    std::fs::write(path, s).unwrap();
}

fn trace_rows(args: &[&str]) -> Vec<(f64, usize, usize, f64, f64)> {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,i,j,x,log10_x"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect()
}

#[test]
fn pei_keeps_the_diagonal() {
    let (v, code) = report(&["preprocess", "--family", "pei", "--n", "500", "--method", "sinkhorn", "--p", "100"]);
    assert_eq!(code, 0);
    assert_eq!(v["iterations"], 1);
    assert_eq!(v["nnz_after"], 500);
    assert!((v["remaining_percent"].as_f64().unwrap() - 0.2).abs() < 1e-12);
}

#[test]
fn minij_two_matches_brute_force() {
    // permutation weights: identity 1·2, swap 1·1
    let (v, code) = report(&["preprocess", "--family", "minij", "--n", "2", "--p", "100"]);
    assert_eq!(code, 0);
    assert_eq!(v["sigma"], serde_json::json!([0, 1]));
    assert!((v["val_oap"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-15);
}

#[test]
fn report_arithmetic_is_consistent() {
    for method in ["sinkhorn", "log-sinkhorn", "newton", "deformed"] {
        let (v, _) = report(&["preprocess", "--family", "random_uniform", "--n", "12", "--seed", "3", "--method", method]);
        let before = v["nnz_before"].as_f64().unwrap();
        let after = v["nnz_after"].as_f64().unwrap();
        assert_eq!(v["remaining_percent"].as_f64().unwrap(), 100.0 * after / before, "{method}");
        assert_eq!(v["method"], method);
        assert_eq!(v["generator"], "chacha8-v1");
        if let Some(g) = v["certificate_gap"].as_f64() {
            assert!(g >= -1e-9);
        }
    }
}

#[test]
fn newton_on_file_reports_work() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.mtx");
    write_mm(&p, &[&[4.0, 1.0, 2.0], &[1.0, 3.0, 1.0], &[2.0, 1.0, 5.0]]);
    let (v, code) = report(&["preprocess", "--mm", p.to_str().unwrap(), "--method", "newton", "--p", "2"]);
    assert_eq!(code, 0);
    let w = v["work_units"].as_u64().unwrap();
    assert!(w > 0);
    assert_eq!(v["iterations"].as_u64().unwrap(), w);
    assert!(v["outer_steps"].as_u64().unwrap() <= w);
}

#[test]
fn certificate_only_for_log_sinkhorn() {
    let (v, _) = report(&["preprocess", "--family", "euclidean3d", "--n", "20", "--method", "log-sinkhorn"]);
    let gap = v["certificate_gap"].as_f64().unwrap();
    assert!(gap >= -1e-9);
    let (w, _) = report(&["preprocess", "--family", "euclidean3d", "--n", "20", "--method", "sinkhorn"]);
    assert!(w["certificate_bound"].is_null());
    assert_eq!(v["val_oap"], w["val_oap"]);
}

#[test]
fn out_file_and_thread_count_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = run(&["--threads", "1", "preprocess", "--family", "hilbert", "--n", "40", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let one: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let (many, _) = report(&["--threads", "4", "preprocess", "--family", "hilbert", "--n", "40"]);
    for key in ["iterations", "residual", "nnz_after", "val_oap", "sigma"] {
        assert_eq!(one[key], many[key], "{key}");
    }
}

#[test]
fn not_converged_exits_with_two() {
    let (v, code) = report(&["preprocess", "--family", "random_uniform", "--n", "30", "--epsilon", "1e-14", "--max-iters", "3"]);
    assert_eq!(v["converged"], false);
    assert_eq!(code, 2);
}

#[test]
fn starved_reduction_exits_with_two() {
    // every X entry is 1/2, so a threshold above it deletes everything
    let (v, code) = report(&["preprocess", "--family", "pei", "--n", "2", "--alpha", "0", "--threshold", "0.75"]);
    assert_eq!(v["full_solve_fallback"], true);
    assert_eq!(v["nnz_after"], 0);
    assert_eq!(code, 2);
}

#[test]
fn errors_exit_with_one() {
    assert_eq!(run(&["preprocess", "--mm", "/definitely/missing.mtx"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("neg.mtx");
    std::fs::write(&p, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 -1\n2 2 1\n").unwrap();
    let out = run(&["preprocess", "--mm", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let (v, code) = report(&["preprocess", "--mm", p.to_str().unwrap(), "--abs"]);
    assert_eq!(code, 0);
    assert_eq!(v["val_oap"], 0.0);
    // no perfect matching
    let z = dir.path().join("z.mtx");
    std::fs::write(&z, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n2 1 1\n").unwrap();
    assert_eq!(run(&["preprocess", "--mm", z.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn trace_of_the_three_by_three_example() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s3.mtx");
    write_mm(&p, &[&[1.0, 0.99, 0.99], &[0.99, 1.0, 1.0 / 3.0], &[0.25, 0.5, 1.0]]);
    let rows = trace_rows(&["trace", "--mm", p.to_str().unwrap(), "--trace-entries", "1,2;3,3", "--p-grid", "1:30"]);
    assert_eq!(rows.len(), 60);
    let x12: Vec<f64> = rows.iter().filter(|r| (r.1, r.2) == (1, 2)).map(|r| r.4).collect();
    // fast rise toward the face of the two near-optimal permutations, then a slow affine decline
    let peak = x12.iter().enumerate().fold(0, |b, (k, &v)| if v > x12[b] { k } else { b });
    assert!(peak > 0 && peak < 20, "{x12:?}");
    assert!(x12[..=peak].windows(2).all(|w| w[1] > w[0]));
    assert!(x12[peak..].windows(2).all(|w| w[1] < w[0]));
    let slopes: Vec<f64> = x12[19..].windows(2).map(|w| w[1] - w[0]).collect();
    assert!(slopes.windows(2).all(|w| (w[1] - w[0]).abs() < 1e-4), "{slopes:?}");
    // (3,3) lies on the unique optimum (1,2,3): increases toward 1
    let x33: Vec<f64> = rows.iter().filter(|r| (r.1, r.2) == (3, 3)).map(|r| r.3).collect();
    assert!(x33.windows(2).all(|w| w[1] >= w[0]));
    assert!(x33[29] > 0.99);
    for r in &rows {
        assert!((r.4 - r.3.log10()).abs() < 1e-12);
    }
}

#[test]
fn trace_single_point_and_bad_index() {
    let rows = trace_rows(&["trace", "--family", "cauchy", "--n", "4", "--p-grid", "7"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].0, 7.0);
    let out = run(&["trace", "--family", "cauchy", "--n", "4", "--trace-entries", "5,1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["trace", "--family", "cauchy", "--n", "65"]);
    assert_eq!(out.status.code(), Some(1));
}
