use std::fs;
use std::path::Path;

use gsvd_iter::cli::{median, run, EXIT_CONVERGED, EXIT_NOT_CONVERGED, EXIT_USAGE};
use serde_json::Value;

fn write_diag(path: &Path, d: &[f64]) {
    let n = d.len();
    let mut text = format!("%%MatrixMarket matrix coordinate real general\n{n} {n} {n}\n");
    for (i, v) in d.iter().enumerate() {
        text.push_str(&format!("{} {} {v}\n", i + 1, i + 1));
    }
    fs::write(path, text).unwrap();
}

fn call(args: &[&str]) -> i32 {
    let mut full = vec!["gsvd-iter"];
    full.extend_from_slice(args);
    run(full)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn strip_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_diagonal_pair_reports_largest_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, out) = (dir.path().join("A.mtx"), dir.path().join("B.mtx"), dir.path().join("o.json"));
    write_diag(&a, &[4.0, 3.0, 2.0, 1.0]);
    write_diag(&b, &[1.0; 4]);
    let code = call(&[
        "solve", "--a", s(&a), "--b", s(&b), "--which", "largest", "--min-dim", "1",
        "--max-dim", "3", "--tol", "1e-10", "--vectors", "--out", s(&out),
    ]);
    assert_eq!(code, EXIT_CONVERGED);
    let v = read_json(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["command"], "solve");
    let sigma = v["pairs"][0]["sigma"].as_f64().unwrap();
    assert!((sigma - 4.0).abs() < 1e-8, "{sigma}");
    let x = &v["vectors"]["x"][0];
    assert_eq!(x.as_array().unwrap().len(), 4);
    assert!(v["mv_count"].as_u64().unwrap() > 0);
    assert!(v["wall_time_s"].as_f64().is_some());
}

#[test]
fn solve_final_backward_error_meets_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(call(&["gen-export", "--example", "1", "--n", "200", "--dir", s(dir.path()), "--out", s(&dir.path().join("g.json"))]), 0);
    let out = dir.path().join("o.json");
    let curve = dir.path().join("curve.csv");
    let code = call(&[
        "solve", "--a", s(&dir.path().join("A.mtx")), "--b", s(&dir.path().join("B.mtx")),
        "--tol", "1e-6", "--curve", s(&curve), "--out", s(&out),
    ]);
    assert_eq!(code, EXIT_CONVERGED);
    let v = read_json(&out);
    let entries = v["records"][0]["entries"].as_array().unwrap();
    let last = entries.last().unwrap()["backward_error"].as_f64().unwrap();
    assert!(last <= 1e-6, "{last:e}");
    let csv = fs::read_to_string(&curve).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "solve,mv,dim,c1,s1,residual_norm,backward_error,value_error");
    assert_eq!(lines.count(), entries.len());
}

#[test]
fn solve_is_deterministic_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(call(&["gen-export", "--example", "2a", "--n", "120", "--seed", "3", "--dir", s(dir.path()), "--out", s(&dir.path().join("g.json"))]), 0);
    let run_once = |name: &str| {
        let out = dir.path().join(name);
        call(&[
            "solve", "--a", s(&dir.path().join("A.mtx")), "--b", s(&dir.path().join("B.mtx")),
            "--algorithm", "md", "--count", "2", "--seed", "11", "--out", s(&out),
        ]);
        strip_timing(read_json(&out))
    };
    let x = run_once("x.json");
    let y = run_once("y.json");
    assert_eq!(serde_json::to_string(&x).unwrap(), serde_json::to_string(&y).unwrap());
}

#[test]
fn solve_with_seed_vectors_locks_infinite_pair_first() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, seeds, out) = (
        dir.path().join("A.mtx"),
        dir.path().join("B.mtx"),
        dir.path().join("seeds.mtx"),
        dir.path().join("o.json"),
    );
    write_diag(&a, &[4.0, 3.0, 2.0, 1.0, 0.5]);
    write_diag(&b, &[1.0, 1.0, 1.0, 1.0, 0.0]);
    fs::write(&seeds, "%%MatrixMarket matrix array real general\n5 1\n0\n0\n0\n0\n1\n").unwrap();
    let code = call(&[
        "solve", "--a", s(&a), "--b", s(&b), "--count", "2", "--min-dim", "1", "--max-dim", "3",
        "--tol", "1e-10", "--seed-vectors", s(&seeds), "--out", s(&out),
    ]);
    assert_eq!(code, EXIT_CONVERGED);
    let v = read_json(&out);
    assert!(v["pairs"][0]["sigma"].is_null());
    assert_eq!(v["pairs"][0]["s"].as_f64().unwrap(), 0.0);
    let sigma = v["pairs"][1]["sigma"].as_f64().unwrap();
    assert!((sigma - 4.0).abs() < 1e-8, "{sigma}");
    let bad = call(&[
        "solve", "--a", s(&a), "--b", s(&b), "--count", "1", "--seed-vectors", s(&seeds), "--out", s(&out),
    ]);
    assert_eq!(bad, EXIT_USAGE);
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.mtx");
    assert_eq!(call(&["solve", "--a", s(&missing), "--b", s(&missing)]), EXIT_USAGE);
    assert_eq!(call(&["solve", "--bogus"]), EXIT_USAGE);
    assert_eq!(call(&["bench", "--example", "9", "--n", "40", "--trials", "1"]), EXIT_USAGE);
    assert_eq!(call(&["tikhonov", "--problem", "heat", "--n", "32"]), EXIT_USAGE);
    assert_eq!(call(&["gen-export", "--example", "1", "--n", "8", "--dir", s(dir.path()), "--out", s(&dir.path().join("g.json"))]), 0);
    let out = dir.path().join("o.json");
    let code = call(&[
        "solve", "--a", s(&dir.path().join("A.mtx")), "--b", s(&dir.path().join("B.mtx")),
        "--min-dim", "1", "--max-dim", "2", "--max-restarts", "1", "--tol", "1e-300", "--out", s(&out),
    ]);
    assert_eq!(code, EXIT_NOT_CONVERGED);
    assert_eq!(read_json(&out)["converged"], false);
}

#[test]
fn bench_single_trial_median_is_that_count() {
    let dir = tempfile::tempdir().unwrap();
    let (out, csv) = (dir.path().join("b.json"), dir.path().join("b.csv"));
    let code = call(&[
        "bench", "--example", "1", "--n", "200", "--trials", "1", "--csv", s(&csv), "--out", s(&out),
    ]);
    assert_eq!(code, EXIT_CONVERGED);
    let v = read_json(&out);
    let count = v["trials"][0]["mv_count"].as_f64().unwrap();
    assert_eq!(v["median_mv"].as_f64().unwrap(), count);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("trial,seed,mv_count,restarts,converged,monotonicity_violations\n"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn bench_trials_merge_in_index_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    let code = call(&[
        "bench", "--example", "1", "--n", "120", "--trials", "4", "--stop", "backward", "--out", s(&out),
    ]);
    assert_eq!(code, EXIT_CONVERGED);
    let v = read_json(&out);
    let trials = v["trials"].as_array().unwrap();
    let idx: Vec<u64> = trials.iter().map(|t| t["trial"].as_u64().unwrap()).collect();
    assert_eq!(idx, vec![0, 1, 2, 3]);
    let counts: Vec<usize> = trials.iter().map(|t| t["mv_count"].as_u64().unwrap() as usize).collect();
    assert_eq!(v["median_mv"].as_f64().unwrap(), median(&counts));
}

#[test]
fn median_of_even_and_odd_samples() {
    assert_eq!(median(&[7]), 7.0);
    assert_eq!(median(&[9, 1, 5]), 5.0);
    assert_eq!(median(&[4, 1, 3, 10]), 3.5);
}

#[test]
fn tikhonov_report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run_once = |name: &str| {
        let out = dir.path().join(name);
        let code = call(&[
            "tikhonov", "--problem", "shaw", "--n", "64", "--pairs", "8", "--seed", "2", "--out", s(&out),
        ]);
        (code, strip_timing(read_json(&out)))
    };
    let (code, x) = run_once("x.json");
    let (_, y) = run_once("y.json");
    assert_eq!(code, EXIT_CONVERGED);
    assert_eq!(x, y);
    assert_eq!(x["command"], "tikhonov");
    assert!(x["mu"].as_f64().unwrap() > 0.0);
    assert!(x["sin_x2"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn gen_export_writes_pair_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    assert_eq!(call(&["gen-export", "--problem", "baart", "--n", "16", "--dir", s(dir.path()), "--out", s(&out)]), 0);
    for f in ["A.mtx", "B.mtx", "b.mtx", "x_star.mtx"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let v = read_json(&out);
    assert_eq!(v["command"], "gen-export");
    assert_eq!(v["n"], 16);
    assert!(v["exact_pairs"].is_null());
    assert_eq!(call(&["gen-export", "--n", "16", "--dir", s(dir.path())]), EXIT_USAGE);
}
