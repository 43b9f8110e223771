//! End-to-end runs of the command-line binary.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sidelrm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sidelrm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn metrics(path: &Path) -> HashMap<String, String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once(','))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn gen_instance(dir: &Path, out: &str) {
    let o = sidelrm(
        &[
            "gen",
            "--n",
            "50",
            "--m",
            "20",
            "--k",
            "3",
            "--d",
            "5",
            "--miss-frac",
            "0.9",
            "--sigma",
            "2",
            "--seed",
            "7",
            "--out",
            out,
        ],
        dir,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

const PROBLEM: [&str; 6] = [
    "--data",
    "inst/observed.txt",
    "--side-info",
    "inst/side_info.csv",
    "--truth",
    "inst/truth.csv",
];

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    gen_instance(dir.path(), "a");
    gen_instance(dir.path(), "b");
    for f in ["observed.txt", "side_info.csv", "truth.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn solve_writes_factors_and_equal_length_traces() {
    let dir = tempfile::tempdir().unwrap();
    gen_instance(dir.path(), "inst");
    let mut args = vec![
        "solve",
        "--method",
        "admm",
        "--rank",
        "3",
        "--threads",
        "1",
        "--out",
        "sol",
    ];
    args.extend(PROBLEM);
    let o = sidelrm(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sol = dir.path().join("sol");
    let u = fs::read_to_string(sol.join("U.csv")).unwrap();
    assert_eq!(u.lines().count(), 50);
    assert_eq!(u.lines().next().unwrap().split(',').count(), 3);
    assert_eq!(fs::read_to_string(sol.join("V.csv")).unwrap().lines().count(), 20);

    let report = fs::read_to_string(sol.join("report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = report.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 20);
    for r in &rows {
        assert!(r[1..5].iter().all(|f| !f.is_empty()), "{r:?}");
    }
    assert_eq!(rows.last().unwrap()[5], "max_iters");
    let m = metrics(&sol.join("metrics.csv"));
    assert_eq!(m["termination"], "max_iters");
    assert_eq!(m["fitted_rank"], "3");
}

#[test]
fn eval_reproduces_solve_metrics() {
    let dir = tempfile::tempdir().unwrap();
    gen_instance(dir.path(), "inst");
    for method in ["admm", "iterative-svd", "soft-impute", "scaled-gd"] {
        let out = format!("sol-{method}");
        let mut args = vec![
            "solve",
            "--method",
            method,
            "--rank",
            "3",
            "--threads",
            "1",
            "--out",
            &out,
        ];
        args.extend(PROBLEM);
        assert_eq!(code(&sidelrm(&args, dir.path())), 0, "{method}");

        let eval_out = format!("eval-{method}");
        let mut args = vec!["eval", "--solution", &out, "--out", &eval_out];
        args.extend(PROBLEM);
        assert_eq!(code(&sidelrm(&args, dir.path())), 0);

        let a = metrics(&dir.path().join(&out).join("metrics.csv"));
        let b = metrics(&dir.path().join(&eval_out).join("metrics.csv"));
        for key in ["objective", "fit", "side", "reg", "err_l2", "r2"] {
            let (x, y): (f64, f64) = (a[key].parse().unwrap(), b[key].parse().unwrap());
            assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0), "{method} {key}: {x} vs {y}");
        }
        assert_eq!(a["fitted_rank"], b["fitted_rank"]);
    }
}

#[test]
fn eval_of_the_truth_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    gen_instance(dir.path(), "inst");
    let mut args = vec!["eval", "--xhat", "inst/truth.csv"];
    args.extend(PROBLEM);
    let o = sidelrm(&args, dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let err = text.lines().find_map(|l| l.strip_prefix("err_l2,")).unwrap();
    assert_eq!(err.parse::<f64>().unwrap(), 0.0);
}

#[test]
fn sweep_command_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.cfg"),
        "vary = n\nvalues = 100\nm = 40\nk = 3\nd = 10\ntrials = 1\nmethods = admm\nthreads = 1\n",
    )
    .unwrap();
    let o = sidelrm(&["sweep", "--config", "s.cfg", "--out", "r.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(dir.path().join("r.csv")).unwrap().lines().count(), 2);
    assert!(dir.path().join("r.summary.csv").exists());
}

#[test]
fn exit_codes_separate_input_and_solver_failures() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&sidelrm(&["--help"], p)), 0);

    let o = sidelrm(&["solve", "--bogus"], p);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--bogus"));

    let o = sidelrm(
        &["solve", "--data", "missing.txt", "--side-info", "y.csv", "--out", "s"],
        p,
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.txt"));

    let o = sidelrm(&["sweep", "--config", "nope.cfg"], p);
    assert_eq!(code(&o), 1);

    gen_instance(p, "inst");
    let mut args = vec!["solve", "--rank", "0", "--out", "s"];
    args.extend(PROBLEM);
    assert_eq!(code(&sidelrm(&args, p)), 1);
    let mut args = vec!["solve", "--method", "fast-impute", "--out", "s"];
    args.extend(PROBLEM);
    assert_eq!(code(&sidelrm(&args, p)), 1);

    // entries near the overflow threshold break the row systems
    fs::write(
        p.join("huge.txt"),
        "3 3 4\n1 1 1e300\n1 2 -1e300\n2 1 1e300\n3 3 1e300\n",
    )
    .unwrap();
    fs::write(p.join("y.csv"), "1\n2\n3\n").unwrap();
    let o = sidelrm(
        &[
            "solve",
            "--data",
            "huge.txt",
            "--side-info",
            "y.csv",
            "--rank",
            "1",
            "--out",
            "s",
        ],
        p,
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}
