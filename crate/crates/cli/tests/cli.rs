use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn preisach(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_preisach"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to run binary")
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

const W: &str = "t,value\n0,1\n0.5,-2\n0.75,3.5e-7\n1,0.25\n";

#[test]
fn invert_with_zero_density_reproduces_input() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("w.csv"), W).unwrap();
    let out = preisach(
        &[
            "invert", "--model", "zero", "--in", "w.csv", "--out", "q.csv",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        std::fs::read_to_string(dir.path().join("q.csv")).unwrap(),
        W
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["residual"], 0.0);
    assert_eq!(summary["rho_k"], 1.0);
}

#[test]
fn forward_then_invert_recovers_signal() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("q.csv"), W).unwrap();
    std::fs::write(dir.path().join("u.csv"), "t,u1\n0,0.5\n0.3,-1\n1,2\n").unwrap();
    let common = ["--model", "cauchy", "--k", "32", "--radius", "4"];
    let out = preisach(
        &[
            &[
                "forward", "--in", "q.csv", "--in", "u.csv", "--out", "w.csv",
            ][..],
            &common,
        ]
        .concat(),
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = preisach(
        &[
            &[
                "invert", "--in", "w.csv", "--in", "u.csv", "--out", "back.csv",
            ][..],
            &common,
        ]
        .concat(),
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (_, original) = csv_rows(&dir.path().join("q.csv"));
    let (_, back) = csv_rows(&dir.path().join("back.csv"));
    let q_at = |t: f64| original.iter().rev().find(|r| r[0] <= t).unwrap()[1];
    for row in &back {
        assert!((row[1] - q_at(row[0])).abs() <= 3e-10, "{row:?}");
    }
}

#[test]
fn error_study_rows_within_bound() {
    let dir = TempDir::new().unwrap();
    let out = preisach(
        &["error-study", "--model", "exp", "--out", "study.csv"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = csv_rows(&dir.path().join("study.csv"));
    assert_eq!(header, ["k", "sup_error", "mr_over_k", "bound"]);
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        [4.0, 16.0, 64.0, 256.0]
    );
    for r in &rows {
        assert!(r[1] <= 2.0 / r[0] + 2.0 / 4096.0);
        assert_eq!(r[3], 2.0 / r[0] + 2.0 / 4096.0);
    }
}

#[test]
fn roundtrip_is_accurate_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = [
        "roundtrip",
        "--seed",
        "42",
        "--k",
        "64",
        "--tol",
        "1e-10",
        "--trials",
        "30",
    ];
    let a = preisach(&[&args[..], &["--out", "a.csv"]].concat(), dir.path());
    let b = preisach(&[&args[..], &["--out", "b.csv"]].concat(), dir.path());
    assert!(a.status.success() && b.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(summary["max_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn stability_table_names_bounds() {
    let dir = TempDir::new().unwrap();
    let out = preisach(&["stability", "--k", "16", "--out", "s.csv"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = csv_rows(&dir.path().join("s.csv"));
    assert_eq!(
        header,
        ["t", "diff", "w_gap", "u_gap", "rho_k_bound", "eM_bound"]
    );
    assert!(rows.iter().all(|r| r[1] <= r[4] && r[1] <= r[5]));
}

#[test]
fn regularity_from_file() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("w.csv"), W).unwrap();
    let out = preisach(
        &["regularity", "--in", "w.csv", "--out", "r.csv"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = csv_rows(&dir.path().join("r.csv"));
    assert_eq!(header, ["t", "h", "change", "eM_bound"]);
    assert_eq!(rows.len(), 3);
}

#[test]
fn piezo_without_feedback_scales_field() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("piezo.json"),
        r#"{"f": "quadratic", "alpha": "zero", "f_min": 1, "coeff_max": 0, "coeff_lip": 0, "density": {"preset": "exp"}}"#,
    )
    .unwrap();
    std::fs::write(dir.path().join("E.csv"), "t,value\n0,2\n1,-1\n").unwrap();
    std::fs::write(dir.path().join("eps.csv"), "t,value\n0,1\n1,0\n").unwrap();
    let out = preisach(
        &[
            "piezo",
            "--model",
            "piezo.json",
            "--in",
            "E.csv",
            "--in",
            "eps.csv",
            "--out",
            "p.csv",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = csv_rows(&dir.path().join("p.csv"));
    assert_eq!(header, ["t", "q", "polarization"]);
    assert_eq!(rows[0][1], 1.0);
    assert_eq!(rows[1][1], -1.0);
}

#[test]
fn usage_and_parse_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("w.csv"), W).unwrap();
    std::fs::write(dir.path().join("bad.csv"), "t,value\n0,abc\n").unwrap();
    for args in [
        &["invert", "--in", "w.csv", "--out="][..],
        &["invert", "--in", "bad.csv"],
        &["invert", "--in", "missing.csv"],
        &["invert"],
        &["invert", "--in", "w.csv", "--model", "nope.json"],
        &["piezo", "--in", "w.csv"],
        &["forward", "--k", "0", "--in", "w.csv"],
    ] {
        let out = preisach(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn custom_model_config() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("w.csv"), W).unwrap();
    std::fs::write(
        dir.path().join("model.json"),
        r#"{"family": "separable", "c": {"kind": "constant", "value": 0.5},
            "mu": {"kind": "exponential", "scale": 1.0, "rate": 2.0},
            "phi": {"kind": "flat"}, "R": 3.0}"#,
    )
    .unwrap();
    let out = preisach(
        &["invert", "--model", "model.json", "--in", "w.csv"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("t,value\n"));
}
