use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn shanks(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_shanks"));
    cmd.args(args).env_remove("SHANKS_OUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const PAGERANK_2: &str = r#"
[problem]
kind = "matrix_market"
path = "two.mtx"
damping = 0.85

[[methods]]
method = "plain"

[[methods]]
method = "aa"
depth = 2
"#;

const TWO_NODE_MTX: &str = "%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 2\n2 1\n";

#[test]
fn list_methods_needs_no_config() {
    let out = shanks(&["--list-methods"], &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["rnla", "rrre", "raa", "stabilized_aa", "plain_fixed_point"] {
        assert!(text.contains(key), "{key} missing from:\n{text}");
    }
}

#[test]
fn converged_run_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("two.mtx"), TWO_NODE_MTX).unwrap();
    let cfg = write_config(dir.path(), PAGERANK_2);
    let out_path = dir.path().join("out.csv");
    let out = shanks(&["--config", &cfg, "--out", out_path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&out_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,eval_index,residual,lambda_selected,status"));
    let plain: Vec<f64> = csv
        .lines()
        .filter(|l| l.starts_with("PlainFixedPoint,"))
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(!plain.is_empty());
    assert!(plain.windows(2).all(|w| w[1] <= w[0]), "residuals not monotone: {plain:?}");
}

#[test]
fn json_format_and_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("results");
    fs::write(dir.path().join("two.mtx"), TWO_NODE_MTX).unwrap();
    let cfg = write_config(dir.path(), PAGERANK_2);
    let out = shanks(&["--config", &cfg, "--format", "json", "--out", "run.json"], &[("SHANKS_OUT_DIR", &target)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(target.join("run.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value.as_array().unwrap().len(), 2);
    assert_eq!(value[1]["status"]["kind"], "converged");
}

#[test]
fn same_seed_gives_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
        [problem]
        kind = "linear"
        dim = 12
        spectral_radius = 0.95

        [[methods]]
        method = "rnla"

        [[methods]]
        method = "atm_mmpe"
        depth = 4
        "#,
    );
    let mut outputs = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        let out = shanks(&["--config", &cfg, "--seed", "11", "--format", "json", "--out", path.to_str().unwrap()], &[]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(fs::read(path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
        max_g_evals = 500
        [problem]
        kind = "linear"
        dim = 5
        spectral_radius = 1.5

        [[methods]]
        method = "plain"
        "#,
    );
    let out = shanks(&["--config", &cfg, "--out", dir.path().join("o.csv").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn budget_exhaustion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
        max_g_evals = 3
        [problem]
        kind = "linear"
        dim = 5
        spectral_radius = 0.9

        [[methods]]
        method = "plain"
        "#,
    );
    let out = shanks(&["--config", &cfg, "--out", dir.path().join("o.csv").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_exits_one_with_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
        tol = -1.0
        [problem]
        kind = "linear"
        dim = 5
        spectral_radius = 0.5
        [[methods]]
        method = "aa"
        "#,
    );
    let out = shanks(&["--config", &cfg], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tol"));
    assert_eq!(shanks(&[], &[]).status.code(), Some(1), "usage error");
    assert_eq!(shanks(&["--help"], &[]).status.code(), Some(0));
}
