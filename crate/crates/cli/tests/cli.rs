use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn horseshoe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_horseshoe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SMALL: &str = "return_samples = 400\nw_samples = 400\nmax_period = 6\ncycle_max_period = 5\nexponent_max_period = 2\nexponent_horizon = 100000\n";

fn config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn certificate(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("certificate.json")).unwrap()).unwrap()
}

fn suite<'a>(cert: &'a serde_json::Value, name: &str) -> &'a serde_json::Value {
    cert["suites"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["suite"] == name)
        .unwrap()
}

#[test]
fn passing_suites_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("out");
    let out = horseshoe(&[
        "verify",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--suite",
        "validate",
        "--suite",
        "verify-returns",
        "--suite",
        "verify-cones",
        "--suite",
        "periodic",
        "--suite",
        "lyapunov",
        "--suite",
        "nonuniformity",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let cert = certificate(&out_dir);
    assert_eq!(cert["pass"], true);
    assert_eq!(suite(&cert, "verify-escape")["verdict"], "not run");
    assert_eq!(suite(&cert, "periodic")["verdict"], "pass");
    for f in [
        "returns.csv",
        "inclusion.csv",
        "periodic_orbits.csv",
        "exponents.csv",
        "nonuniformity.csv",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn outside_growth_check_fails_with_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = horseshoe(&[
        "verify",
        "--suite",
        "verify-escape",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let cert = certificate(&out_dir);
    let s = suite(&cert, "verify-escape");
    assert_eq!(s["metrics"]["escape_violations"], 0.0);
    assert_eq!(s["metrics"]["total_growth_violations"], 0.0);
    assert!(s["metrics"]["outside_growth_violations"].as_f64().unwrap() > 0.0);
    assert_eq!(
        s["metrics"]["outside_growth_violations"],
        s["metrics"]["outside_growth_violations_wide_v"]
    );
}

#[test]
fn low_curvature_with_override_reports_cone_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &format!("{SMALL}c = 1.0\n"));
    let out_dir = tmp.path().join("out");
    let out = horseshoe(&[
        "verify",
        "--config",
        &cfg,
        "--allow-invalid-params",
        "--suite",
        "verify-cones",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let cert = certificate(&out_dir);
    assert_eq!(cert["params_valid"], false);
    let s = suite(&cert, "verify-cones");
    assert_eq!(s["verdict"], "fail");
    assert!(s["metrics"]["return_cone_violations"].as_f64().unwrap() > 0.0);
}

#[test]
fn invalid_params_without_override_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c = 1.0\n");
    assert_eq!(
        code(&horseshoe(&[
            "verify",
            "--config",
            &cfg,
            "--out",
            tmp.path().to_str().unwrap()
        ])),
        2
    );
}

#[test]
fn malformed_and_misspelled_configs_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = config(tmp.path(), "seed = [\n");
    assert_eq!(code(&horseshoe(&["verify", "--config", &bad])), 2);
    let typo = config(tmp.path(), "return_sample = 10\n");
    let out = horseshoe(&["verify", "--config", &typo]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("return_sample"));
    let zero = config(tmp.path(), "w_samples = 0\n");
    assert_eq!(code(&horseshoe(&["verify", "--config", &zero])), 2);
    assert_eq!(
        code(&horseshoe(&[
            "verify",
            "--config",
            tmp.path().join("missing.toml").to_str().unwrap()
        ])),
        2
    );
}

#[test]
fn exhausted_budget_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &format!("{SMALL}time_budget_secs = 1e-9\n"));
    let out = horseshoe(&[
        "verify",
        "--config",
        &cfg,
        "--suite",
        "validate",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    let cfg = config(tmp.path(), &format!("{SMALL}max_draws = 10\n"));
    let out = horseshoe(&[
        "verify",
        "--config",
        &cfg,
        "--suite",
        "verify-returns",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        horseshoe(&[
            "verify",
            "--config",
            &cfg,
            "--seed",
            "17",
            "--out",
            d.to_str().unwrap(),
        ]);
    }
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() > 5);
    for n in names {
        assert_eq!(
            fs::read(a.join(&n)).unwrap(),
            fs::read(b.join(&n)).unwrap(),
            "{n:?}"
        );
    }
    let c = tmp.path().join("c");
    horseshoe(&[
        "verify",
        "--config",
        &cfg,
        "--seed",
        "18",
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_ne!(
        fs::read(a.join("returns.csv")).unwrap(),
        fs::read(c.join("returns.csv")).unwrap()
    );
}

#[test]
fn census_prints_counts() {
    let out = horseshoe(&["census", "--max-period", "6"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("total 305 orbits"), "{text}");
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|x| x.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn plot_data_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = horseshoe(&["plot-data", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);

    let (c, q, lambda) = (16.0, 0.72, 0.25);
    let par = rows(&tmp.path().join("fold_parabolas.csv"));
    assert!(!par.is_empty());
    for r in &par {
        let v: Vec<f64> = r.iter().map(|s| s.parse().unwrap()).collect();
        assert!((v[2] - (c * (v[1] - q) * (v[1] - q) - lambda * v[0])).abs() < 1e-12);
    }

    let cloud = rows(&tmp.path().join("lambda_cloud.csv"));
    let has = |x: f64, y: f64| {
        cloud
            .iter()
            .any(|r| r[0].parse::<f64>().unwrap() == x && r[1].parse::<f64>().unwrap() == y)
    };
    assert!(has(0.0, 0.0) && has(1.0, 1.0));

    let cones = rows(&tmp.path().join("cone_field.csv"));
    let l: Vec<_> = cones.iter().filter(|r| r[2] == "L").collect();
    assert!(!l.is_empty());
    for r in l {
        assert_eq!((r[4].as_str(), r[5].as_str()), ("0", "1"));
    }
    for f in ["region_images.csv", "cx_profile.csv"] {
        assert!(!rows(&tmp.path().join(f)).is_empty());
    }
}
