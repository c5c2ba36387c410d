//! End-to-end runs of the `truncgeo` binary.

use std::process::Command;

use truncgeo::experiments::{self, ExperimentConfig, Report};
use truncgeo::geometry::{geometry_at, trace_streamline};
use truncgeo::models::{ModelSpec, ParamPoint};

fn truncgeo(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_truncgeo"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn residual_grid_for_the_matching_prior() {
    let (code, out, err) = truncgeo(&[
        "residual",
        "--model",
        "trunc_exp",
        "--prior",
        "1/theta",
        "--cond",
        "pm_gamma",
        "--grid",
        "theta=0.5:5:10,gamma=-1:1:5",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("# tool_version: truncgeo "));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 50);
    for row in rows {
        let r: f64 = row[2].parse().unwrap();
        assert!(r.abs() < 1e-6, "{row:?}");
    }
}

#[test]
fn streamline_endpoint() {
    let (code, out, err) = truncgeo(&[
        "streamline",
        "--model",
        "trunc_exp",
        "--start",
        "theta=1,gamma=0",
        "--smax",
        "0.5",
    ]);
    assert_eq!(code, 0, "{err}");
    let rows = data_rows(&out);
    let last = rows.last().unwrap();
    let theta: f64 = last[1].parse().unwrap();
    let gamma: f64 = last[2].parse().unwrap();
    assert!((theta - 2.0).abs() < 1e-6, "{theta}");
    assert!((gamma - 0.5).abs() < 1e-12, "{gamma}");

    // Same numbers as the library call.
    let m = ModelSpec::trunc_exp();
    let line = trace_streamline(&m, &ParamPoint::new(vec![1.0], 0.0), 0.5, 1e-3).unwrap();
    assert_eq!(theta, line.last().point.theta[0]);
}

#[test]
fn geometry_json_matches_library() {
    let (code, out, err) = truncgeo(&[
        "geometry",
        "--model",
        "trunc_normal_natural",
        "--point",
        "theta_1=0.3,theta_2=-0.7,gamma=0.2",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let m = ModelSpec::trunc_normal_natural();
    let geo = geometry_at(&m, &ParamPoint::new(vec![0.3, -0.7], 0.2), &[0.0, 1.0]).unwrap();
    assert_eq!(v["geometry"]["c"].as_f64().unwrap(), geo.c);
    assert_eq!(
        v["geometry"]["g_gammagamma"].as_f64().unwrap(),
        geo.g_gammagamma
    );
    assert!(v["tool_version"].as_str().unwrap().starts_with("truncgeo"));
}

#[test]
fn coverage_csv_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cov.csv");
    let (code, _, err) = truncgeo(&[
        "coverage",
        "--model",
        "trunc_exp",
        "--truth",
        "theta=2,gamma=0",
        "--prior",
        "1/theta",
        "--prior",
        "1",
        "--n",
        "12,24",
        "--replications",
        "100",
        "--level",
        "0.5,0.9",
        "--seed",
        "42",
        "--workers",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&path).unwrap();

    let mut cfg = ExperimentConfig::new(
        "trunc_exp",
        ParamPoint::new(vec![2.0], 0.0),
        &["1/theta", "1"],
        &[12, 24],
        100,
        42,
    );
    cfg.levels = vec![0.5, 0.9];
    let report = Report::from(experiments::run_coverage(&cfg).unwrap());
    assert_eq!(text, report.to_csv());
}

#[test]
fn moment_json_is_readable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mom.json");
    let (code, _, err) = truncgeo(&[
        "moment",
        "--model",
        "trunc_exp",
        "--truth",
        "theta=2,gamma=0",
        "--prior",
        "theta",
        "--n",
        "10,20,40",
        "--replications",
        "100",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    match experiments::read_report(&path).unwrap() {
        Report::Moment(r) => {
            assert_eq!(r.config.n_values, vec![10, 20, 40]);
            assert!(!r.slopes.is_empty());
        }
        other => panic!("unexpected report {other:?}"),
    }
}

#[test]
fn mle_and_posterior_from_data_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.txt");
    std::fs::write(&path, "0.31 0.52, 1.7\n0.44 0.9 2.2 0.35 0.61\n").unwrap();
    let p = path.to_str().unwrap();
    let (code, out, err) = truncgeo(&["mle", "--model", "trunc_exp", "--data", p]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["mle"]["gamma_hat"].as_f64().unwrap(), 0.31);

    let (code, out, err) = truncgeo(&[
        "posterior",
        "--model",
        "trunc_exp",
        "--prior",
        "1/theta",
        "--data",
        p,
        "--level",
        "0.5",
        "--z",
        "-0.5",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let prob = v["cdf"][0]["probability"].as_f64().unwrap();
    assert!(prob > 0.0 && prob < 1.0);
    let z = v["quantiles"][0]["z"].as_f64().unwrap();
    assert!(z < 0.0);
}

#[test]
fn config_file_defines_custom_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("truncgeo.toml");
    std::fs::write(
        &cfg,
        r#"
[[model]]
name = "shifted_exp"
f = ["-x"]
theta_lower = [0.0]
theta_upper = [inf]
reference_theta = [1.0]
tail = { kind = "exponential", scale = 0.5 }
"#,
    )
    .unwrap();
    let (code, out, err) = truncgeo(&[
        "--config",
        cfg.to_str().unwrap(),
        "geometry",
        "--model",
        "shifted_exp",
        "--point",
        "theta=2,gamma=0",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["geometry"]["c"].as_f64().unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn exit_codes() {
    assert_eq!(truncgeo(&[]).0, 2);
    assert!(truncgeo(&[]).2.contains("Usage"));
    assert_eq!(truncgeo(&["--help"]).0, 0);
    assert_eq!(
        truncgeo(&["geometry", "--model", "nope", "--point", "theta=1,gamma=0"]).0,
        2
    );
    assert_eq!(
        truncgeo(&[
            "geometry",
            "--model",
            "trunc_exp",
            "--point",
            "theta=-1,gamma=0"
        ])
        .0,
        1
    );
    assert_eq!(
        truncgeo(&[
            "residual",
            "--model",
            "trunc_exp",
            "--prior",
            "1/",
            "--cond",
            "pm_gamma",
            "--grid",
            "theta=1:2:2,gamma=0:0:1"
        ])
        .0,
        2
    );
}
