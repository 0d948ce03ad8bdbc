use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mgpd::*;

const FIG1: &str = r#"{"representation": "T", "sigma": [2.0, 0.5], "gamma": [0.2, 0.1],
  "generator": {"kind": "IndepGumbel", "params": {"loc": [0.0, 0.0], "scale": [1.0, 1.0]}}}"#;

fn mgpd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgpd"))
        .args(args)
        .env("MGPD_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = mgpd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = path(dir, name);
    fs::write(&p, text).unwrap();
    p
}

fn read_rows(bytes: &[u8]) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

fn simulate_fig1(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let model = write(dir, "fig1.json", FIG1);
    let out = path(dir, name);
    let mut args = vec!["simulate", "--model", &model, "--n", "10000", "--seed", "11", "--out", &out];
    args.extend_from_slice(extra);
    ok(&args);
    PathBuf::from(out)
}

#[test]
fn simulate_writes_reproducible_round_trippable_samples() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate_fig1(dir.path(), "a.csv", &[]);
    let b = simulate_fig1(dir.path(), "b.csv", &["--threads", "3"]);
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());

    let (header, rows) = read_rows(&bytes);
    assert_eq!(header, ["x1", "x2"]);
    assert_eq!(rows.len(), 10_000);
    assert!(rows.iter().all(|r| r.iter().any(|v| *v > 0.0)));

    // writing the parsed values again reproduces the file exactly
    let text = String::from_utf8(bytes).unwrap();
    let again: String = std::iter::once("x1,x2\n".to_string())
        .chain(rows.iter().map(|r| format!("{:.16e},{:.16e}\n", r[0], r[1])))
        .collect();
    assert_eq!(text, again);

    let meta: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("a.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["method"], 1);
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["n"], 10_000);
    let model: GpModel = serde_json::from_value(meta["model"].clone()).unwrap();
    assert_eq!(model, GpModel::from_json(FIG1).unwrap());
}

#[test]
fn fit_recovers_the_simulating_margins() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_fig1(dir.path(), "s.csv", &[]);
    let truth = GpModel::from_json(FIG1).unwrap();
    let mut template = FitTemplate::all_free(&truth);
    template.free.generator.iter_mut().for_each(|g| *g = false);
    let template = write(dir.path(), "template.json", &serde_json::to_string(&template).unwrap());
    let out = path(dir.path(), "fit.json");
    ok(&["fit", "--model", &template, "--data", data.to_str().unwrap(), "--starts", "1", "--out", &out]);

    let r: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(r["converged"], true);
    let want = [("sigma[0]", 2.0), ("sigma[1]", 0.5), ("gamma[0]", 0.2), ("gamma[1]", 0.1)];
    let params = r["parameters"].as_array().unwrap();
    assert_eq!(params.len(), want.len());
    for (name, value) in want {
        let p = params.iter().find(|p| p["name"] == name).unwrap();
        let (est, se) = (p["value"].as_f64().unwrap(), p["stderr"].as_f64().unwrap());
        assert!((est - value).abs() < 3.0 * se, "{name}: {est} ± {se}");
    }
}

#[test]
fn diagnose_reports_one_fifth_above_the_fifth_level() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "fig1.json", FIG1);
    let out = path(dir.path(), "stability.csv");
    ok(&["diagnose", "--model", &model, "--t", "2,5", "--n", "1000000", "--seed", "3", "--out", &out]);
    let (header, rows) = read_rows(&fs::read(&out).unwrap());
    assert_eq!(
        header,
        ["t", "component", "exceedances", "fraction", "fraction_ratio", "ks_statistic", "ks_p_value"]
    );
    assert_eq!(rows.len(), 4);
    for r in rows.iter().filter(|r| r[0] == 5.0) {
        assert!((0.18..=0.22).contains(&r[3]), "{r:?}");
        assert!(r[6] > 0.001, "{r:?}");
    }

    let json = ok(&["diagnose", "--model", &model, "--t", "5", "--n", "20000"]);
    let reports: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(reports[0]["t"], 5.0);
    assert_eq!(reports[0]["margins"].as_array().unwrap().len(), 2);
}

#[test]
fn evaluations_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = write(dir.path(), "fig1.json", FIG1);
    let points = write(dir.path(), "p.csv", "x1,x2\n1,1\n-0.5,0.3\n0.2,-1e-1\n");
    let model = GpModel::from_json(FIG1).unwrap();
    let cfg = QuadratureConfig::default();
    let ev = DensityEvaluator::new(&model, &cfg).unwrap();

    let (header, rows) = read_rows(&ok(&["density", "--model", &model_path, "--data", &points]).stdout);
    assert_eq!(header, ["x1", "x2", "density"]);
    for r in &rows {
        assert_eq!(r[2], ev.density(&r[..2]).unwrap());
    }

    let out = ok(&["density", "--model", &model_path, "--data", &points, "--censor", "-0.2,-0.2"]);
    let (_, rows) = read_rows(&out.stdout);
    assert_eq!(rows[1][2], ev.censored_density(&[-0.2, 0.3], &[true, false]).unwrap());
    assert_eq!(rows[0][2], ev.density(&[1.0, 1.0]).unwrap());

    let (header, rows) = read_rows(&ok(&["cdf", "--model", &model_path, "--data", &points]).stdout);
    assert_eq!(header, ["x1", "x2", "cdf"]);
    for r in &rows {
        assert_eq!(r[2], cdf(&model, &r[..2], &cfg).unwrap());
    }

    let event = write(dir.path(), "event.json", r#"{"type": "box", "lower": [0, 0], "upper": [2, 1]}"#);
    let out = ok(&["prob", "--model", &model_path, "--event", &event]);
    let p: ProbEstimate = serde_json::from_slice(&out.stdout).unwrap();
    let spec: EventSpec = serde_json::from_str(&fs::read_to_string(&event).unwrap()).unwrap();
    let want = prob_event(&model, &spec, ProbMethod::Quadrature, &cfg).unwrap();
    assert_eq!(p, want);

    let out = ok(&["prob", "--model", &model_path, "--event", &event, "--mc", "50000", "--seed", "9"]);
    let mc: ProbEstimate = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(mc.n, Some(50_000));
    assert!((mc.estimate - want.estimate).abs() < 4.0 * mc.std_error, "{mc:?} vs {want:?}");
}

#[test]
fn failures_exit_with_a_code_and_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "fig1.json", FIG1);

    // configuration
    for args in [
        vec!["simulate", "--model", "missing.json", "--out", "x.csv"],
        vec!["simulate", "--model", &model, "--method", "2", "--out", "x.csv"],
        vec!["simulate", "--model", &model, "--method", "7", "--out", "x.csv"],
        vec!["--tol", "-1", "cdf", "--model", &model, "--data", "x.csv"],
        vec!["frobnicate"],
    ] {
        let out = mgpd(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(error_json(&out)["exit_code"], 2);
    }
    let bad_model = write(dir.path(), "bad.json", &FIG1.replace("2.0, 0.5", "-2.0, 0.5"));
    let out = mgpd(&["cdf", "--model", &bad_model, "--data", &model]);
    assert_eq!(out.status.code(), Some(2));

    // data
    let text = write(dir.path(), "text.csv", "x1,x2\n1,abc\n");
    let wide = write(dir.path(), "wide.csv", "x1,x2,x3\n1,1,1\n");
    for data in [&text, &wide] {
        let out = mgpd(&["cdf", "--model", &model, "--data", data]);
        assert_eq!(out.status.code(), Some(3), "{data}");
        assert_eq!(error_json(&out)["exit_code"], 3);
    }
    let out = mgpd(&["fit", "--model", &model, "--data", &text]);
    assert_eq!(out.status.code(), Some(3));

    // numerical: the data scale overflows, and nothing is left behind
    let huge = write(
        dir.path(),
        "huge.json",
        &FIG1.replace("[2.0, 0.5]", "[1e308, 1.0]").replace("[0.2, 0.1]", "[1.0, 1.0]"),
    );
    let target = path(dir.path(), "huge.csv");
    let out = mgpd(&["simulate", "--model", &huge, "--out", &target]);
    assert_eq!(out.status.code(), Some(4));
    let err = error_json(&out);
    assert_eq!(err["error"], "OverflowError");
    assert!(err["message"].as_str().unwrap().contains("overflow"));
    let left: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("huge.csv") || n.starts_with(".tmp"))
        .collect();
    assert!(left.is_empty(), "{left:?}");
}
