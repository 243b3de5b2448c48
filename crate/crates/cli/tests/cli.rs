use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use riesz_dre::ate::AteReport;
use riesz_dre::dre::FittedRatioModel;
use riesz_dre::models::{BasisExpansion, Link, RatioModel};
use riesz_dre::synthetic::GaussianShiftDesign;
use serde_json::Value;
use tempfile::TempDir;

fn rdre(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdre")).current_dir(dir).args(args).output().expect("spawn rdre")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = rdre(dir, args);
    assert!(out.status.success(), "rdre {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["synth", "gen", "--n", "300", "--seed", "4", "--out", "a.csv", "--emit-oracle", "o.json"]);
    ok(p, &["synth", "gen", "--n", "300", "--seed", "4", "--out", "b.csv"]);
    let a = fs::read(p.join("a.csv")).unwrap();
    assert_eq!(a, fs::read(p.join("b.csv")).unwrap());
    assert_eq!(String::from_utf8_lossy(&a).lines().count(), 301);
    let o = json(p.join("o.json"));
    assert_eq!(o["oracle"]["kind"], "observational");
    assert_eq!(o["oracle"]["tau0"], 1.0);
    for key in ["beta", "b", "gamma0", "gamma1", "eps"] {
        assert!(o["oracle"]["design"].get(key).is_some(), "oracle lacks {key}");
    }
    assert_eq!(o["config"]["seed"], "4");
    let sidecar = json(p.join("a.csv.config.json"));
    assert_eq!(sidecar["config"]["n"], "300");
}

#[test]
fn synth_gen_to_stdout() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["synth", "gen", "--design", "gaussian-small-shift", "--n", "20"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("x1,sample"));
    assert_eq!(text.lines().count(), 41);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    assert_eq!(rdre(p, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(rdre(p, &["equivalence-check", "--trials", "0"]).status.code(), Some(1));
    assert_eq!(rdre(p, &["ate", "estimate"]).status.code(), Some(1));
    assert_eq!(rdre(p, &["ate", "estimate", "--data", "missing.csv"]).status.code(), Some(2));
    fs::write(p.join("bad.csv"), "x1,d,y\n0.5,1,2.0\n0.1,oops,1.0\n").unwrap();
    assert_eq!(rdre(p, &["equivalence-check", "--data", "bad.csv"]).status.code(), Some(2));
    fs::write(p.join("nb.csv"), "x1,d,y\n0.5,1,2.0\n0.1,2,1.0\n0.3,0,1.0\n").unwrap();
    assert_eq!(rdre(p, &["ate", "estimate", "--data", "nb.csv"]).status.code(), Some(2));
    assert_eq!(rdre(p, &["--help"]).status.code(), Some(0));
}

#[test]
fn equivalence_check_passes() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["equivalence-check", "--synthetic", "--n", "500", "--trials", "100", "--seed", "2"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["trials"], 100);
    assert_eq!(v["rows"], 500);
    assert!(v["max_rel_discrepancy"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["pass"], true);
}

#[test]
fn config_file_values_and_overrides() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["synth", "gen", "--n", "400", "--seed", "1", "--out", "d.csv"]);
    fs::write(p.join("run.ini"), "# ate settings\nfolds = 3\nseed = 11\nestimator = plugin\nouter-space = 1\n").unwrap();
    ok(p, &["ate", "estimate", "--config", "run.ini", "--data", "d.csv", "--estimator", "debiased", "--out", "r.json"]);
    let v = json(p.join("r.json"));
    assert_eq!(v["config"]["folds"], "3");
    assert_eq!(v["config"]["seed"], "11");
    assert_eq!(v["config"]["estimator"], "debiased");
    assert_eq!(v["folds"], 3);
    assert_eq!(v["estimator_kind"], "debiased");
}

#[test]
fn ate_report_mirrors_report_fields() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["synth", "gen", "--n", "2000", "--seed", "1", "--out", "data.csv"]);
    let args = [
        "ate", "estimate", "--data", "data.csv", "--folds", "5", "--riesz-objective", "riesz-lsq",
        "--outcome-model", "linear:poly:2", "--seed", "1", "--out", "report.json",
    ];
    ok(p, &args);
    let first = fs::read(p.join("report.json")).unwrap();
    ok(p, &args);
    assert_eq!(first, fs::read(p.join("report.json")).unwrap());
    let report: AteReport = serde_json::from_slice(&first).unwrap();
    assert_eq!(report.n, 2000);
    assert_eq!(report.per_fold.len(), 5);
    assert!(report.ci_low < report.tau_hat && report.tau_hat < report.ci_high);
    assert!((report.tau_hat - 1.0).abs() < 4.0 * report.se);
}

#[test]
fn riesz_fit_objectives() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["synth", "gen", "--n", "800", "--seed", "5", "--out", "d.csv"]);
    let mut values = Vec::new();
    for obj in ["riesz-lsq", "paired-lsif"] {
        let out = ok(p, &["riesz", "fit", "--data", "d.csv", "--objective", obj]);
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["converged"], true);
        values.push(v["objective_value"].as_f64().unwrap());
    }
    assert!((values[0] - values[1]).abs() <= 1e-12 * values[0].abs());
    let out = ok(p, &["riesz", "fit", "--data", "d.csv", "--objective", "riesz-ukl"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["model"]["r1"]["link"]["kind"], "shifted_softplus");
    assert_eq!(rdre(p, &["riesz", "fit", "--data", "d.csv", "--objective", "riesz-ukl", "--link", "identity"]).status.code(), Some(1));
    let out = ok(p, &["riesz", "fit", "--data", "d.csv", "--shared-basis", "false", "--model", "linear:rbf:5:median"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["model"]["shared_basis"], false);
}

fn write_model(path: &Path, model: RatioModel) {
    let doc = serde_json::json!({ "model": FittedRatioModel::Single { model } });
    fs::write(path, serde_json::to_vec(&doc).unwrap()).unwrap();
}

#[test]
fn dre_eval_against_oracle() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["synth", "gen", "--design", "gaussian-small-shift", "--n", "20000", "--seed", "8", "--out", "ts.csv", "--emit-oracle", "o.json"]);
    let g = GaussianShiftDesign::small_shift();
    let mu = g.mu_shift[0];
    let s2 = g.sd * g.sd;
    let basis = BasisExpansion::polynomial(1, 1).unwrap();
    write_model(&p.join("truth.json"), RatioModel::new(basis.clone(), vec![-mu * mu / (2.0 * s2), mu / s2], Link::Exp).unwrap());
    let v: Value = serde_json::from_slice(&ok(p, &["dre", "eval", "--model", "truth.json", "--data", "ts.csv", "--oracle", "o.json"]).stdout).unwrap();
    assert!(v["oracle"]["l2_error"].as_f64().unwrap() <= 1e-10);

    write_model(&p.join("one.json"), RatioModel::constant(basis, Link::Identity, 1.0).unwrap());
    let v: Value = serde_json::from_slice(&ok(p, &["dre", "eval", "--model", "one.json", "--data", "ts.csv", "--oracle", "o.json"]).stdout).unwrap();
    let (l2, se) = (v["oracle"]["l2_error"].as_f64().unwrap(), v["oracle"]["l2_error_se"].as_f64().unwrap());
    // E_de[(r₀ − 1)²] = exp(μ²/σ²) − 1 for a mean shift.
    let analytic = (mu * mu / s2).exp() - 1.0;
    assert!((l2 - analytic).abs() <= 4.0 * se, "{l2} vs {analytic} (se {se})");

    let v: Value = serde_json::from_slice(&ok(p, &["dre", "eval", "--model", "one.json", "--data", "ts.csv"]).stdout).unwrap();
    assert!(v.get("oracle").is_none());
    assert_eq!(v["mean_ratio_de"], 1.0);
}

#[test]
fn dre_eval_schema_mismatch() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["synth", "gen", "--design", "gaussian-large-gap", "--n", "50", "--out", "ts.csv"]);
    write_model(&p.join("m.json"), RatioModel::constant(BasisExpansion::polynomial(1, 1).unwrap(), Link::Exp, 1.0).unwrap());
    assert_eq!(rdre(p, &["dre", "eval", "--model", "m.json", "--data", "ts.csv"]).status.code(), Some(2));
    fs::write(p.join("junk.json"), "{\"model\": {\"form\": \"nope\"}}").unwrap();
    assert_eq!(rdre(p, &["dre", "eval", "--model", "junk.json", "--data", "ts.csv"]).status.code(), Some(2));
}

#[test]
fn dre_fit_round_trip() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["synth", "gen", "--design", "gaussian-small-shift", "--n", "400", "--seed", "2", "--out", "ts.csv", "--emit-oracle", "o.json"]);
    ok(p, &["dre", "fit", "--data", "ts.csv", "--loss", "ukl", "--out", "m1.json"]);
    ok(p, &["dre", "fit", "--data", "ts.csv", "--loss", "ukl", "--telescope-m", "1", "--out", "m2.json"]);
    let (a, b) = (json(p.join("m1.json")), json(p.join("m2.json")));
    assert_eq!(a["model"], b["model"]);
    assert_eq!(a["model"]["form"], "single");
    ok(p, &["dre", "fit", "--data", "ts.csv", "--loss", "bkl", "--telescope-m", "2", "--out", "t.json"]);
    assert_eq!(json(p.join("t.json"))["model"]["stages"].as_array().unwrap().len(), 2);
    ok(p, &["dre", "fit", "--data", "ts.csv", "--model", "kulsif:median:0.01", "--out", "k.json"]);
    let v: Value = serde_json::from_slice(&ok(p, &["dre", "eval", "--model", "k.json", "--data", "ts.csv", "--oracle", "o.json"]).stdout).unwrap();
    assert!(v["oracle"]["l2_error"].as_f64().unwrap() < 0.2);
    assert_eq!(rdre(p, &["dre", "fit", "--data", "ts.csv", "--model", "kulsif:median:0.01", "--loss", "ukl"]).status.code(), Some(1));
    assert_eq!(rdre(p, &["dre", "fit", "--data", "ts.csv", "--loss", "riesz-ukl"]).status.code(), Some(1));
}

#[test]
fn simulate_shape_and_determinism() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["simulate", "--reps", "1", "--n", "200", "--estimators", "debiased", "--out", "s.csv"]);
    let text = fs::read_to_string(p.join("s.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "design,n,rep,estimator,tau_hat,se,covered,runtime_ms");
    assert_eq!(lines.len(), 2);

    let strip = |t: &str| t.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>();
    let run = |threads: &str| {
        let out = ok(p, &["simulate", "--reps", "3", "--n", "150,250", "--estimators", "debiased,ipw,naive", "--seed", "9", "--threads", threads]);
        strip(&String::from_utf8(out.stdout).unwrap())
    };
    assert_eq!(run("1"), run("2"));
}

#[test]
fn simulate_oracle_coverage() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["simulate", "--reps", "200", "--n", "500", "--estimators", "oracle", "--out", "s.csv"]);
    let v = json(p.join("s.csv.config.json"));
    let cov = v["summary"][0]["coverage"].as_f64().unwrap();
    assert!((0.88..=1.0).contains(&cov), "oracle coverage {cov}");
}
