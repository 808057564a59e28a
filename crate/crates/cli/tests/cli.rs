use std::path::PathBuf;
use std::process::Command;

use dynheight_cli::{run, ProblemConfig, RunOptions, SCHEMA};
use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn load(name: &str) -> dynheight_cli::Problem {
    ProblemConfig::load(&corpus(name)).unwrap().validate().unwrap()
}

fn task<'a>(body: &'a Value, name: &str) -> &'a Value {
    body["tasks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["name"] == name)
        .unwrap_or_else(|| panic!("no task {name}"))
}

const CORPUS: [&str; 3] = ["squaring.toml", "monomial_jordan.toml", "fibonacci.toml"];

#[test]
fn corpus_round_trips() {
    for name in CORPUS {
        let cfg = ProblemConfig::load(&corpus(name)).unwrap();
        let again = ProblemConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}

#[test]
fn runs_are_deterministic() {
    for name in CORPUS {
        let p = load(name);
        let a = serde_json::to_string(&run(&p, &RunOptions::default()).body()).unwrap();
        let b = serde_json::to_string(&run(&p, &RunOptions::default()).body()).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn empty_task_list() {
    let p = ProblemConfig::parse("space = [1]\n").unwrap().validate().unwrap();
    let r = run(&p, &RunOptions::default());
    assert!(r.tasks.is_empty());
    assert_eq!(r.exit_code(), 0);
    assert_eq!(r.body()["schema"], SCHEMA);
}

#[test]
fn squaring_profile_and_canonical() {
    let r = run(&load("squaring.toml"), &RunOptions::default());
    assert_eq!(r.exit_code(), 0);
    let body = r.body();
    let prof = &task(&body, "profile-P")["result"];
    assert_eq!(prof["spectral"]["alpha"], "2");
    assert_eq!(prof["spectral"]["t"], 0);
    assert_eq!(prof["consistency"]["pass"], true);
    let can = &task(&body, "canonical-P")["result"]["estimate"];
    let v: f64 = can["value"].as_str().unwrap().parse().unwrap();
    assert!((v - 2f64.ln()).abs() < 1e-12);
    let dml = &task(&body, "dml-shift")["result"];
    assert_eq!(dml["status"], "certified");
    assert_eq!(dml["gap"]["B"], 4);
}

#[test]
fn square_cube_is_finite_certified() {
    let r = run(
        &load("monomial_jordan.toml"),
        &RunOptions { select: vec!["dml".into()], ..Default::default() },
    );
    assert_eq!(r.tasks.len(), 1);
    let body = r.body();
    let dml = &task(&body, "dml-square-cube")["result"];
    assert_eq!(dml["finiteness"]["verdict"], "finite-certified");
    assert_eq!(dml["search"]["hits"], serde_json::json!([[0, 0]]));
}

#[test]
fn monomial_profile_reports_both_paths() {
    let r = run(&load("monomial_jordan.toml"), &RunOptions { select: vec!["profile-mono".into()], ..Default::default() });
    let body = r.body();
    let prof = &task(&body, "profile-mono")["result"];
    assert_eq!(prof["spectral"]["alpha"], "2");
    assert_eq!(prof["spectral"]["t"], 1);
    // the regression exponent is biased low on short windows; the report must say so
    assert_eq!(prof["consistency"]["pass"], false);
}

#[test]
fn fibonacci_uses_regression() {
    let r = run(&load("fibonacci.toml"), &RunOptions::default());
    let body = r.body();
    let prof = &task(&body, "profile-fib")["result"];
    assert_eq!(prof["spectrum_exact"], false);
    let a: f64 = prof["regression"]["alpha"].as_str().unwrap().parse().unwrap();
    assert!((a - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-3);
}

#[test]
fn config_errors_name_the_field() {
    let bad_ref = "space = [1]\n[maps.f]\npower = [2]\n[[tasks]]\nkind = \"spectrum\"\nmap = \"g\"\nample = [1]\n";
    let e = ProblemConfig::parse(bad_ref).unwrap().validate().unwrap_err();
    assert_eq!(e.field, "tasks[0].map");
    let bad_exps = "space = [1]\n[maps.f]\nfactors = [[[[1, [2, 0, 0]]], [[1, [0, 2]]]]]\n";
    let e = ProblemConfig::parse(bad_exps).unwrap().validate().unwrap_err();
    assert!(e.field.starts_with("maps.f.factors[0][0]"), "{e}");
    let e = ProblemConfig::parse("space = [1]\nbogus = 3\n").unwrap_err();
    assert_eq!(e.field, "line 2");
    let not_ample = "space = [1, 1]\n[maps.f]\npower = [2, 2]\n[[tasks]]\nkind = \"spectrum\"\nmap = \"f\"\nample = [1, 0]\n";
    assert_eq!(ProblemConfig::parse(not_ample).unwrap().validate().unwrap_err().field, "tasks[0].ample");
}

#[test]
fn task_errors_do_not_abort_siblings() {
    // (0:1) x (1:0) sends the first output factor to (0:0)
    let text = r#"
space = [1, 1]
[maps.fib]
mode = "total"
factors = [
    [[[1, [1, 0, 1, 0]]], [[1, [0, 1, 0, 1]]]],
    [[[1, [1, 0, 0, 0]]], [[1, [0, 1, 0, 0]]]],
]
[points.bad]
coords = [[0, 1], [1, 0]]
[[tasks]]
kind = "heights"
map = "fib"
point = "bad"
divisor = [1, 1]
depth = 3
[[tasks]]
kind = "spectrum"
map = "fib"
ample = [1, 1]
"#;
    let r = run(&ProblemConfig::parse(text).unwrap().validate().unwrap(), &RunOptions::default());
    assert!(r.tasks[0].failure.is_some());
    assert!(r.tasks[1].failure.is_none());
    assert_eq!(r.body()["tasks"][0]["status"], "error");
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynheight"))
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = binary()
        .args(["run", corpus("squaring.toml").to_str().unwrap(), "--out"])
        .arg(dir.path())
        .env_remove("DYNHEIGHT_PRECISION")
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], SCHEMA);
    assert!(dir.path().join("heights-P.csv").exists());

    let cfg = dir.path().join("broken.toml");
    std::fs::write(&cfg, "space = [1]\n[[tasks]]\nkind = \"nope\"\n").unwrap();
    let bad = binary().args(["run", cfg.to_str().unwrap(), "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));

    let env_bad = binary()
        .args(["run", corpus("squaring.toml").to_str().unwrap(), "--out"])
        .arg(dir.path())
        .env("DYNHEIGHT_PRECISION", "lots")
        .output()
        .unwrap();
    assert_eq!(env_bad.status.code(), Some(1));

    // no closed form for the monomial map, so the search cannot be closed off
    let limited = dir.path().join("limited.toml");
    std::fs::write(
        &limited,
        r#"
space = [1, 1]
[maps.mono]
mode = "orbit-checked"
factors = [
    [[[1, [2, 0, 0, 0]]], [[1, [0, 2, 0, 0]]]],
    [[[1, [1, 0, 2, 0]]], [[1, [0, 1, 0, 2]]]],
]
[points.P]
coords = [[2, 1], [3, 1]]
[points.Q]
coords = [[4, 1], [18, 1]]
[[tasks]]
kind = "dml"
f = "mono"
g = "mono"
p = "P"
q = "Q"
ample = [1, 1]
horizon = 8
"#,
    )
    .unwrap();
    let out = binary().args(["run", limited.to_str().unwrap(), "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
