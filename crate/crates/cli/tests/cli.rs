use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qgraph_core::io::coupling_to_json;
use qgraph_core::VertexCoupling;
use serde_json::{json, Value};
use tempfile::TempDir;

fn qgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_column(text: &str, col: usize) -> Vec<f64> {
    text.lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(col)?.parse().ok())
        .collect()
}

fn re(x: f64) -> Value {
    json!({"re": x, "im": 0.0})
}

#[test]
fn convert_delta_prime_ab_gives_full_m() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "ab.json",
        &coupling_to_json(&VertexCoupling::delta_prime_s(3, 1.0)),
    );
    let out = qgraph(&["convert", s(&input)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["st"]["m"], 3);
    assert_eq!(v["st"]["perm"], json!([1, 2, 3]));
}

#[test]
fn convert_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&qgraph(&["convert", s(&bad)])), 1);

    // A = B = 0 in the first row
    let zero = json!({"n": 2, "A": [[re(0.0), re(0.0)], [re(0.0), re(1.0)]], "B": [[re(0.0), re(0.0)], [re(0.0), re(0.0)]]});
    let out = qgraph(&["convert", s(&write(&dir, "rank.json", &zero))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("rank deficient"), "{}", stderr(&out));
    assert!(!stderr(&out).contains("panicked"));
}

#[test]
fn build_delta_prime_triangle() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "dp.json",
        &json!({"kind": "delta_prime_s", "n": 3, "beta": 1.0}),
    );
    let out = qgraph(&["build", s(&input), "--d", "0.1"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let inner = v["w_inner"].as_object().unwrap();
    assert_eq!(inner.len(), 3);
    for w in inner.values() {
        assert!((w.as_f64().unwrap() + 120.0).abs() < 1e-9);
    }
    for w in v["w_vertex"].as_object().unwrap().values() {
        assert!((w.as_f64().unwrap() + 21.0).abs() < 1e-9);
    }
}

#[test]
fn build_dirichlet_has_no_inner_edges() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "dir.json", &json!({"kind": "dirichlet", "n": 3}));
    let out = qgraph(&["build", s(&input), "--d", "0.2"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["w_inner"].as_object().unwrap().is_empty());
}

#[test]
fn build_singular_d_exits_3_with_pair() {
    let dir = TempDir::new().unwrap();
    // d S_12 + T_1 conj(T_2) = 0.1 * (-10) + 1 vanishes at d = 0.1
    let st = json!({"st": {"m": 2, "perm": [1, 2, 3],
        "S": [[re(0.0), re(-10.0)], [re(-10.0), re(0.0)]],
        "T": [[re(1.0)], [re(1.0)]]}});
    let out = qgraph(&["build", s(&write(&dir, "st.json", &st)), "--d", "0.1"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("{1,2}"), "{}", stderr(&out));
}

#[test]
fn convert_then_build_then_spectrum_round_trip() {
    let dir = TempDir::new().unwrap();
    let ab = write(
        &dir,
        "ab.json",
        &coupling_to_json(&VertexCoupling::delta(3, 1.5)),
    );
    let st = dir.path().join("st.json");
    assert_eq!(code(&qgraph(&["convert", s(&ab), "--out", s(&st)])), 0);
    let graph = dir.path().join("g.json");
    assert_eq!(
        code(&qgraph(&[
            "build",
            s(&st),
            "--d",
            "0.05",
            "--out",
            s(&graph)
        ])),
        0
    );
    // the emitted graph re-parses: reconvert is idempotent and the graph feeds other commands
    let st2 = dir.path().join("st2.json");
    assert_eq!(code(&qgraph(&["convert", s(&st), "--out", s(&st2)])), 0);
    assert_eq!(std::fs::read(&st).unwrap(), std::fs::read(&st2).unwrap());
    let out = qgraph(&["spectrum", s(&graph), "--count", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(csv_column(&stdout(&out), 1).len(), 3);
}

#[test]
fn scattering_sweep_is_reproducible_and_converges() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "delta.json",
        &json!({"kind": "delta", "n": 3, "alpha": 1.0}),
    );
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let out = qgraph(&["sweep", s(&input), "--metric", "scattering", "--out", s(&a)]);
    assert_eq!(code(&out), 0);
    let summary = stdout(&out);
    let slope: f64 = summary
        .trim()
        .strip_prefix("slope=")
        .unwrap()
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(slope >= 0.4, "{summary}");
    assert_eq!(
        code(&qgraph(&[
            "sweep",
            s(&input),
            "--metric",
            "scattering",
            "--out",
            s(&b)
        ])),
        0
    );
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn single_d_sweep_is_inconclusive_but_succeeds() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "delta.json",
        &json!({"kind": "delta", "n": 2, "alpha": 1.0}),
    );
    let out = qgraph(&["sweep", s(&input), "--d-range", "4:4"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("inconclusive"));
}

#[test]
fn sweep_failing_everywhere_exits_4() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "dir.json", &json!({"kind": "dirichlet", "n": 2}));
    // π² is an eigenvalue of the truncated star
    let z = std::f64::consts::PI.powi(2).to_string();
    let out = qgraph(&[
        "sweep",
        s(&input),
        "--metric",
        "hs",
        "--z-re",
        &z,
        "--d-range",
        "3:5",
    ]);
    assert_eq!(code(&out), 4);
    assert!(stdout(&out).contains("skipped("));
}

#[test]
fn budget_exponents_and_range() {
    let out = qgraph(&["budget", "--alpha", "0.0714285714"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["exponents"]["combined"].as_f64().unwrap() - 1.0 / 28.0).abs() < 1e-9);

    let v: Value = serde_json::from_str(&stdout(&qgraph(&["budget"]))).unwrap();
    assert_eq!(v["optimal_alpha"].as_f64().unwrap(), 1.0 / 14.0);
    assert_eq!(v["alpha"].as_f64().unwrap(), 1.0 / 14.0);
    let v: Value =
        serde_json::from_str(&stdout(&qgraph(&["budget", "--vanishing-overlaps"]))).unwrap();
    assert_eq!(v["optimal_alpha"].as_f64().unwrap(), 1.0 / 8.0);

    assert_eq!(code(&qgraph(&["budget", "--alpha", "0.2"])), 2);
}

#[test]
fn budget_with_graph_reports_form_bound() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "dp.json",
        &json!({"kind": "delta_prime_s", "n": 3, "beta": 1.0}),
    );
    let out = qgraph(&["budget", "--graph", s(&input), "--samples", "20"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["form_bound"]["violations"], 0);
}

#[test]
fn spectrum_reference_values() {
    let dir = TempDir::new().unwrap();
    let kirchhoff = write(&dir, "k.json", &json!({"kind": "kirchhoff", "n": 2}));
    let out = qgraph(&["spectrum", s(&kirchhoff), "--L", "1", "--count", "4"]);
    assert_eq!(code(&out), 0);
    for (i, lam) in csv_column(&stdout(&out), 1).into_iter().enumerate() {
        let want = ((i + 1) as f64 * std::f64::consts::FRAC_PI_2).powi(2);
        assert!((lam - want).abs() < 1e-9 * want, "{i}: {lam}");
    }

    let dirichlet = write(&dir, "d.json", &json!({"kind": "dirichlet", "n": 3}));
    let out = qgraph(&["spectrum", s(&dirichlet), "--count", "6"]);
    let lams = csv_column(&stdout(&out), 1);
    let pi2 = std::f64::consts::PI.powi(2);
    for (i, lam) in lams.into_iter().enumerate() {
        let want = pi2 * ((i / 3 + 1) as f64).powi(2);
        assert!((lam - want).abs() < 1e-9 * want, "{i}: {lam}");
    }

    let first = stdout(&qgraph(&["spectrum", s(&kirchhoff), "--count", "4"]));
    assert_eq!(
        first,
        stdout(&qgraph(&["spectrum", s(&kirchhoff), "--count", "4"]))
    );
}

#[test]
fn spectrum_of_approx_graph_tracks_star() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "dp.json",
        &json!({"kind": "delta_prime_s", "n": 3, "beta": 1.0}),
    );
    let graph = dir.path().join("g.json");
    let d = 0.05f64;
    assert_eq!(
        code(&qgraph(&[
            "build",
            s(&input),
            "--d",
            "0.05",
            "--out",
            s(&graph)
        ])),
        0
    );
    let star = csv_column(
        &stdout(&qgraph(&["spectrum", s(&input), "--count", "4"])),
        1,
    );
    // skip the inner-edge bound states near -1/d^2
    let approx = csv_column(
        &stdout(&qgraph(&[
            "spectrum",
            s(&graph),
            "--floor",
            "-5",
            "--count",
            "4",
        ])),
        1,
    );
    for (a, b) in approx.iter().zip(&star) {
        assert!((a - b).abs() <= d.sqrt() * b.abs(), "{a} vs {b}");
    }
}

#[test]
fn scan_shortfall_exits_5() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "k.json", &json!({"kind": "kirchhoff", "n": 2}));
    let out = qgraph(&["spectrum", s(&input), "--floor", "1e15"]);
    assert_eq!(code(&out), 5);
    assert!(stderr(&out).contains("insufficient scan range"));
}
