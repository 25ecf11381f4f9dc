use std::path::Path;
use std::process::Command;

use entropic_core::indep::{enumerate_ik, Graph, SetFunction};
use itertools::Itertools;
use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    json: Value,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_entropic-lab"))
        .args(args)
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8(out.stdout).unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        json: serde_json::from_str(&stdout).unwrap_or(Value::Null),
        stdout,
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn path_graph_file(dir: &TempDir) -> String {
    write(
        dir,
        "p5.txt",
        "# path on five vertices\n5 4\n0 1\n1 2\n2 3\n3 4\n",
    )
}

#[test]
fn influence_of_uniform_cube_is_identity() {
    let dir = TempDir::new().unwrap();
    let atoms = (0..8)
        .map(|x: usize| format!(r#"{{"state":"{:03b}","p":0.125}}"#, x))
        .join(",");
    let file = write(
        &dir,
        "u.json",
        &format!(r#"{{"kind":"cube","n":3,"atoms":[{atoms}]}}"#),
    );
    let r = run(&["influence", &file]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json["command"], "influence");
    let norms = &r.json["results"]["norms"];
    assert!((norms["op"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((norms["l1"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r.json["results"]["active"], serde_json::json!([0, 1, 2]));
}

#[test]
fn influence_of_four_cycle_slice() {
    // uniform on {{0,2},{1,3}}: every pair of coordinates is perfectly
    // (anti)correlated, so Ψ has ±1 entries and norm 4
    let dir = TempDir::new().unwrap();
    let file = write(
        &dir,
        "c4.json",
        r#"{"kind":"slice","n":4,"k":2,"atoms":[{"state":[0,2],"p":0.5},{"state":[1,3],"p":0.5}]}"#,
    );
    let r = run(&["influence", &file]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let op = r.json["results"]["norms"]["op"].as_f64().unwrap();
    assert!((op - 4.0).abs() < 1e-9, "{op}");
    let psi = &r.json["results"]["psi"];
    assert_eq!(psi[0][1].as_f64().unwrap(), -1.0);
    assert_eq!(psi[0][2].as_f64().unwrap(), 1.0);
}

#[test]
fn malformed_inputs_exit_with_usage_code() {
    let dir = TempDir::new().unwrap();
    let file = write(
        &dir,
        "bad.json",
        r#"{"kind":"cube","n":2,"atoms":[{"state":"01","p":1.0}"#,
    );
    let r = run(&["influence", &file]);
    assert_eq!(r.code, 2);
    assert!(r.stdout.is_empty());
    assert!(r.stderr.contains("bad.json"), "{}", r.stderr);

    let graph = write(&dir, "g.txt", "3 2\n0 1\n1 1\n");
    let r = run(&["conserve", &graph]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 3"), "{}", r.stderr);

    assert_eq!(run(&["verify", "lemma9.9"]).code, 2);
    assert_eq!(run(&["influence", "/nonexistent/measure.json"]).code, 2);
    assert_eq!(run(&["frobnicate"]).code, 2);

    let config = write(&dir, "c.json", r#"{"nonsense": 1}"#);
    assert_eq!(run(&["--config", &config, "verify", "lemma5.3"]).code, 2);
}

#[test]
fn verify_checks_pass_on_small_configs() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "c.json", r#"{"n": 8, "count": 50}"#);
    let r = run(&["--config", &config, "verify", "lemma5.4"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.json["results"]["cases"], 50);

    let config = write(
        &dir,
        "p.json",
        r#"{"suite": "product", "count": 4, "n": 5, "family_size": 30}"#,
    );
    let r = run(&["--seed", "3", "--config", &config, "verify", "thm1.5"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.json["seed"], 3);
    assert_eq!(r.json["command"], "verify thm1.5");
    for m in r.json["results"]["measures"].as_array().unwrap() {
        let report = &m["report"];
        assert!(report["max_ratio"].as_f64().unwrap() <= report["bound"].as_f64().unwrap() + 1e-6);
    }
}

#[test]
fn conserve_with_no_steps_has_unit_ratio() {
    let dir = TempDir::new().unwrap();
    let graph = path_graph_file(&dir);
    let config = write(&dir, "c.json", r#"{"k": 2, "ell": 2, "traces": 2}"#);
    let r = run(&["--config", &config, "conserve", &graph]);
    assert_eq!(
        r.json["results"]["conservation"]["ratio"].as_f64().unwrap(),
        1.0
    );
}

/// Averages `Ent` of `f` over the sets containing each ordered prefix of a
/// uniform independent set, divided by `Ent` under the uniform law.
fn brute_force_ratio(g: &Graph, k: usize, steps: usize, f: &SetFunction) -> f64 {
    let sets = enumerate_ik(g, k);
    let ent = |family: &[&Vec<usize>]| {
        let vals: Vec<f64> = family.iter().map(|s| f.eval(s)).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|&v| v * (v / m).ln()).sum::<f64>() / vals.len() as f64
    };
    let all: Vec<&Vec<usize>> = sets.iter().collect();
    let mut total = 0.0;
    let mut count = 0.0;
    for set in &sets {
        for prefix in set.iter().permutations(steps) {
            let containing: Vec<&Vec<usize>> = sets
                .iter()
                .filter(|s| prefix.iter().all(|v| s.contains(v)))
                .collect();
            total += ent(&containing);
            count += 1.0;
        }
    }
    total / count / ent(&all)
}

#[test]
fn conserve_exact_matches_brute_force_and_writes_csv() {
    let dir = TempDir::new().unwrap();
    let graph = path_graph_file(&dir);
    let config = write(
        &dir,
        "c.json",
        r#"{"k": 2, "ell": 1, "family_size": 40, "traces": 4}"#,
    );
    let csv = dir.path().join("steps.csv");
    let r = run(&[
        "--seed",
        "4",
        "--mode",
        "exact",
        "--csv",
        csv.to_str().unwrap(),
        "--config",
        &config,
        "conserve",
        &graph,
    ]);
    let results = &r.json["results"];
    let report = &results["conservation"];
    assert_eq!(report["mode"], "exact");
    let f: SetFunction = serde_json::from_value(results["function"].clone()).unwrap();
    let oracle = brute_force_ratio(&Graph::path(5), 2, 1, &f);
    let ratio = report["ratio"].as_f64().unwrap();
    assert!((ratio - oracle).abs() < 1e-12, "{ratio} vs {oracle}");
    assert!(report["product_bound"].as_f64().unwrap() <= ratio);

    // k = 2 > α_c(3)·5 violates the density precondition and is reported
    assert_eq!(results["precondition_violated"], true);
    assert_eq!(r.code, 0);

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("t,remaining_k,expected_entropy,stderr,c_hat")
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn monte_carlo_mode_reports_stderr() {
    let dir = TempDir::new().unwrap();
    let graph = path_graph_file(&dir);
    let config = write(
        &dir,
        "c.json",
        r#"{"k": 2, "ell": 1, "family_size": 20, "traces": 2}"#,
    );
    let r = run(&["--mode", "mc", "--config", &config, "conserve", &graph]);
    let report = &r.json["results"]["conservation"];
    assert_eq!(report["mode"], "mc");
    assert!(report["stderr"].as_f64().unwrap() > 0.0);
    assert!(report["samples"].as_u64().unwrap() >= 10_000);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let graph = path_graph_file(&dir);
    let config = write(
        &dir,
        "c.json",
        r#"{"k": 2, "ell": 1, "family_size": 20, "traces": 3}"#,
    );
    let results = |args: &[&str]| {
        let r = run(args);
        serde_json::to_string(&r.json["results"]).unwrap()
    };
    for args in [
        vec![
            "--seed", "7", "--mode", "mc", "--config", &config, "conserve", &graph,
        ],
        vec!["--seed", "7", "verify", "decomposition"],
        vec!["--seed", "7", "--threads", "2", "verify", "lemma5.3"],
    ] {
        let a = results(&args);
        assert_ne!(a, "null");
        assert_eq!(a, results(&args));
    }
    assert!(Path::new(&graph).exists());
}

#[test]
fn config_hash_ignores_key_order() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", r#"{"n": 4, "count": 5}"#);
    let b = write(&dir, "b.json", r#"{"count": 5, "n": 4}"#);
    let ha = run(&["--config", &a, "verify", "lemma5.4"]).json["config_hash"].clone();
    let hb = run(&["--config", &b, "verify", "lemma5.4"]).json["config_hash"].clone();
    assert_eq!(ha, hb);
    assert_eq!(ha.as_str().unwrap().len(), 64);
}
