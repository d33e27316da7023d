//! Acceptance criterion 11: scenario determinism under a fixed seed.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tropdyn"))
}

const ABS_MINUS: &str = r#"{
  "arity": 2,
  "num": [
    {"offset": 0.0, "coeffs": ["0/1", "1/1"]},
    {"offset": 0.0, "coeffs": ["0/1", "-1/1"]}
  ],
  "den": [{"offset": 0.0, "coeffs": ["1/1", "0/1"]}]
}"#;

const MIXED: &str = r#"{
  "arity": 2,
  "num": [
    {"offset": 0.0, "coeffs": ["0/1", "0/1"]},
    {"offset": 0.0, "coeffs": ["0/1", "1/1"]}
  ],
  "den": [
    {"offset": 0.0, "coeffs": ["0/1", "0/1"]},
    {"offset": 0.0, "coeffs": ["-1/1", "0/1"]}
  ]
}"#;

fn scaled(pres: &str, n: usize) -> String {
    let mut v: serde_json::Value = serde_json::from_str(pres).unwrap();
    let num = v["num"].as_array().unwrap().clone();
    let mut rep = Vec::new();
    for _ in 0..n {
        rep.extend(num.iter().cloned());
    }
    v["num"] = serde_json::Value::Array(rep);
    v.to_string()
}

fn run_manifest(dir: &Path, cfg: &Path, kind: &str, out: &Path, seed: u64) -> Vec<u8> {
    let status = bin()
        .args([kind, "--config"])
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(["--seed", &seed.to_string()])
        .current_dir(dir)
        .status()
        .unwrap();
    assert!(status.success());
    fs::read(out.join("manifest.json")).unwrap()
}

#[test]
fn criterion_11_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("psi1.json"), ABS_MINUS).unwrap();
    fs::write(dir.path().join("phi1.json"), MIXED).unwrap();
    fs::write(dir.path().join("psi2.json"), scaled(ABS_MINUS, 2)).unwrap();
    fs::write(dir.path().join("phi2.json"), scaled(MIXED, 2)).unwrap();
    // a seeded sandwich comparison and a seeded probe
    fs::write(
        dir.path().join("sandwich.json"),
        r#"{"kind": "compare",
            "inputs": {"psi1": "psi1.json", "phi1": "phi1.json",
                        "psi2": "psi2.json", "phi2": "phi2.json"},
            "params": {"t": 25.0, "sandwich": true,
                       "x_init": [0.5, -0.5, 1.0, 0.2, -0.1, 0.9],
                       "y_init": [0.3, 0.0, 0.7, -0.2],
                       "i_extent": 6, "j_extent": 4}}"#,
    )
    .unwrap();
    fs::write(
        dir.path().join("probe.json"),
        r#"{"kind": "recurse", "inputs": {"automaton": "builtin:lamplighter"},
            "params": {"extension": "lamplighter", "t": 1000000.0, "C": 2.0,
                       "state_word": [1], "level": 4, "columns": 30}}"#,
    )
    .unwrap();
    for (cfg, kind) in [("sandwich.json", "compare"), ("probe.json", "recurse")] {
        let a = run_manifest(dir.path(), &dir.path().join(cfg), kind, &dir.path().join("a"), 42);
        let b = run_manifest(dir.path(), &dir.path().join(cfg), kind, &dir.path().join("b"), 42);
        assert_eq!(a, b, "{cfg}: manifests differ between identical seeded runs");
        // artifact payloads, not only their hashes
        for name in ["grid1.csv", "probe.txt"] {
            let pa = dir.path().join("a").join(name);
            if pa.exists() {
                assert_eq!(
                    fs::read(&pa).unwrap(),
                    fs::read(dir.path().join("b").join(name)).unwrap()
                );
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    eprintln!("criterion 11 (determinism): PASS ({elapsed:.2}s)");
}
