use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"{
  "name": "small",
  "seed": 77,
  "error_model": {"model": "fixed_coherent", "theta2_deg": 8, "theta1_deg": 1},
  "protocols": [{"group": "clifford", "shots": 200}],
  "bootstrap": {"resamples": 60}
}"#;

fn irbench(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irbench"))
        .args(args)
        .current_dir(dir)
        .env_remove("IRBENCH_OUT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn without_timestamp(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["provenance"].as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.json", SMALL.replace("\"seed\": 77,", "\"seed\": 77, \"colour\": 1,"), "colour"),
        ("noseed.json", SMALL.replace("\"seed\": 77,", ""), "seed"),
        (
            "depths.json",
            SMALL.replace("\"shots\": 200", "\"shots\": 200, \"reference_depths\": []"),
            "reference_depths",
        ),
    ];
    for (name, text, needle) in cases {
        let cfg = write(dir.path(), name, &text);
        let out = irbench(&["run", &cfg], dir.path());
        assert_eq!(out.status.code(), Some(2), "{name}: {}", stderr(&out));
        assert!(stderr(&out).contains(needle), "{name}: {}", stderr(&out));
    }
    let out = irbench(&["presets", "no_such_preset"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_match_and_ingest_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    for sub in ["a", "b"] {
        let out = irbench(&["run", &cfg, "--out", sub], dir.path());
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(without_timestamp(&a.join("report.json")), without_timestamp(&b.join("report.json")));
    for f in ["decay_clifford_reference.csv", "decay_clifford_interleaved.csv", "shots_clifford_reference.csv", "estimates.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    // The decay tables alone, with the run's seed, give the same estimate.
    let report = without_timestamp(&a.join("report.json"));
    let est = &report["estimates"][0];
    let out = irbench(
        &[
            "ingest",
            a.join("decay_clifford_reference.csv").to_str().unwrap(),
            a.join("decay_clifford_interleaved.csv").to_str().unwrap(),
            "--resamples",
            "60",
            "--seed",
            "77",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let ing: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(ing["protocol"], "clifford");
    assert_eq!(ing["epsilon"], est["epsilon"]);
    assert_eq!(ing["stat_ci"], est["stat_ci"]);
    assert_eq!(ing["sys_bounds"], est["sys_bounds"]);
}

#[test]
fn malformed_row_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let good = "depth,label,mean,stderr,n\n4,00,0.9,0.01,100\n8,00,0.8,0.01,100\n12,00,0.7,0.01,100\n";
    let bad = "depth,label,mean,stderr,n\n4,00,0.9,0.01,100\n8,00,oops,0.01,100\n";
    let r = write(dir.path(), "r.csv", good);
    let i = write(dir.path(), "i.csv", bad);
    let out = irbench(&["ingest", &r, &i], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
    assert!(stderr(&out).contains("i.csv"), "{}", stderr(&out));
}

#[test]
fn slower_interleaved_decay_is_flagged_not_clamped() {
    let dir = tempfile::tempdir().unwrap();
    let table = |p: f64| {
        let mut s = String::from("depth,label,mean,stderr,n\n");
        for m in [4, 6, 8, 12, 14] {
            s += &format!("{m},00,{},0.004,150\n", 0.25 + 0.75 * f64::powi(p, m));
        }
        s
    };
    let r = write(dir.path(), "r.csv", &table(0.96));
    let i = write(dir.path(), "i.csv", &table(0.975));
    let out = irbench(&["ingest", &r, &i, "--resamples", "0"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let est: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(est["epsilon"].as_f64().unwrap() < 0.0);
    let flags: Vec<&str> = est["flags"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(flags.contains(&"unphysical_negative"), "{flags:?}");
}

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let out = irbench(&["presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "fig4_coherent_z"));
    let out = irbench(&["presets", "fig4_coherent_z"], dir.path());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"], 20240601);
}
