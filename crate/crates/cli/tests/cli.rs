use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const MINIMAL: &str = r#"{
  "target": "v1quantum",
  "header_types": [],
  "headers": [],
  "parsers": [],
  "deparsers": [],
  "actions": [],
  "pipelines": [
    {"name": "ingress", "init_table": null, "tables": [], "conditionals": []},
    {"name": "egress", "init_table": null, "tables": [], "conditionals": []},
    {"name": "qcontrol", "init_table": null, "tables": [], "conditionals": []}
  ]
}"#;

const SMALL: &str = r#"{
  "topology": {"kind": "hub_and_spoke", "end_nodes": 4, "km": 5.0, "units": 1},
  "demand": {"rate": 40.0, "duration_s": 0.2, "window_s": [0.1, 0.2], "repetitions": 2},
  "seed": 3,
  "drain": true,
  "sweep": {"units": [1, 2], "rates": [40.0]}
}"#;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Runs `v1q` with `dir` as working directory.
fn v1q(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_v1q"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn with_config(text: &str) -> TempDir {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("cfg.json"), text).unwrap();
    d
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn validate_shipped_programs() {
    let r = root();
    let o = v1q(
        &r,
        &[
            "validate",
            "programs/endnode.json",
            "programs/router.json",
            "programs/hub.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn validate_reports_loader_errors() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("cut.json"), &MINIMAL[..MINIMAL.len() / 2]).unwrap();
    let o = v1q(d.path(), &["validate", "cut.json"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("malformed document"), "{}", stderr(&o));

    let mut doc: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
    doc["counter_arrays"] = serde_json::json!([{"name": "c", "size": 4}]);
    fs::write(d.path().join("ctr.json"), doc.to_string()).unwrap();
    fs::write(d.path().join("ok.json"), MINIMAL).unwrap();
    let o = v1q(d.path(), &["validate", "ok.json", "ctr.json"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("counter_arrays"), "{}", stderr(&o));
    assert!(stdout(&o).contains("ok.json: ok"));

    let o = v1q(d.path(), &["validate", "missing.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn run_writes_only_under_out_and_is_reproducible() {
    let d = with_config(SMALL);
    let o = v1q(d.path(), &["run", "--config", "cfg.json", "--out", "a"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("seed 3: "));
    assert_eq!(listing(d.path()), ["a", "cfg.json"]);
    assert!(d.path().join("a/requests.csv").exists());

    let o = v1q(d.path(), &["run", "--config", "cfg.json", "--out", "b"]);
    assert_eq!(code(&o), 0);
    for f in listing(&d.path().join("a")) {
        let a = fs::read(d.path().join("a").join(&f)).unwrap();
        let b = fs::read(d.path().join("b").join(&f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }

    let o = v1q(
        d.path(),
        &["run", "--config", "cfg.json", "--out", "c", "--seed", "4"],
    );
    assert!(stdout(&o).starts_with("seed 4: "));
}

#[test]
fn run_config_errors_exit_2() {
    let no_seed = SMALL.replace("\"seed\": 3,", "");
    let d = with_config(&no_seed);
    let o = v1q(d.path(), &["run", "--config", "cfg.json", "--out", "o"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
    let o = v1q(
        d.path(),
        &["run", "--config", "cfg.json", "--out", "o", "--seed", "1"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let bad = SMALL.replace("\"rate\": 40.0", "\"rate\": \"fast\"");
    let d = with_config(&bad);
    let o = v1q(d.path(), &["run", "--config", "cfg.json", "--out", "o"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("demand.rate"), "{}", stderr(&o));
    assert!(!d.path().join("o").exists());

    let o = v1q(d.path(), &["run", "--config", "nope.json", "--out", "o"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_is_worker_independent_and_resumes() {
    let d = with_config(SMALL);
    let o = v1q(
        d.path(),
        &[
            "sweep",
            "--config",
            "cfg.json",
            "--out",
            "w1",
            "--workers",
            "1",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("4 ran, 0 resumed"), "{}", stdout(&o));
    let o = v1q(
        d.path(),
        &[
            "sweep",
            "--config",
            "cfg.json",
            "--out",
            "w3",
            "--workers",
            "3",
        ],
    );
    assert_eq!(code(&o), 0);
    let summary = |dir: &str| fs::read(d.path().join(dir).join("summary.csv")).unwrap();
    assert_eq!(summary("w1"), summary("w3"));

    let o = v1q(d.path(), &["sweep", "--config", "cfg.json", "--out", "w1"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("0 ran, 4 resumed"), "{}", stdout(&o));
    assert_eq!(listing(d.path()), ["cfg.json", "w1", "w3"]);
}

#[test]
fn replay_detects_tampering() {
    let d = with_config(SMALL);
    assert_eq!(
        code(&v1q(
            d.path(),
            &["run", "--config", "cfg.json", "--out", "r"]
        )),
        0
    );
    let o = v1q(d.path(), &["replay", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("csv identical"));

    let csv = d.path().join("r/requests.csv");
    let mut text = fs::read_to_string(&csv).unwrap();
    text.push_str("999,1,2,0,,\n");
    fs::write(&csv, text).unwrap();
    let o = v1q(d.path(), &["replay", "--out", "r"]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("csv differs"));
}

#[test]
fn table_accepts_hex_and_decimal() {
    let d = with_config(SMALL);
    let args = |extra: &[&'static str]| {
        let mut a = vec!["table", "--config", "cfg.json", "--node", "0"];
        a.extend_from_slice(extra);
        a
    };
    let o = v1q(d.path(), &args(&[]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let listed = stdout(&o);
    let first = listed.lines().next().unwrap();
    let table = first.split(':').next().unwrap().to_string();
    let action = listed
        .lines()
        .find_map(|l| l.split(" -> ").nth(1))
        .map(|s| s.split('[').next().unwrap().to_string())
        .expect("hub tables carry routes");

    let a = args(&[]);
    let mut ins: Vec<&str> = a.clone();
    ins.extend([
        "--table", &table, "--key", "0x1f", "--action", &action, "--param", "2",
    ]);
    let o = v1q(d.path(), &ins);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(
        stdout(&o).contains(&format!("[31] -> {action}[2]")),
        "{}",
        stdout(&o)
    );

    let mut del: Vec<&str> = a.clone();
    del.extend(["--table", &table, "--key", "31", "--delete"]);
    assert_eq!(code(&v1q(d.path(), &del)), 3, "no entry in a fresh device");

    let mut bad: Vec<&str> = a.clone();
    bad.extend(["--table", &table, "--key", "0xzz", "--delete"]);
    assert_eq!(code(&v1q(d.path(), &bad)), 2);

    let o = v1q(d.path(), &["table", "--config", "cfg.json", "--node", "99"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no device 99"));
    assert_eq!(listing(d.path()), ["cfg.json"]);
}

#[test]
fn trace_prints_the_event_log() {
    let d = with_config(SMALL);
    let o = v1q(d.path(), &["trace", "--config", "cfg.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().count() > 100);
    assert!(out.lines().next().unwrap().contains("inject"));
    assert!(stderr(&o).starts_with("trace "));
    assert_eq!(listing(d.path()), ["cfg.json"]);
}
