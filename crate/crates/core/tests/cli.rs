use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const GROVER: &str = r#"{"command": "grover", "scheme": {"n": 4, "m": 1, "tau": 1.0, "omega": 3.141592653589793, "gamma": 0.0}, "seed": 7}"#;

fn run(args: &[&str], dir: &Path, config: &str) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_metrosearch"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .env("METROSEARCH_THREADS", "2")
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn grover_example_exits_cleanly_and_reports_success() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["grover", "--out", out.to_str().unwrap()], dir.path(), GROVER);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["command"], "grover");
    assert_eq!(report["seed"], 7);
    assert_eq!(report["all_satisfied"], true);
    let names: Vec<_> = report["bounds"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["bound_name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"distance_lower_bound"), "{names:?}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"scheme": {"n": 3, "m": 4, "tau": 0.5, "omega": 1.0, "gamma": 0.2, "v_sequence": "identity"}, "probe": "haar"}"#;
    // Same output path both times: the report echoes it.
    let out = dir.path().join("out");
    let path = dir.path().join("config.json");
    fs::write(&path, cfg).unwrap();
    let mut runs = Vec::new();
    for threads in ["1", "4"] {
        if out.exists() {
            fs::remove_dir_all(&out).unwrap();
        }
        let o = Command::new(env!("CARGO_BIN_EXE_metrosearch"))
            .args([
                "audit",
                "--seed",
                "99",
                "--format",
                "both",
                "--out",
                out.to_str().unwrap(),
                "--config",
            ])
            .arg(&path)
            .env("METROSEARCH_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files: Vec<_> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_owned(), fs::read(&p).unwrap())
            })
            .collect();
        files.sort();
        runs.push(files);
    }
    assert!(runs[0].iter().any(|(n, _)| n == "report.json"));
    assert!(runs[0].len() > 1);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn missing_omega_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"scheme": {"n": 4, "m": 1, "tau": 1.0, "gamma": 0.0}}"#;
    let o = run(
        &["grover", "--out", dir.path().join("out").to_str().unwrap()],
        dir.path(),
        cfg,
    );
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("omega"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_values_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"scheme": {"n": 4, "m": 1, "tau": -1.0, "omega": 1.0, "gamma": 0.0}}"#;
    let o = run(&["grover"], dir.path(), cfg);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau"));
}

#[test]
fn command_mismatch_with_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["bounds", "--out", dir.path().join("out").to_str().unwrap()],
        dir.path(),
        GROVER,
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bounds_csv_has_header_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = r#"{"scheme": {"n": 8, "m": 2, "tau": 1.0, "omega": 3.141592653589793, "gamma": 1.0}, "n_values": [1, 2, 4, 8]}"#;
    let o = run(
        &["bounds", "--format", "csv", "--out", out.to_str().unwrap()],
        dir.path(),
        cfg,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("report.json").exists());
    let csvs: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    assert!(!csvs.is_empty());
    for csv in csvs {
        let text = fs::read_to_string(&csv).unwrap();
        let header: Vec<_> = text.lines().next().unwrap().split(',').collect();
        let schema = read_json(&csv.with_extension("schema.json"));
        let cols: Vec<_> = schema["columns"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["name"].as_str().unwrap())
            .collect();
        assert_eq!(header, cols, "{}", csv.display());
        for line in text.lines().skip(1) {
            assert_eq!(line.split(',').count(), header.len());
        }
    }
}
