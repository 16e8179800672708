use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command as Process;

use homogcur::cli::{cache_key, run, Command, ResultRow, RunConfig, RESULTS_HEADER};

const CELL: &str = r#"
density = { kind = "unit", m = 1, n = 2 }
h = "1/2"
r = 2
b = [[1]]
t = [[1.0, 0.0]]
sides = [4.0]
"#;

const TABLE: &str = r#"
density = { kind = "checker", a = 3.0, m = 1, n = 2 }
h = "1/2"
r = 2
b = [[1], [2]]
t = [[1.0, 0.0], [0.0, 1.0], [0.7071067811865476, 0.7071067811865476]]
sides = [4.0, 8.0, 16.0]
"#;

fn binary() -> Process {
    Process::new(env!("CARGO_BIN_EXE_homogcur"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn cell_run_writes_results_and_reuses_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CELL);
    let out = dir.path().join("out");
    let first = binary()
        .args(["cell", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(lines.next(), Some(RESULTS_HEADER));
    let row = ResultRow::from_csv(lines.next().unwrap()).unwrap();
    assert_eq!(row.value, 4.0);
    assert_eq!(row.b, vec![1]);
    assert!(out.join(format!("chains/{}.chain", row.hash)).exists());

    let second = binary()
        .args(["cell", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(second.status.success());
    assert!(String::from_utf8_lossy(&second.stderr).contains("cache hit"));
    assert_eq!(
        fs::read_to_string(out.join("results.csv")).unwrap(),
        results
    );
}

#[test]
fn malformed_config_exits_with_code_two_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for text in [
        "density = { kind = \"nope\" }\nh = \"1/2\"\n",
        &CELL.replace("h = \"1/2\"", "h = \"2/3\""),
        &format!("{CELL}colour = 3\n"),
    ] {
        let config = write_config(dir.path(), text);
        let status = binary()
            .args(["cell", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap()
            .status;
        assert_eq!(status.code(), Some(2), "{text}");
        assert!(!out.exists());
    }
}

fn parsed(text: &str, out: &Path, workers: usize) -> RunConfig {
    RunConfig::parse(
        Command::Table,
        text,
        Path::new("."),
        Some(workers),
        Some(out.to_path_buf()),
    )
    .unwrap()
}

#[test]
fn cache_key_ignores_workers_out_and_key_order() {
    let a = parsed(TABLE, Path::new("a"), 1);
    let b = parsed(TABLE, Path::new("b"), 8);
    assert_eq!(a.key(), b.key());
    let reordered = "r = 2\nh = \"1/2\"\n".to_string()
        + &TABLE.replace("h = \"1/2\"\n", "").replace("r = 2\n", "");
    assert_eq!(parsed(&reordered, Path::new("a"), 1).key(), a.key());
    // the same spacing written as a number
    assert_eq!(
        parsed(&TABLE.replace("\"1/2\"", "0.5"), Path::new("a"), 1).key(),
        a.key()
    );
    assert_ne!(
        parsed(&TABLE.replace("\"1/2\"", "\"1/4\""), Path::new("a"), 1).key(),
        a.key()
    );

    let mut m = BTreeMap::new();
    m.insert("x".to_string(), "1".to_string());
    assert_eq!(cache_key(&m), cache_key(&m.clone()));
    m.insert("y".to_string(), "2".to_string());
    assert_ne!(cache_key(&m), cache_key(&BTreeMap::new()));
}

#[test]
fn results_rows_round_trip() {
    let row = ResultRow {
        hash: "0123456789abcdef".into(),
        b: vec![1, -2],
        t: vec![0.6, 0.8],
        side: 16.0,
        value: 1.0 / 3.0,
        solver: "heuristic".into(),
    };
    assert_eq!(ResultRow::from_csv(&row.to_csv()).unwrap(), row);
    assert!(ResultRow::from_csv("a,b,c").is_err());
}

#[test]
fn worker_count_does_not_change_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in [1, 8] {
        let out = dir.path().join(format!("w{workers}"));
        let cfg = parsed(TABLE, &out, workers);
        run(&cfg).unwrap();
        outputs.push((
            fs::read(out.join("results.csv")).unwrap(),
            fs::read(out.join("table.txt")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}
