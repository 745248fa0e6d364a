use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MINIMAL: &str = r#"name = "minimal"
seeds = { count = 1 }
timing = false
target = { kind = "banana" }

[[algorithms]]
name = "is-u"
kind = "standard-is"
params = { budget = 100, proposal = { kind = "uniform", lower = [-10.0, -10.0], upper = [10.0, 10.0] } }
"#;

fn radis(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radis")).args(args).current_dir(cwd).output().expect("spawn radis")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn minimal_run_writes_one_record_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("minimal.toml"), MINIMAL).unwrap();
    let o = radis(&["run", "minimal.toml", "--out", "res", "--jobs", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let res = dir.path().join("res");
    let runs: Vec<_> = fs::read_dir(res.join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    let records: Vec<_> = fs::read_dir(&runs[0]).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(records.len(), 1);
    let rec: serde_json::Value = serde_json::from_str(&fs::read_to_string(&records[0]).unwrap()).unwrap();
    assert_eq!(rec["evaluations"], 100);
    let metrics = fs::read_to_string(res.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2, "{metrics}");
    assert!(!res.join("failures.csv").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("1 runs over 1 cells, 0 failed"));
}

#[test]
fn default_output_directory_uses_config_name() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.toml"), MINIMAL).unwrap();
    let o = radis(&["run", "m.toml", "--seeds", "2..4"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let runs = dir.path().join("out/minimal/runs");
    let cell = fs::read_dir(&runs).unwrap().next().unwrap().unwrap().path();
    let mut names: Vec<String> = fs::read_dir(cell).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(names, ["seed_2.json", "seed_3.json"]);
}

#[test]
fn invalid_value_reports_line_and_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), MINIMAL.replace("budget = 100", "budget = 0")).unwrap();
    let o = radis(&["run", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 6") && err.contains("is-u"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn syntax_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), MINIMAL.replace("kind = \"standard-is\"", "kind = standard-is")).unwrap();
    let o = radis(&["run", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 8"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.toml"), MINIMAL).unwrap();
    assert_eq!(radis(&["run", "m.toml", "--jobs", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(radis(&["run", "m.toml", "--seeds", "5..1"], dir.path()).status.code(), Some(2));
    assert_eq!(radis(&["oracle", "nope"], dir.path()).status.code(), Some(2));
    assert_eq!(radis(&["run", "missing.toml"], dir.path()).status.code(), Some(1));
}

#[test]
fn oracle_prints_banana_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = radis(&["oracle", "banana", "--grid", "800"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let z = v["z"].as_f64().unwrap();
    assert!((z / 7.9976 - 1.0).abs() < 1e-3, "{z}");
}

fn read_emulator_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn emulate_single_node_is_constant_and_l2_matches() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("nodes.csv"), "x_1,x_2,log_pi\n0.5,-1.0,-2.0\n").unwrap();
    fs::write(
        dir.path().join("em.toml"),
        r#"nodes = "nodes.csv"
emulator = { kind = "nn", k = 1 }
grid = { lower = [-10.0, -10.0], upper = [10.0, 10.0], counts = [40, 30] }
target = { kind = "banana" }
output = "grid.csv"
"#,
    )
    .unwrap();
    let o = radis(&["emulate", "em.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_emulator_csv(&dir.path().join("grid.csv"));
    assert_eq!(header, ["x_1", "x_2", "emulator", "pi"]);
    assert_eq!(rows.len(), 1200);
    let level = (-2.0f64).exp();
    assert!(rows.iter().all(|r| (r[2] - level).abs() < 1e-15));

    // rectangle rule over the written cell centres
    let cell = (20.0 / 40.0) * (20.0 / 30.0);
    let l2 = (rows.iter().map(|r| (r[2] - r[3]).powi(2)).sum::<f64>() * cell).sqrt();
    let stdout = String::from_utf8_lossy(&o.stdout);
    let printed: f64 = stdout.lines().find_map(|l| l.strip_prefix("grid L2 distance to target: ")).unwrap().parse().unwrap();
    assert!((printed / l2 - 1.0).abs() < 1e-5, "{printed} vs {l2}");
}

#[test]
fn emulate_empty_grid_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("nodes.csv"), "x_1,log_pi\n0.0,0.0\n").unwrap();
    fs::write(
        dir.path().join("em.toml"),
        "nodes = \"nodes.csv\"\nemulator = { kind = \"nn\", k = 1 }\ngrid = { lower = [], upper = [], counts = [] }\n",
    )
    .unwrap();
    let o = radis(&["emulate", "em.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no axes"), "{}", stderr(&o));
}
