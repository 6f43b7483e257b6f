use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_noiserise");

fn noiserise(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN).args(args).current_dir(cwd).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SEVEN_CELLS: &str = r#"
[deployment]
layout = "hex_rings"
rings = 1

[scheme]
name = "nr"

[run]
frames = 20
seed = 7
"#;

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn seven_cell_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SEVEN_CELLS);
    let start = Instant::now();
    let o = noiserise(&["run", "--config", "c.toml", "--out", "out"], dir.path());
    assert!(start.elapsed() < Duration::from_secs(10));
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let headers = [
        ("frames.csv", "frame,cell,throughput_bits,ingress_w,ingress_db,egress_w"),
        ("powers.csv", "frame,ms,power_w"),
        ("per_ms.csv", "ms,cell,total_bits,mean_rate_bps"),
    ];
    for (name, header) in headers {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        assert_eq!(text.lines().next().unwrap(), header);
        assert!(text.lines().count() > 1, "{name} has no rows");
    }
    let frames = std::fs::read_to_string(out.join("frames.csv")).unwrap();
    assert_eq!(frames.lines().count(), 1 + 20 * 7);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scheme"]["name"], "nr");
    assert_eq!(summary["num_cells"], 7);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    for key in ["mean_throughput", "ingress_std_db", "edge_5pct", "runtime_s"] {
        assert!(summary[key].is_number(), "{key}");
    }
}

#[test]
fn rerun_gives_byte_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SEVEN_CELLS);
    for out in ["a", "b"] {
        let o = noiserise(&["run", "--config", "c.toml", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["frames.csv", "powers.csv", "per_ms.csv"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn csv_floats_carry_twelve_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SEVEN_CELLS);
    let o = noiserise(&["run", "--config", "c.toml", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("out/powers.csv")).unwrap();
    let field = text.lines().nth(1).unwrap().split(',').nth(2).unwrap();
    let mantissa = field.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 12, "{field}");
}

#[test]
fn unknown_scheme_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SEVEN_CELLS);
    let o = noiserise(&["run", "--config", "c.toml", "--set", "scheme.name=bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scheme.name"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", &format!("{SEVEN_CELLS}\n[channel]\nbandwith_hz = 5e6\n"));
    let o = noiserise(&["run", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bandwith_hz"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = noiserise(&["run", "--config", "absent.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_writes_one_row_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SEVEN_CELLS);
    let o = noiserise(
        &["sweep", "--config", "c.toml", "--nr-db", "2,5,7,10", "--schemes", "nr,nr_density,fixed", "--out", "s"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..5], &["scheme", "nr_db", "mean_throughput", "ingress_std", "edge_5pct"]);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    let throughput = |scheme: &str, db: f64| -> f64 {
        let r = rows
            .iter()
            .find(|r| r[0] == scheme && r[1].parse::<f64>().unwrap() == db)
            .unwrap();
        assert_eq!(*r.last().unwrap(), "ok");
        r[2].parse().unwrap()
    };
    for db in [2.0, 5.0, 7.0, 10.0] {
        assert!(throughput("nr", db) > throughput("fixed", db), "{db} dB");
    }
}

#[test]
fn empty_sweep_list_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SEVEN_CELLS);
    let o = noiserise(&["sweep", "--config", "c.toml", "--nr-db"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = noiserise(&["sweep", "--config", "c.toml", "--nr-db", "5", "--schemes", ""], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

fn solve(dir: &Path, instance: &str) -> Output {
    write(dir, "i.json", instance);
    noiserise(&["solve", "i.json", "--trace"], dir)
}

#[test]
fn solve_reproduces_the_two_user_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve(
        dir.path(),
        r#"{"budget": 4, "users": [
            {"weight": 1.1, "norm_sinr": 16.25, "norm_interference": 4},
            {"weight": 9.4, "norm_sinr": 0.1, "norm_interference": 1}]}"#,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let x: Vec<f64> = serde_json::from_value(v["x"].clone()).unwrap();
    let p: Vec<f64> = serde_json::from_value(v["p"].clone()).unwrap();
    assert!((x[0] - 0.667419).abs() <= 1e-4);
    assert!((x[1] - 0.332581).abs() <= 1e-4);
    assert!((p[0] - 0.315038).abs() <= 1e-4);
    assert_eq!(v["certification"], "certified");
    assert!(v["kkt_residual"].as_f64().unwrap() <= 1e-6);
    assert!(!v["trace"].as_array().unwrap().is_empty());
}

#[test]
fn solve_single_user_takes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve(dir.path(), r#"{"budget": 3, "users": [{"w": 2, "e": 5, "l": 1.5}]}"#);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["x"][0].as_f64().unwrap(), 1.0);
    assert!((v["p"][0].as_f64().unwrap() - 2.0).abs() <= 1e-12);
}

#[test]
fn solve_without_a_transmitter_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve(dir.path(), r#"{"budget": 3, "users": [{"w": 2, "e": 0, "l": 1}, {"w": 1, "e": 0, "l": 2}]}"#);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no feasible transmitter"));
}

#[test]
fn malformed_instances_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        "{",
        r#"{"budget": 3}"#,
        r#"{"budget": -1, "users": [{"w": 1, "e": 1, "l": 1}]}"#,
        r#"{"budget": 3, "users": [{"w": 1, "e": 1, "l": 0}]}"#,
        r#"{"budget": 3, "users": [{"w": 1, "e": 1, "l": 1, "colour": 2}]}"#,
    ] {
        let o = solve(dir.path(), bad);
        assert_eq!(o.status.code(), Some(1), "{bad}: {}", stderr(&o));
    }
}
