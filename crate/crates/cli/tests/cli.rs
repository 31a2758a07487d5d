use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use g2cones::export::Table;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_g2cones"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn table_prints_all_rows() {
    let o = run(&["table"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 8);
    assert!(text.lines().nth(1).unwrap().split_whitespace().eq(["e1", "-1", "e3", "-e2", "e5", "-e4", "-e7", "e6"]));
}

#[test]
fn eigenspace_dimensions() {
    let o = run(&["eigenspaces"]);
    assert!(o.status.success());
    let dims: Vec<String> = stdout(&o)
        .lines()
        .filter(|l| l.starts_with("h_"))
        .map(|l| l.split("dim ").nth(1).unwrap().split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(dims, ["2", "3", "2", "2", "2", "3"]);
}

#[test]
fn type3_constants_and_period() {
    let o = run(&["toda", "type3", "--c1", "0.1", "--c2", "1", "--t-end", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for key in ["Gamma1", "Gamma2", "Gamma3", "B1", "B2", "B3", "period of y"] {
        assert!(text.contains(key), "missing {key}");
    }
    assert!(text.contains("period of y = 1.65767057205"), "{text}");
    assert!(text.contains("numeric period = 1.6576705720"), "{text}");
}

#[test]
fn verify_all_on_shipped_config() {
    let cfg = configs().join("type3.json");
    let o = run(&["verify", "--all", "--config", path_str(&cfg)]);
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("[PASS]").count(), 10, "{text}");
    assert!(text.contains("type III"));
}

#[test]
fn step_larger_than_t_end_is_a_config_error() {
    let o = run(&["toda", "solve", "--t-end", "0.1", "--step", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed.step"), "{}", stderr(&o));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"seed": {"a1": 0, "b1": 0, "v1": 0, "v2": 0, "v3": 0}, "tolerances": {"ac": "small"}}"#)
        .unwrap();
    let o = run(&["verify", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tolerances.ac"), "{}", stderr(&o));

    fs::write(&cfg, r#"{"seed": {"a1": 0, "b1": 0, "v1": 0, "v2": 0, "v3": 0}, "tolerances": {"ac": -1}}"#).unwrap();
    let o = run(&["verify", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tolerances.ac"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_reports_io_error() {
    let o = run(&["verify", "--config", "/nonexistent/config.json"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/config.json"), "{}", stderr(&o));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"seed": {"a1": 0.3, "b1": 0.1, "v1": 0, "v2": -0.5, "v3": -1, "t_end": 0.2, "step": 0.01}}"#)
        .unwrap();
    let out = dir.path().join("traj.csv");
    let o = run(&["toda", "solve", "--config", path_str(&cfg), "--b1", "-0.2", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = Table::read(&out).unwrap();
    assert_eq!(t.rows.len(), 21);
    assert_eq!(t.rows[0][1], 0.3);
    assert_eq!(t.rows[0][2], -0.2);
}

#[test]
fn trajectory_output_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (csv1, csv2, json) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("a.json"));
    let args = ["toda", "solve", "--a1", "0.2", "--b1", "-0.4", "--v1", "0", "--v2", "-0.5", "--v3", "-1"];
    for out in [&csv1, &csv2, &json] {
        let mut a = args.to_vec();
        a.extend(["--t-end", "1", "--step", "0.01", "--out", path_str(out)]);
        assert!(run(&a).status.success());
    }
    assert_eq!(fs::read(&csv1).unwrap(), fs::read(&csv2).unwrap());
    let text = fs::read_to_string(&csv1).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,a1,b1,v1,v2,v3,sum_v,spec1,spec2,spec3");
    assert_eq!(Table::read(&csv1).unwrap(), Table::read(&json).unwrap());
}

#[test]
fn classify_reads_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let s = [
        "--a1", "0", "--b1", "0", "--v1", "-7.1386227093209589e-2", "--v2", "-1.0799063194038132", "--v3",
        "-1.8444397270569681",
    ];
    let mut a = vec!["toda", "solve"];
    a.extend(s);
    a.extend(["--t-end", "1", "--step", "0.01", "--out", path_str(&out)]);
    assert!(run(&a).status.success());
    let o = run(&["classify", "--input", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("type III"));
}

#[test]
fn aks_frames_have_fifty_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("frames.csv");
    let o = run(&[
        "aks", "run", "--h0", "0.2,-0.4", "--hm1", "0.9,0.5,0.7", "--t-end", "0.1", "--step", "0.001", "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = Table::read(&out).unwrap();
    assert_eq!(t.columns.len(), 50);
    assert_eq!(t.rows.len(), 101);
    let first: Vec<f64> = t.rows[0][1..].to_vec();
    for (k, v) in first.iter().enumerate() {
        assert_eq!(*v, if k % 8 == 0 { 1.0 } else { 0.0 });
    }
    assert!(run(&["aks", "run", "--h0", "0.2"]).status.code() == Some(2));
}

#[test]
fn curve_build_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    let seed = configs().join("seed-type3.json");
    let o = run(&[
        "curve", "build", "--seed", path_str(&seed), "--s-samples", "40", "--t-samples", "40", "--residuals",
        "ac,cone", "--out", path_str(&grid),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = Table::read(&grid).unwrap();
    assert_eq!(t.columns.len(), 2 + 7 + 2);
    assert_eq!(t.rows.len(), 1600);

    let o = run(&["curve", "verify", "--grid", path_str(&grid), "--checks", "ac,cone,sl,quadric"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("[PASS]").count(), 4);

    // A displaced point breaks the almost complex structure nearby.
    let mut bad = t.clone();
    bad.rows[20 * 40 + 20][2] += 1e-2;
    let broken = dir.path().join("broken.csv");
    bad.write(&broken).unwrap();
    let o = run(&["curve", "verify", "--grid", path_str(&broken), "--checks", "ac"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn seed_spectrum_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let seed = dir.path().join("seed.json");
    fs::write(&seed, r#"{"a1": 0.2, "b1": -0.4, "v1": 0, "v2": -0.5, "v3": -1, "lambda_spec": [1, 2]}"#).unwrap();
    let o = run(&["curve", "build", "--seed", path_str(&seed)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("lambda_spec"), "{}", stderr(&o));
}
