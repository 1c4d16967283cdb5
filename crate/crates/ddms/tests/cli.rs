use std::path::Path;
use std::process::{Command, Output};

fn ddms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddms")).args(args).env_remove("DDMS_SEED").output().expect("spawn ddms")
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let out = dir.join(name);
    let mut all = args.to_vec();
    let p = out.to_str().unwrap();
    all.extend(["--output", p]);
    let o = ddms(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read(out).unwrap()
}

#[test]
fn single_rank_ddms_is_byte_identical_to_dms() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["run", "--dims", "6,5,4", "--field", "random:3"];
    let dms = run_to(dir.path(), "a.csv", &[&base[..], &["--engine", "dms"]].concat());
    let ddms1 = run_to(dir.path(), "b.csv", &[&base[..], &["--engine", "ddms", "--ranks", "1"]].concat());
    assert_eq!(dms, ddms1);
    let ddms4 = run_to(dir.path(), "c.csv", &[&base[..], &["--engine", "ddms", "--ranks", "4", "--mode", "eager"]].concat());
    assert_eq!(dms, ddms4);
}

#[test]
fn elevation_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_to(dir.path(), "e.csv", &["run", "--dims", "8,8,8", "--field", "elevation", "--engine", "ddms", "--ranks", "8"]);
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines[0].starts_with("dim,birth_order"));
    assert!(lines[1].starts_with("0,0,"));
    assert!(lines[1].ends_with(",0"));
}

#[test]
fn diff_reports_match() {
    let o = ddms(&["diff", "dms", "ddms", "oracle", "--dims", "9,9,5", "--field", "random:11", "--ranks", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("MATCH"));
}

#[test]
fn file_input_round_trips_and_writes_stats() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("f.raw");
    let raw = raw.to_str().unwrap();
    let o = ddms(&["generate", "--dims", "7,6,5", "--field", "wavelet", "--dtype", "f64", "--output", raw]);
    assert!(o.status.success());
    let stats = dir.path().join("s.json");
    let from_file = run_to(
        dir.path(),
        "a.json",
        &["run", "--dims", "7,6,5", "--input", raw, "--dtype", "f64", "--engine", "ddms", "--splits", "2,1,1", "--format", "json", "--stats", stats.to_str().unwrap()],
    );
    let generated = run_to(dir.path(), "b.json", &["run", "--dims", "7,6,5", "--field", "wavelet", "--format", "json"]);
    assert_eq!(from_file, generated);
    let s: serde_json::Value = serde_json::from_slice(&std::fs::read(stats).unwrap()).unwrap();
    assert_eq!(s["ranks"], 2);
    assert_eq!(s["peak_simplex_state"].as_array().unwrap().len(), 2);
}

#[test]
fn errors_exit_with_one() {
    let o = ddms(&["run", "--dims", "4,4,4"]);
    assert_eq!(o.status.code(), Some(1));
    let o = ddms(&["run", "--dims", "4,4,4", "--field", "elevation", "--engine", "ddms", "--ranks", "3", "--splits", "2,1,1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = ddms(&["run", "--dims", "4,4,4", "--input", "/nonexistent/x.raw"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_comes_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_ddms"))
        .args(["diff", "dms", "ddms", "--dims", "6,5,4", "--field", "random:2", "--splits", "2,2,1"])
        .env("DDMS_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = ddms(&["run", "--dims", "4,4,4", "--field", "elevation", "--seed", "x"]);
    assert_eq!(o.status.code(), Some(2), "clap usage errors exit with 2");
}
