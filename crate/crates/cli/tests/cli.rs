use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dissem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dissem"))
        .args(args)
        .env_remove("DISSEM_LOG")
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &Path, text: &str) -> String {
    let path = dir.join("s.scn");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_prints_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "protocol = cbddp\nnodes = 20\nseeds = 1..3\nduration_s = 30\n");
    let out = dissem(&["simulate", "--scenario", &path]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("protocol,nodes,seed,"));
}

#[test]
fn simulate_trace_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "protocol = dddp\nnodes = 40\nduration_s = 20\n");
    let traces: Vec<Vec<u8>> = ["a.trace", "b.trace"]
        .iter()
        .map(|name| {
            let t = dir.path().join(name);
            let out = dissem(&["simulate", "--scenario", &path, "--seed", "4", "--trace", t.to_str().unwrap()]);
            assert!(out.status.success());
            fs::read(t).unwrap()
        })
        .collect();
    assert!(!traces[0].is_empty());
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn trace_needs_a_single_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "protocol = fdddp\nnodes = 20\nseeds = 1,2\n");
    let t = dir.path().join("t");
    let out = dissem(&["simulate", "--scenario", &path, "--trace", t.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn bad_scenario_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "protocol = fdddp\nnodes = 20\nbogus = 1\n");
    let out = dissem(&["simulate", "--scenario", &path]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn sweep_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = dissem(&["sweep", "--rows", "20", "--protocols", "cbddp,dddp", "--seeds", "2", "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let report = dir.path().join("report.txt");
    let out = dissem(&["report", "--in", d, "--out", report.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(report).unwrap();
    assert!(text.contains("== 20 nodes (2 seeds) =="));
    assert!(text.contains("smaller than dddp"));
}

#[test]
fn sweep_rejects_unknown_row_and_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(!dissem(&["sweep", "--rows", "33", "--seeds", "1", "--out", d]).status.success());
    assert!(!dissem(&["sweep", "--rows", "20", "--protocols", "spin", "--seeds", "1", "--out", d]).status.success());
}

#[test]
fn report_on_missing_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dissem(&["report", "--in", dir.path().to_str().unwrap(), "--out", "/dev/null"]);
    assert!(!out.status.success());
}

#[test]
fn dump_topology_is_deterministic() {
    let a = dissem(&["dump-topology", "--nodes", "40", "--seed", "3"]);
    let b = dissem(&["dump-topology", "--nodes", "40", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, dissem(&["dump-topology", "--nodes", "40", "--seed", "4"]).stdout);
}
