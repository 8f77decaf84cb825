use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = "\
run::name = small
checkpoint::mode = fixed
checkpoint::every = 20
checkpoint::dir = chk
cactus::print_timing_info = full
report::period = 50
report::sinks = logfile
report::logfile = small.log
workload::total_iterations = 200
workload::regrid_every = 70
workload::compute_unit_s = 0.5
workload::checkpoint_base_s = 3
";

fn timekeep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timekeep"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn run_small(dir: &TempDir, out: &str) -> Output {
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let out = dir.path().join(out);
    timekeep(&["--out-dir", out.to_str().unwrap(), "run", &cfg])
}

#[test]
fn run_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let o = run_small(&dir, "a");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("a");
    for f in [
        "small.series.csv",
        "small.summary.json",
        "small.report.txt",
        "small.timers.json",
        "small.log",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let series = fs::read_to_string(out.join("small.series.csv")).unwrap();
    assert_eq!(series.lines().count(), 1 + 201);
    assert!(series.lines().nth(21).unwrap().starts_with("20,"));
    assert!(series.lines().nth(21).unwrap().ends_with(",checkpoint"));
    let report = fs::read_to_string(out.join("small.report.txt")).unwrap();
    assert!(report.contains("Total time for CCTK_CHECKPOINT"));
    assert!(out.join("chk/checkpoint.it_20.chk").is_file());
    assert!(o.stderr.is_empty(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn runs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    assert!(run_small(&dir, "a").status.success());
    assert!(run_small(&dir, "b").status.success());
    for f in [
        "small.series.csv",
        "small.summary.json",
        "small.report.txt",
        "small.timers.json",
        "small.log",
    ] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
}

#[test]
fn restart_from_written_checkpoint() {
    let dir = TempDir::new().unwrap();
    assert!(run_small(&dir, "full").status.success());
    let full = fs::read_to_string(dir.path().join("full/small.series.csv")).unwrap();
    let chk = dir.path().join("full/chk/checkpoint.it_140.chk");
    let cfg = dir.path().join("small.cfg");
    let out = dir.path().join("resumed");
    let o = timekeep(&[
        "--out-dir",
        out.to_str().unwrap(),
        "restart",
        chk.to_str().unwrap(),
        cfg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let resumed = fs::read_to_string(out.join("small.series.csv")).unwrap();
    let tail: Vec<&str> = full.lines().skip(1 + 140).collect();
    let got: Vec<&str> = resumed.lines().skip(1).collect();
    assert_eq!(got, tail);
    let summary = fs::read_to_string(out.join("small.summary.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["restarted_from_iteration"], 140);
}

#[test]
fn compare_and_report() {
    let dir = TempDir::new().unwrap();
    assert!(run_small(&dir, "a").status.success());
    let adaptive = SMALL
        .replace("run::name = small", "run::name = gated")
        .replace("checkpoint::mode = fixed", "checkpoint::mode = adaptive")
        .replace(
            "checkpoint::every = 20\n",
            "adaptcheck::max_checkpoint_fraction = 0.05\n",
        );
    let cfg = write_config(dir.path(), "gated.cfg", &adaptive);
    let out = dir.path().join("a");
    let out = out.to_str().unwrap();
    assert!(timekeep(&["--out-dir", out, "run", &cfg]).status.success());

    let base = format!("{out}/small.summary.json");
    let cand = format!("{out}/gated.summary.json");
    let o = timekeep(&["--out-dir", out, "compare", &base, &cand]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("runtime reduction"), "{text}");
    assert!(Path::new(out).join("small_vs_gated.fractions.csv").is_file());

    let o = timekeep(&["report", &format!("{out}/small.timers.json")]);
    assert!(o.status.success());
    let rendered = String::from_utf8(o.stdout).unwrap();
    assert_eq!(rendered, fs::read_to_string(format!("{out}/small.report.txt")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.cfg");
    assert_eq!(timekeep(&["run", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(timekeep(&["frobnicate"]).status.code(), Some(2));
    let bad = write_config(dir.path(), "bad.cfg", "checkpoint::mode = sometimes\n");
    let o = timekeep(&["--out-dir", dir.path().to_str().unwrap(), "run", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let unknown = write_config(dir.path(), "unknown.cfg", "checkpoint::bogus = 1\n");
    assert_eq!(timekeep(&["run", &unknown]).status.code(), Some(2));
    let junk = dir.path().join("junk.chk");
    fs::write(&junk, b"not a checkpoint").unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let o = timekeep(&[
        "--out-dir",
        dir.path().to_str().unwrap(),
        "restart",
        junk.to_str().unwrap(),
        &cfg,
    ]);
    assert_eq!(o.status.code(), Some(2));
}
