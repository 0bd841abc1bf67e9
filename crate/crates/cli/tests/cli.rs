use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_imex-tvd"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(out.status.success(), "{:?} failed: {}", args, String::from_utf8_lossy(&out.stderr));
    out
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn certify_builtin_scheme() {
    let out = run(&["certify", "--scheme", "tvd3_4"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("feasible=true"));
    let lam: f64 = text.lines().find_map(|l| l.strip_prefix("lambda=")).unwrap().parse().unwrap();
    assert!((lam - 0.5470699381048939).abs() < 1e-12);
}

#[test]
fn certify_roundtrips_a_tableau_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    run(&["certify", "--scheme", "tvd3", "--write-tableau", path.to_str().unwrap()]);
    let text = String::from_utf8(run(&["certify", "--tableau", path.to_str().unwrap()]).stdout).unwrap();
    let lam: f64 = text.lines().find_map(|l| l.strip_prefix("lambda=")).unwrap().parse().unwrap();
    assert!((lam - 32.0 / 37.0).abs() < 1e-10, "{text}");
}

#[test]
fn certify_reports_infeasible_lambda() {
    let out = bin().args(["certify", "--scheme", "tvd3_4", "--lambda", "0.6"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn error_lines_schema() {
    let dir = tempfile::tempdir().unwrap();
    run(&["preset", "error-lines", "--schemes", "imex1,mood3_4", "--out", dir.path().to_str().unwrap()]);
    let csv = read(dir.path(), "error_lines.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,scheme,L1,L1o"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10);
    for r in &rows {
        let l1: f64 = r[2].parse().unwrap();
        let l1o: f64 = r[3].parse().unwrap();
        assert!(l1o >= l1 && l1 > 0.0);
    }
    assert!(dir.path().join("eoc_mood3_4.csv").exists());
    assert!(!csv.contains('\r'));
}

#[test]
fn vortex_schema() {
    let dir = tempfile::tempdir().unwrap();
    run(&["preset", "vortex", "--N", "8", "--schemes", "imex1", "--out", dir.path().to_str().unwrap()]);
    let csv = read(dir.path(), "vortex_eoc.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,scheme,L2_rho,EOC_rho,L2_mom,EOC_mom,activations"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        run(&["advect", "--scheme", "mood3_4", "--dx", "0.05", "--out", d.path().to_str().unwrap()]);
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "timing.json")
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n == "solution.csv"));
    for n in &names {
        assert_eq!(std::fs::read(a.path().join(n)).unwrap(), std::fs::read(b.path().join(n)).unwrap(), "{n}");
    }
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    std::fs::write(&cfg, format!("scheme = \"tvd3_4\"\ndx = 0.1\neps = 1.0\nout = {:?}\n", out.to_str().unwrap())).unwrap();
    run(&["advect", "--config", cfg.to_str().unwrap()]);
    assert!(read(&out, "summary.json").contains("tvd3_4"));
}

#[test]
fn unknown_preset_fails() {
    let out = bin().args(["preset", "nope"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "schem = \"tvd3\"\n").unwrap();
    let out = bin().args(["advect", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
}
