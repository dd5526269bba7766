use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_darcy-afem"))
}

#[test]
fn one_uniform_level_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--n", "4", "--mode", "uniform", "--max-levels", "1", "--threads", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("levels.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("level,vertices,triangles,dof,eta_L,eta_D"));
    assert!(lines[1].starts_with("0,25,32,"));
    assert!(dir.path().join("trace.csv").exists());
}

#[test]
fn bad_arguments_exit_with_code_2() {
    let status = bin().args(["run", "--case", "nonsense"]).output().unwrap().status;
    assert_eq!(status.code(), Some(2));
    let status = bin().args(["run", "--theta", "1.5"]).output().unwrap().status;
    assert_eq!(status.code(), Some(2));
    let status = bin().args(["run", "--cavity-top-expr", "x"]).output().unwrap().status;
    assert_eq!(status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\nn = 3\nmode = uniform\nmax-levels = 5\n").unwrap();
    let out = bin()
        .args(["run", "--threads", "1", "--max-levels", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("o/levels.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0,16,18,"));
}
