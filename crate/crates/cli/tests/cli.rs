use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magneto-spectra")).args(args).current_dir(dir).output().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let text = format!(
        "seed = 3\n[field]\nexpr = \"2 - x\"\n[sweep]\nb = [20, 40, 80, 160, 320]\n[strip]\nns = 64\nnt = 32\n[output]\ndir = \"{}\"\n{extra}",
        dir.join("out").display()
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["selftest"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("1 - 4I2"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bogus = 1\n");
    assert_eq!(run(&["--config", &cfg, "predict"], dir.path()).status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[field]\nexpr = \"2 - \"\n[sweep]\nb = [1, 2, 4, 8, 16]\n").unwrap();
    assert_eq!(run(&["--config", bad.to_str().unwrap(), "predict"], dir.path()).status.code(), Some(2));

    assert_eq!(run(&["predict"], dir.path()).status.code(), Some(2));
}

#[test]
fn sweep_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = run(&["--config", &cfg, "sweep"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("out/sweep.csv");
    let table = fs::read_to_string(&csv).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("B,lambda1"));
    assert_eq!(lines.count(), 5);
    let manifest = fs::read_to_string(dir.path().join("out/manifest.json")).unwrap();
    assert!(manifest.contains("\"command\": \"sweep\""));

    let out = run(&["--config", &cfg, "plot", "--input", csv.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = fs::read_to_string(dir.path().join("out/sweep.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 5);
    assert!(dir.path().join("out/sweep.dat").exists());

    let out = run(&["--config", &cfg, "fit", "--input", csv.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(dir.path().join("out/fit.txt")).unwrap().contains("residual exponent"));
}

#[test]
fn hc3_needs_a_nondegenerate_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("flat.toml");
    fs::write(&cfg, "[field]\nexpr = \"1\"\n[sweep]\nb = [20, 40, 80, 160, 320]\n").unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "hc3"], dir.path()).status.code(), Some(2));
}
