use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nemthsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nemthsim")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const EQUILIBRIUM: &str = r#"
name = "eq"

[grid]
extent = [1.0, 1.0]
resolution = [8, 8]
bc = "walls"

[initial]
velocity = { kind = "zero" }
director = { kind = "constant", d = [0.0, 0.0, 1.0] }
temperature = { kind = "constant", value = 1.0 }
hemisphere = true

[coefficients]
mu = 1.0
k = 1.0
h = 1.0

[time]
t_end = 0.01

[output]
snapshot_stride = 5
"#;

const SHEAR: &str = r#"
name = "shear"

[grid]
extent = [6.283185307179586, 6.283185307179586]
resolution = [16, 16]
bc = "periodic"

[initial]
velocity = { kind = "taylor_green", amplitude = 1.0 }
director = { kind = "tilted_hemisphere", base = 0.5, amp = 0.4 }
temperature = { kind = "bump", base = 0.75, amplitude = 0.25 }
hemisphere = true

[coefficients]
mu = { kind = "rational", c0 = 0.5, c1 = 0.5 }
k = 1.0
h = 1.0

[time]
dt = 2e-3
t_end = 0.05
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_then_audit_equilibrium() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "eq.toml", EQUILIBRIUM);
    let out = tmp.path().join("run");
    let o = nemthsim(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("diagnostics.csv").exists());
    assert!(out.join("snapshots/step_00000010/theta.bin").exists());

    let o = nemthsim(&["audit", "--dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let theta = out.join("snapshots/step_00000005/theta.bin");
    let bytes = fs::read(&theta).unwrap();
    fs::write(&theta, &bytes[..bytes.len() / 2]).unwrap();
    let o = nemthsim(&["audit", "--dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("snapshot integrity"));
}

#[test]
fn sweep_writes_its_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "shear.toml", SHEAR);
    let csv = tmp.path().join("sweep.csv");
    let o = nemthsim(&["sweep-eps", "--config", &cfg, "--eps-list", "0.5,0.25,0.125", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 3 + 1);
    assert!(lines[0].starts_with("eps,penalty_avg"));
    assert!(lines.iter().all(|l| l.split(',').count() == 12));
}

#[test]
fn galerkin_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "shear.toml", SHEAR);
    let csv = tmp.path().join("g.csv");
    let o = nemthsim(&["galerkin", "--config", &cfg, "--m-list", "2,4", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 3);
}

#[test]
fn oracle_and_listing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "eq.toml", EQUILIBRIUM);
    let o = nemthsim(&["oracle", "--config", &cfg, "--random", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = nemthsim(&["list-scenarios"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).lines().any(|l| l == "heated-shear-2d"));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&nemthsim(&["frobnicate"])), 2);
    assert_eq!(code(&nemthsim(&["run"])), 2);
    assert_eq!(code(&nemthsim(&["run", "--scenario", "equilibrium", "--config", "x.toml"])), 2);
    assert_eq!(code(&nemthsim(&["run", "--scenario", "nope"])), 2);
    let bad = write(tmp.path(), "bad.toml", &EQUILIBRIUM.replace("value = 1.0", "value = 0.0"));
    let o = nemthsim(&["run", "--config", &bad]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("initial.temperature"));
    let cfg = write(tmp.path(), "shear.toml", SHEAR);
    assert_eq!(code(&nemthsim(&["sweep-eps", "--config", &cfg, "--eps-list", "0.1,0.5"])), 2);
    assert_eq!(code(&nemthsim(&["audit", "--dir", tmp.path().join("missing").to_str().unwrap()])), 2);
}
