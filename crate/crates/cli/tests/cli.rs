use std::process::Command;

fn weakscatter() -> Command {
    Command::new(env!("CARGO_BIN_EXE_weakscatter"))
}

#[test]
fn weak_vector_succeeds_and_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = weakscatter().args(["weak-vector", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("check.displacement_ratio: pass"));
    assert!(dir.path().join("weak-vector_report.txt").exists());
}

#[test]
fn config_file_and_overrides_are_layered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[physics]\neta = 0.1\n").unwrap();
    let out = weakscatter()
        .args(["weak-vector", "--set", "window.extent=1.5", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("config.physics.eta: 0.1"));
    assert!(stdout.contains("config.window.extent: 1.5"));
    // hbar eta T Hzz sigma_w_z = 0.1 * 1.5 * 1 * 1
    assert!(stdout.contains("metric.displacement_z_re: 1.5000000000e-1"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| weakscatter().args(args).arg("--out").arg(dir.path()).status().unwrap().code();
    assert_eq!(code(&["no-such-scenario"]), Some(2));
    assert_eq!(code(&["fig2", "--set", "tensor.hxx=0", "--set", "tensor.hxz=0"]), Some(2));
    assert_eq!(code(&["fig2", "--set", "bogus.key=1"]), Some(2));
    assert_eq!(code(&["weak-vector", "--config", "/nonexistent/c.toml"]), Some(4));
    // stable but too coarse in time for the stability guard
    assert_eq!(code(&["fig1", "--set", "run.steps=10"]), Some(3));
}

#[test]
fn svg_output_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    let out = weakscatter().args(["fig3", "--svg", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("fig3_py_px.svg").exists());
    assert!(dir.path().join("fig3_py_px.csv").exists());
}
