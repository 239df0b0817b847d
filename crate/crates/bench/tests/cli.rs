use std::process::Command;

fn sparsepg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsepg"))
}

#[test]
fn smoke_solve_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = sparsepg()
        .args(["solve", "--set", "n=2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("J(u*)"));
    for file in ["history.csv", "control.csv", "state.csv", "summary.txt"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
    let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(history.starts_with("k,J,f,penalty,step_norm,L_k,pde_solves,support_measure,support_change,omega_m\n"));
}

#[test]
fn unknown_target_is_a_config_error() {
    let out = sparsepg().args(["solve", "--set", "target=nowhere"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = sparsepg().args(["solve", "--preset", "example9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n = 4\np = 0.3\nproblem = \"semilinear\"\n").unwrap();
    let out = sparsepg()
        .args(["solve", "--preset", "example2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "n = 4\nalpah = 0.1\n").unwrap();
    let out = sparsepg().args(["solve", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));
}

#[test]
fn table_commands_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = sparsepg()
            .args(["table-mesh", "--n", "4,8", "--out"])
            .arg(dir.path().join(sub))
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(dir.path().join(sub).join("table_mesh.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
    assert!(dir.path().join("a").join("table_mesh.txt").exists());
}

#[test]
fn curve_commands_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = sparsepg().arg("prox-curve").arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let curve = std::fs::read_to_string(dir.path().join("prox_s0.5_b2_p0.5.csv")).unwrap();
    assert!(curve.starts_with("q,value,tie\n"));
    assert!(dir.path().join("prox_s3_b2_p0.3.csv").exists());
    let out = sparsepg()
        .args(["gmap-curve", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let gmap = std::fs::read_to_string(dir.path().join("gmap.csv")).unwrap();
    assert!(gmap.starts_with("z,u,branch\n"));
    assert!(gmap.contains(",+\n") && gmap.contains(",-\n") && gmap.contains(",0\n"));
}
