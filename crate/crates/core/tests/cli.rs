use std::process::Command;

fn coalflow(args: &[&str], threads: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_coalflow"))
        .args(args)
        .env("COALFLOW_THREADS", threads)
        .output()
        .unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(
        coalflow(&["oracle", "--what", "phi", "--C", "1/2", "--t", "1"], "1").status.code(),
        Some(0)
    );
    assert_eq!(coalflow(&["no-such-command"], "1").status.code(), Some(2));
    assert_eq!(coalflow(&["meet", "--dt", "-1"], "1").status.code(), Some(1));
    assert_eq!(
        coalflow(&["oracle", "--what", "phi", "--C", "0", "--t", "1"], "1").status.code(),
        Some(1)
    );
}

#[test]
fn oracle_json_output() {
    let out = coalflow(&["oracle", "--what", "phi", "--C", "0.5", "--t", "1"], "1");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), 0.5351972896481856);
}

#[test]
fn stdout_is_thread_count_independent() {
    let args = ["--seed", "5", "trotter", "--partition-N", "4", "--reps", "200", "--compare-direct"];
    let a = coalflow(&args, "1");
    let b = coalflow(&args, "4");
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    let out = coalflow(&["sandwich", "--reps", "300", "--seed", "9", "--out", first.to_str().unwrap()], "1");
    assert!(out.status.success());
    let manifest = format!("{}.manifest.json", first.display());
    let out = coalflow(&["--config", &manifest, "--out", second.to_str().unwrap()], "1");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(first).unwrap(), std::fs::read(second).unwrap());
}
