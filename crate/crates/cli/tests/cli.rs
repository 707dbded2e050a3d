use std::process::Command;

fn gaitq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gaitq"))
}

#[test]
fn simulate_with_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
    let out = gaitq().args(["simulate", "--config", config, "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("trajectory.csv").is_file());
    assert!(dir.path().join("summary.json").is_file());
}

#[test]
fn missing_config_names_path() {
    let out = gaitq().args(["train", "--config", "/no/such/exp.toml"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/exp.toml"));
}

#[test]
fn bad_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[filter]\nparticle = 10\n").unwrap();
    let out = gaitq().arg("filter").arg("--config").arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("particle"));
}

#[test]
fn unknown_subcommand_and_flag_print_usage() {
    for args in [&["dance"][..], &["simulate", "--speed", "3"][..]] {
        let out = gaitq().args(args).output().unwrap();
        assert!(!out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"), "{args:?}");
    }
}

#[test]
fn seed_override_reaches_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaitq().args(["fit-phase", "--seed", "42", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let summary = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 42"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fitted radius"));
}
