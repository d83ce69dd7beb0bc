use std::path::PathBuf;
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kinetic-ergo-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn cli(args: &[&str], config: &PathBuf, out: &PathBuf) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinetic-ergo"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn passing_run_exits_zero_and_writes_a_summary() {
    let out = scratch("hypo");
    let o = cli(&["hypo-verify"], &configs().join("hypo-verify.json"), &out);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("[PASS] constants_identity"), "{stdout}");
    assert!(out.join("summary.json").is_file());
}

#[test]
fn falsified_cert_exits_two_with_a_witness() {
    let o = cli(
        &["check-dissipativity"],
        &configs().join("dissipativity-falsify.json"),
        &scratch("falsify"),
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(2), "{stdout}");
    assert!(
        stdout.contains("[FAIL]") && stdout.contains("witness"),
        "{stdout}"
    );
}

#[test]
fn bad_inputs_exit_three() {
    // Config for another pipeline.
    let o = cli(
        &["chaos-scan"],
        &configs().join("hypo-verify.json"),
        &scratch("mismatch"),
    );
    assert_eq!(o.status.code(), Some(3));

    // Config that fails schema validation.
    let dir = scratch("invalid");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"pipeline": "hypo-verify", "seed": -1}"#).unwrap();
    let o = cli(&["hypo-verify"], &bad, &dir.join("out"));
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let o = cli(
        &["hypo-verify"],
        &dir.join("missing.json"),
        &dir.join("out"),
    );
    assert_eq!(o.status.code(), Some(3));
}
