use std::path::Path;
use std::process::Command;

fn evosq(dir: &Path, args: &[&str], config: &str) -> (i32, String) {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_evosq"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

const NULL: &str = r#"{"profile": "flat-cylinder", "n": 16, "m": 64, "eps": 0.3, "q1": "zero", "q2": "zero"}"#;

#[test]
fn null_test_passes_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = evosq(dir.path(), &["null-test"], NULL);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("PASS [8] null-test"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["criteria"][0]["pass"], true);
}

#[test]
fn failing_criterion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"profile": "flat-cylinder", "eps": 0.3, "q1": "constant(1)", "q2": "zero", "levels": "8x16,16x32"}"#;
    let (code, text) = evosq(dir.path(), &["convergence-study"], config);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("FAIL [6] headline-rate"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(evosq(dir.path(), &["warp-drive"], NULL).0, 2);
    assert_eq!(evosq(dir.path(), &["null-test"], r#"{"profile": "disk", "typo": 1}"#).0, 2);
    assert_eq!(evosq(dir.path(), &["null-test", "--override", "n=7"], NULL).0, 2);
    let (code, text) = evosq(dir.path(), &["null-test"], r#"{"profile": "disk", "n": 16, "m": 8, "eps": 0.3}"#);
    assert_eq!(code, 2);
    assert!(text.contains("q1"), "{text}");
}

#[test]
fn numerical_errors_exit_three_and_depth_errors_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(evosq(dir.path(), &["null-test", "--override", "eps=5"], NULL).0, 2);
    let (code, text) = evosq(dir.path(), &["bvp-headline"], NULL);
    assert_eq!(code, 3, "{text}");
}
