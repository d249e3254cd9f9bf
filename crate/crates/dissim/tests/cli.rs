use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/configs").join(name)
}

fn dissim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dissim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("DISSIM_THREADS", "2")
        .output()
        .unwrap()
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn first_example_pipeline_passes() {
    let dir = tempfile::tempdir().unwrap();
    let run = dissim(&["example1", "--trials", "20", "--horizon", "1"], dir.path());
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stdout));
    assert_eq!(report(dir.path())["exit_code"], 0);
}

#[test]
fn verify_net_on_first_example_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example1.json");
    let run = dissim(&["verify-net", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(run.status.code(), Some(0));
    let margin = report(dir.path())["results"]["networks"]["complete_graph"]["lmi"]["margin"].as_f64().unwrap();
    assert!(margin <= 1e-10);
}

/// The second example's certificate data violates the block inequality, so
/// the certificate check fails while the supply sign reports −3.68055.
#[test]
fn verify_cert_on_second_example_reports_the_failed_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example2.json");
    let run = dissim(&["verify-cert", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(run.status.code(), Some(1));
    let rep = report(dir.path());
    let link = &rep["results"]["certificates"]["link_1"]["assumption"];
    assert_eq!(link["lmi"]["is_satisfied"], false);
    let supply = link["supply_sign"]["margin"].as_f64().unwrap();
    assert!((supply + 3.68055).abs() < 1e-9, "{supply}");
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("supply sign D2'XD2 max eigenvalue -3.680550e0 PASS"), "{stdout}");
}

#[test]
fn mc_validate_writes_a_bounded_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example2.json");
    let run = dissim(&["mc-validate", "--config", cfg.to_str().unwrap(), "--trials", "10"], dir.path());
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stdout));
    let text = fs::read_to_string(dir.path().join("mc_ring.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,mean_sq_error,stderr,bound"));
    for line in lines {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 4);
        assert!(cells[3] >= cells[1], "{line}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = config("example1.json");
    let outputs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let run = dissim(&["mc-validate", "--config", cfg.to_str().unwrap(), "--trials", "20", "--horizon", "1"], dir.path());
            assert_eq!(run.status.code(), Some(0));
            fs::read(dir.path().join("mc_complete_graph.csv")).unwrap()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn bad_config_exits_two_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"schema_version": 1, "systems": {"plant": {"A": [[0, 1, 2], [3, 4, 5]], "B": [[1], [0]]}}}"#).unwrap();
    let out = dir.path().join("out");
    let run = dissim(&["verify-cert", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(run.status.code(), Some(2));
    let rep = report(&out);
    assert_eq!(rep["exit_code"], 2);
    assert!(rep["error"].as_str().unwrap().contains("A"));
}

#[test]
fn empty_project_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    fs::write(&cfg, r#"{"schema_version": 1, "systems": {}}"#).unwrap();
    let out = dir.path().join("out");
    let run = dissim(&["verify-cert", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(out.join("report.json").exists());
}

#[test]
fn missing_config_for_plain_commands_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let run = dissim(&["verify-net"], dir.path());
    assert_eq!(run.status.code(), Some(2));
    assert!(dir.path().join("report.json").exists());
}
