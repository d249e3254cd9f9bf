mod common;

use std::fs;
use std::path::Path;

use dissim::cli::{load_config, load_config_str, run_subcommand, ConfigError, RunFlags, Status, Subcommand};

fn flags(out: &Path, trials: usize) -> RunFlags {
    RunFlags {
        trials: Some(trials),
        horizon: Some(1.0),
        out: out.to_path_buf(),
        ..RunFlags::default()
    }
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn bundled_first_example_builds_nine_state_network() {
    let project = common::example("example1");
    let resolved = project.resolve_network("complete_graph", 1e-8).unwrap();
    let n: usize = resolved.net.subsystems.iter().map(|s| s.n()).sum();
    assert_eq!(n, 9);
    assert_eq!(resolved.net.coupling.shape(), (9, 9));
}

#[test]
fn csv_outputs_are_byte_identical_across_reruns() {
    let project = common::example("example1");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        for cmd in [Subcommand::Simulate, Subcommand::Bound, Subcommand::McValidate] {
            let outcome = run_subcommand(cmd, &project, &flags(dir.path(), 20));
            assert_eq!(outcome.status, Status::Pass, "{:?}: {:?}", cmd, outcome.lines);
        }
        runs.push(csv_files(dir.path()));
    }
    assert_eq!(runs[0].len(), 3);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn csv_files_have_header_and_full_precision() {
    let project = common::example("example1");
    let dir = tempfile::tempdir().unwrap();
    run_subcommand(Subcommand::McValidate, &project, &flags(dir.path(), 10));
    let text = fs::read_to_string(dir.path().join("mc_complete_graph.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,mean_sq_error,stderr,bound");
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 4);
        for cell in &cells {
            let v: f64 = cell.parse().unwrap();
            // 17 significant digits round-trip every double exactly
            assert_eq!(format!("{v:.16e}").parse::<f64>().unwrap(), v);
            let mantissa = cell.split(['e', 'E']).next().unwrap();
            let digits = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17, "cell {cell}");
        }
        let (mean, bound): (f64, f64) = (cells[1].parse().unwrap(), cells[3].parse().unwrap());
        assert!(bound >= mean);
        rows += 1;
    }
    assert_eq!(rows, 1001);
}

#[test]
fn emitted_project_files_load_again() {
    let project = common::example("example1");
    let dir = tempfile::tempdir().unwrap();
    for cmd in [Subcommand::Abstract, Subcommand::Compose] {
        let outcome = run_subcommand(cmd, &project, &flags(dir.path(), 1));
        assert_eq!(outcome.status, Status::Pass, "{:?}", outcome.lines);
        for path in outcome.artifacts.iter().filter(|p| p.extension().is_some_and(|e| e == "json")) {
            let loaded = load_config(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(!loaded.systems.is_empty());
        }
    }
    let closed = load_config(&dir.path().join("compose_complete_graph.json")).unwrap();
    assert!(closed.systems.values().any(|s| s.n() == 9));
}

#[test]
fn mistyped_matrix_is_reported_at_its_field() {
    let text = r#"{"schema_version": 1, "systems": {"plant": {"A": [[0, 1, 2], [3, 4, 5]], "B": [[1], [0]]}}}"#;
    let err = load_config_str(text).unwrap_err();
    assert!(matches!(err, ConfigError::Invalid { .. }), "{err:?}");
    let msg = err.to_string();
    assert!(msg.contains("/systems/plant/A"), "{msg}");
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_config(Path::new("/nonexistent/project.json")).unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }));
}
