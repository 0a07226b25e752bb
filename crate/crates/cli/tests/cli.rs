use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fairrisk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairrisk"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn fairrisk")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = fairrisk(dir, args);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

/// A nonzero exit with exactly one `error[code]: ...` line on stderr.
fn fails_with(dir: &Path, args: &[&str], code: &str) -> String {
    let o = fairrisk(dir, args);
    assert_eq!(o.status.code(), Some(1), "{args:?}");
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    let prefix = format!("error[{code}]: ");
    assert!(err.starts_with(&prefix), "{err}");
    err
}

const SMALL: &str = "\
n_per_group = 500
n_trees = 40
learning_rate = 0.05
n_batches = 2
batch_size = 100
forest_trees = 30
input = train.csv
test_input = test.csv
forecast_input = test.csv
";

#[test]
fn full_flow_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.conf"), SMALL).unwrap();
    let c = ["--config", "run.conf"];

    ok(d, &["synth", c[0], c[1], "--output", "train.csv"]);
    ok(d, &["synth", c[0], c[1], "--output", "test.csv", "--synth_seed", "3"]);
    let fit = ok(d, &["fit", c[0], c[1]]);
    assert!(fit.contains("250 baseline rows"), "{fit}");
    let transport = ok(d, &["transport", c[0], c[1]]);
    assert!(transport.starts_with("feature,overlap_before,overlap_transported,overlap_smoothed\n"));
    assert_eq!(transport.lines().count(), 5);
    let cal = ok(d, &["calibrate", c[0], c[1], "--alpha", "0.1"]);
    assert!(cal.starts_with("alpha=0.1 gamma_hat="), "{cal}");

    ok(d, &["forecast", c[0], c[1]]);
    let csv = fs::read_to_string(d.join("out/forecast.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("row_id,group,point_prediction,set_members,p1"));
    assert_eq!(lines.count(), 1000);

    let text = ok(d, &["evaluate", c[0], c[1]]);
    assert!(text.contains("Prediction parity gap (TV)"), "{text}");
    assert_eq!(ok(d, &["report", c[0], c[1]]), text);
    let csv = ok(d, &["report", c[0], c[1], "--format", "csv"]);
    assert!(csv.contains("prediction_parity,"), "{csv}");
}

#[test]
fn failures_are_single_machine_readable_lines() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fails_with(d, &["fit"], "invalid_config");
    fails_with(d, &["fit", "--input", "nope.csv"], "io");
    fails_with(d, &["fit", "--config", "missing.conf"], "io");
    fails_with(d, &["calibrate", "--alpha", "1.5"], "invalid_config");
    fails_with(d, &["frobnicate"], "usage");
    fails_with(d, &["fit", "--no-such-flag", "1"], "usage");

    fs::write(d.join("bad.conf"), "alhpa = 0.1\n").unwrap();
    let err = fails_with(d, &["fit", "--config", "bad.conf"], "invalid_config");
    assert!(err.contains("alhpa"), "{err}");

    ok(d, &["synth", "--n_per_group", "100", "--output", "train.csv"]);
    let err = fails_with(d, &["fit", "--input", "train.csv", "--outcome_column", "rearrest"], "missing_column");
    assert!(err.contains("rearrest"), "{err}");
    let err = fails_with(d, &["calibrate", "--input", "train.csv"], "missing_artifact");
    assert!(err.contains("run fit first"), "{err}");
}

#[test]
fn help_and_version_exit_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(dir.path(), &["transport", "--help"]);
    assert!(help.contains("--batch_size"), "{help}");
    assert!(ok(dir.path(), &["--version"]).starts_with("fairrisk "));
}
