//! End-to-end runs of the command-line driver.

mod common;

use std::fs;
use std::path::Path;

use sheetlink::audit::AuditLog;
use sheetlink::cli::{self, RunOptions};
use sheetlink::workbook::Workbook;

use common::fixture;

fn options(dir: &Path, script: &Path) -> RunOptions {
    RunOptions {
        workbook: fixture("frontier.csv"),
        script: script.to_path_buf(),
        out: dir.join("out.csv"),
        audit: dir.join("audit.jsonl"),
        plot: Some(dir.join("frontier")),
        keep_going: false,
        full_errors: false,
        start_dir: None,
    }
}

#[test]
fn empty_script_copies_the_workbook_through() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("empty.script");
    fs::write(&script, "# nothing to do\n\n").unwrap();
    let opts = options(dir.path(), &script);
    assert_eq!(cli::run(&opts), 0);

    let input = Workbook::load_csv(&opts.workbook).unwrap();
    let output = Workbook::load_csv(&opts.out).unwrap();
    assert_eq!(input.digest(), output.digest());

    let log = AuditLog::import_jsonl(&opts.audit).unwrap();
    assert_eq!(log.records().len(), 1);
    assert_eq!(log.records()[0].op, "matlabinit");
    assert!(!dir.path().join("frontier.svg").exists(), "no plot was produced");
}

#[test]
fn unknown_statement_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("bad.script");
    fs::write(&script, "MLFrobnicate(\"x\")\n").unwrap();
    let opts = options(dir.path(), &script);
    assert_eq!(cli::run(&opts), 2);

    let log = AuditLog::import_jsonl(&opts.audit).unwrap();
    let last = log.last().unwrap();
    assert_eq!(last.op, "script");
    assert_eq!(last.status, 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [dir_a.path(), dir_b.path()] {
        let opts = options(dir, &fixture("frontier.script"));
        assert_eq!(cli::run(&opts), 0);
    }
    for name in ["out.csv", "frontier.csv", "frontier.svg"] {
        let a = fs::read(dir_a.path().join(name)).unwrap();
        let b = fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn plot_outputs_carry_labels_grid_and_frontier_rows() {
    let dir = tempfile::tempdir().unwrap();
    let opts = options(dir.path(), &fixture("frontier.script"));
    assert_eq!(cli::run(&opts), 0);

    let svg = fs::read_to_string(dir.path().join("frontier.svg")).unwrap();
    assert!(svg.contains("Risk"), "x label missing");
    assert!(svg.contains("ROR"), "y label missing");
    assert!(svg.contains("polyline"), "frontier line missing");
    assert!(svg.contains("class=\"grid\""), "grid lines missing");

    let plot_csv = fs::read_to_string(dir.path().join("frontier.csv")).unwrap();
    let mut lines = plot_csv.lines();
    assert_eq!(lines.next().unwrap(), "risk,ror,w1,w2,w3");
    assert_eq!(lines.count(), 20);
}

#[test]
fn keep_going_runs_past_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("mixed.script");
    fs::write(
        &script,
        "MLEvalString(\"x=missing\")\nMLPutMatrix(\"retseries\", B4:D9)\n",
    )
    .unwrap();

    // without --keep-going the second statement never runs
    let opts = options(dir.path(), &script);
    assert_ne!(cli::run(&opts), 0);
    let log = AuditLog::import_jsonl(&opts.audit).unwrap();
    assert_eq!(log.records().len(), 2); // init + the failed eval

    let mut opts = options(dir.path(), &script);
    opts.keep_going = true;
    let code = cli::run(&opts);
    assert_ne!(code, 0, "exit code still reports the first failure");
    let log = AuditLog::import_jsonl(&opts.audit).unwrap();
    assert_eq!(log.records().len(), 3);
    assert_eq!(log.records()[2].status, 0, "later statement still ran");
}

#[test]
fn full_errors_flag_expands_audit_detail() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("fail.script");
    fs::write(&script, "MLEvalString(\"x=missing\")\n").unwrap();

    let mut opts = options(dir.path(), &script);
    opts.full_errors = true;
    assert_ne!(cli::run(&opts), 0);
    let log = AuditLog::import_jsonl(&opts.audit).unwrap();
    // with full messages on, the mode-change event precedes the failure
    assert!(log.records().iter().any(|r| r.op == "MLShowMatlabErrors"));
}

#[test]
fn exit_code_zero_iff_no_failed_record() {
    let dir = tempfile::tempdir().unwrap();
    let opts = options(dir.path(), &fixture("frontier.script"));
    let code = cli::run(&opts);
    let log = AuditLog::import_jsonl(&opts.audit).unwrap();
    let clean = log.records().iter().all(|r| r.status == 0);
    assert_eq!(code == 0, clean);
    assert_eq!(code, 0);

    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("fail.script");
    fs::write(&script, "MLGetVar(\"nope\")\n").unwrap();
    let opts = options(dir.path(), &script);
    let code = cli::run(&opts);
    let log = AuditLog::import_jsonl(&opts.audit).unwrap();
    let clean = log.records().iter().all(|r| r.status == 0);
    assert_eq!(code == 0, clean);
    assert_ne!(code, 0);
}

#[test]
fn start_dir_anchors_relative_plot_paths() {
    let dir = tempfile::tempdir().unwrap();
    let plots = dir.path().join("plots");
    fs::create_dir(&plots).unwrap();
    let mut opts = options(dir.path(), &fixture("frontier.script"));
    opts.start_dir = Some(plots.clone());
    opts.plot = Some("frontier".into());
    assert_eq!(cli::run(&opts), 0);
    assert!(plots.join("frontier.svg").exists());
    assert!(plots.join("frontier.csv").exists());
}
