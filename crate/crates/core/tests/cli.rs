//! End-to-end runs of the `gmv` binary on small synthetic data.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gmv::experiment::Report;
use gmv::io;

fn gmv(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_gmv")).args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "gmv {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

const SMALL: [&str; 8] = ["--d", "32", "--n", "64", "--m", "4", "--seed", "3"];

#[test]
fn synth_learn_eval_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let (x, q, model, report) = (
        path(dir.path(), "x.gmvd"),
        path(dir.path(), "q.gmvd"),
        path(dir.path(), "model.gmvm"),
        path(dir.path(), "report.toml"),
    );
    gmv(&["synth", "--d", "32", "--n", "64", "--seed", "3", "--out", &x, "--queries-out", &q]);
    let templates = io::load_descriptors(&x).unwrap();
    assert_eq!((templates.dim(), templates.len()), (32, 64));
    assert_eq!(io::load_queries(&q).unwrap().len(), 128);

    let mut learn = vec!["learn", "--method", "eoa", "--input", &x, "--model-out", &model];
    learn.extend(SMALL);
    gmv(&learn);
    let loaded = io::load_model(&model).unwrap();
    assert_eq!(loaded.num_groups(), 16);

    gmv(&["eval", "--model", &model, "--input", &x, "--queries", &q, "--report", &report]);
    let r = Report::from_toml(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.data.groups, 16);
    assert!(r.verification.auc > 0.5 && r.verification.auc <= 1.0);

    let shown = String::from_utf8(gmv(&["inspect-model", &model]).stdout).unwrap();
    assert!(shown.contains("method = \"eoa\""), "{shown}");
    assert!(shown.contains("groups = 16"), "{shown}");
}

#[test]
fn learn_matches_run_on_the_same_files() {
    let dir = tempfile::tempdir().unwrap();
    let (x, q, learned, ran) = (
        path(dir.path(), "x.gmvd"),
        path(dir.path(), "q.gmvd"),
        path(dir.path(), "learned.gmvm"),
        path(dir.path(), "ran.gmvm"),
    );
    gmv(&["synth", "--d", "32", "--n", "64", "--sigma", "0.48", "--seed", "3", "--out", &x, "--queries-out", &q]);
    let mut learn = vec!["learn", "--input", &x, "--model-out", &learned];
    learn.extend(SMALL);
    gmv(&learn);
    let mut run = vec!["run", "--input", &x, "--queries", &q, "--model-out", &ran, "--report", "/dev/null"];
    run.extend(SMALL);
    gmv(&run);
    assert!(fs::read(&learned).unwrap() == fs::read(&ran).unwrap(), "model files differ");
}

#[test]
fn sweep_writes_reports_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "sweep");
    gmv(&[
        "sweep", "--method", "baseline-aoe", "--d", "32", "--n", "64", "--vary", "m", "--values", "1,4,16", "--out-dir", &out,
    ]);
    let table = fs::read_to_string(Path::new(&out).join("sweep.tsv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4, "{table}");
    assert!(lines[0].starts_with("m\tauc"));
    let reports = fs::read_dir(&out).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "toml")
    });
    assert_eq!(reports.count(), 3);
}

#[test]
fn errors_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = path(dir.path(), "bogus.gmvd");
    fs::write(&bogus, b"NOPE").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gmv"))
        .args(["learn", "--input", &bogus, "--model-out", &path(dir.path(), "m.gmvm")])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("byte 0") && err.contains("magic"), "{err}");
}
