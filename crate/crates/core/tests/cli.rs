//! End-to-end runs of the `sleepcast` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use sleepcast::data::parse_csv;
use sleepcast::experiment::ResultsFile;
use sleepcast::model::Model;

fn sleepcast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sleepcast"))
        .current_dir(dir)
        .args(args)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn smoke_data(dir: &Path) {
    ok(sleepcast(
        dir,
        &["generate", "--subjects", "3", "--days", "40", "--seed", "7", "--out", "data"],
    ));
}

#[test]
fn generate_is_byte_identical_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(sleepcast(
        d,
        &["generate", "--subjects", "16", "--days", "120", "--seed", "7", "--out", "a"],
    ));
    ok(sleepcast(
        d,
        &["--seed", "7", "--out", "b", "generate", "--subjects", "16", "--days", "120"],
    ));
    let a = fs::read(d.join("a/synthetic.csv")).unwrap();
    assert_eq!(a, fs::read(d.join("b/synthetic.csv")).unwrap());
    let data = parse_csv(d.join("a/synthetic.csv")).unwrap();
    assert_eq!(data.len(), 16);
    let sidecar: serde_json::Value = serde_json::from_slice(&fs::read(d.join("a/synthetic.config.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed"], 7);
    assert_eq!(sidecar["config"]["generate"]["n_days"], 120);
}

#[test]
fn user_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&sleepcast(d, &["generate", "--days", "5"])), 2);
    assert_eq!(code(&sleepcast(d, &["train", "--input", "missing.csv"])), 2);
    assert_eq!(code(&sleepcast(d, &["train"])), 2);
    assert_eq!(code(&sleepcast(d, &["frobnicate"])), 2);

    fs::write(d.join("bad.toml"), "[train]\nepoch = 3\n").unwrap();
    let o = sleepcast(d, &["--config", "bad.toml", "generate"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("epoch"));

    fs::write(d.join("broken.json"), "{\"command\": \"train\", \"version\": 1").unwrap();
    let o = sleepcast(d, &["report", "broken.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.json"));

    fs::write(d.join("schema.csv"), "subject_id,date,sleep_score\n1,not-a-date,50\n").unwrap();
    assert_eq!(code(&sleepcast(d, &["train", "--input", "schema.csv"])), 2);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("run.toml"), "seed = 3\n[generate]\nn_subjects = 4\nn_days = 30\n").unwrap();
    ok(sleepcast(d, &["--config", "run.toml", "--out", "x", "generate", "--days", "25"]));
    let sidecar: serde_json::Value = serde_json::from_slice(&fs::read(d.join("x/synthetic.config.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed"], 3);
    assert_eq!(sidecar["config"]["generate"]["n_subjects"], 4);
    assert_eq!(sidecar["config"]["generate"]["n_days"], 25);
}

#[test]
fn smoke_train_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    smoke_data(d);
    let started = Instant::now();
    ok(sleepcast(
        d,
        &[
            "train",
            "--input",
            "data/synthetic.csv",
            "--epochs",
            "3",
            "--alpha",
            "0.0",
            "--out",
            "run",
        ],
    ));
    assert!(started.elapsed().as_secs() < 60);

    let results = ResultsFile::read(d.join("run/train.json")).unwrap();
    assert_eq!(results.seed(), 0);
    assert_eq!(results.config()["hyperparams"]["alpha"], 0.0);
    let ResultsFile::Train(train) = &results else {
        panic!("not a train file")
    };
    assert_eq!(train.trials.len(), 3);
    for t in &train.trials {
        assert_eq!(t.hyperparams.alpha, 0.0);
        assert!(t.training.history.len() <= 3);
        let path = d.join(format!("run/checkpoints/fold_{}.json", t.fold.test));
        let m = Model::load(&path).unwrap();
        assert_eq!(m.hyperparams, t.hyperparams);
        let ck: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        assert_eq!(ck["provenance"]["seed"], 0);
        assert_eq!(&ck["provenance"]["config"], results.config());
    }
    assert!(d.join("run/timings.json").exists());

    let o = ok(sleepcast(d, &["report", "run/train.json", "--out", "rep"]));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("Best cell: adast W=7 H=1"));
    let rows = text
        .lines()
        .filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit()))
        .count();
    assert_eq!(rows, 3);
    assert_eq!(fs::read_to_string(d.join("rep/report.txt")).unwrap(), text);
    for t in &train.trials {
        let csv = fs::read_to_string(d.join(format!("rep/series/test_subject_{}.csv", t.fold.test))).unwrap();
        assert_eq!(csv.lines().count() - 1, t.test_series.len() * t.horizon);
        for p in &t.test_series {
            assert_eq!(p.truth.len(), p.predicted.len());
        }
    }
    assert!(d.join("rep/series/val_subject_1.csv").exists());
}

#[test]
fn identical_seeds_give_identical_results() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: Vec<_> = ["a", "b", "c"].iter().map(|r| tmp.path().join(r)).collect();
    let args = [
        "train",
        "--input",
        "data/synthetic.csv",
        "--epochs",
        "3",
        "--seed",
        "5",
        "--horizon",
        "2",
        "--out",
        "run",
    ];
    for (dir, extra) in runs.iter().zip([&[][..], &[][..], &["--jobs", "2"][..]]) {
        fs::create_dir(dir).unwrap();
        smoke_data(dir);
        ok(sleepcast(dir, &[&args[..], extra].concat()));
    }
    let read = |dir: &Path| fs::read(dir.join("run/train.json")).unwrap();
    assert_eq!(read(&runs[0]), read(&runs[1]));

    // jobs is echoed in the config, so only the computed parts can match
    let trials = |dir: &Path| match ResultsFile::read(dir.join("run/train.json")).unwrap() {
        ResultsFile::Train(t) => (t.trials, t.summary),
        _ => panic!("not a train file"),
    };
    assert_eq!(trials(&runs[0]), trials(&runs[2]));
}

#[test]
fn subset_grid_writes_charts() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    smoke_data(d);
    ok(sleepcast(
        d,
        &[
            "grid",
            "--input",
            "data/synthetic.csv",
            "--windows",
            "3",
            "--horizons",
            "1",
            "--models",
            "adast,mlp",
            "--epochs",
            "2",
            "--out",
            "g",
        ],
    ));
    let ResultsFile::Grid(g) = ResultsFile::read(d.join("g/grid.json")).unwrap() else {
        panic!("not a grid file")
    };
    assert_eq!(g.grid.cells.len() + g.grid.empty.len(), 2);
    assert_eq!(g.grid.cells.len(), 2);
    assert_eq!(fs::read_to_string(d.join("g/grid.csv")).unwrap().lines().count(), 3);
    assert_eq!(fs::read_to_string(d.join("g/radar.csv")).unwrap().lines().count(), 4);
    for svg in ["radar.svg", "lines_adast.svg", "lines_mlp.svg"] {
        let text = fs::read_to_string(d.join("g").join(svg)).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{svg}: {e}"));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let desc = doc.descendants().find(|n| n.has_tag_name("desc")).expect("desc element");
        assert!(desc.text().unwrap().contains("seed=0"));
    }
}
