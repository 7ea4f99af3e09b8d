use std::fs;
use std::path::{Path, PathBuf};

use assert_cmd::Command;
use predicates::prelude::*;
use serde_json::Value;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn mvbound() -> Command {
    let mut cmd = Command::cargo_bin("mvbound").unwrap();
    cmd.env_remove("MVBOUND_OUT");
    cmd
}

fn train(dataset: &str, out: &Path, extra: &[&str]) {
    let mut cmd = mvbound();
    cmd.args(["train", "--dataset"])
        .arg(data(dataset))
        .arg("--out")
        .arg(out);
    if !extra.contains(&"--trees") {
        cmd.args(["--trees", "20"]);
    }
    cmd.args(extra).assert().success();
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Header cells of the first markdown table in `stdout`.
fn header(stdout: &[u8]) -> Vec<String> {
    let text = String::from_utf8_lossy(stdout);
    let line = text.lines().find(|l| l.starts_with('|')).unwrap();
    line.split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

#[test]
fn train_writes_requested_number_of_trees() {
    let dir = TempDir::new().unwrap();
    train("toy.libsvm", dir.path(), &[]);
    let doc = json(&dir.path().join("ensemble.json"));
    assert_eq!(doc["trees"].as_array().unwrap().len(), 20);
    assert_eq!(doc["n_train"], 240);
    assert!(doc["dataset_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn same_seed_gives_identical_files() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    train("toy.libsvm", a.path(), &["--seed", "7"]);
    train("toy.libsvm", b.path(), &["--seed", "7"]);
    let read = |d: &TempDir| fs::read(d.path().join("ensemble.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    for d in [&a, &b] {
        mvbound()
            .args(["optimize", "--dataset"])
            .arg(data("toy.libsvm"))
            .arg("--ensemble")
            .arg(d.path().join("ensemble.json"))
            .arg("--out")
            .arg(d.path())
            .assert()
            .success();
    }
    let read = |d: &TempDir| fs::read(d.path().join("optimize.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn output_directory_defaults_to_environment() {
    let dir = TempDir::new().unwrap();
    mvbound()
        .env("MVBOUND_OUT", dir.path())
        .args(["train", "--trees", "5", "--dataset"])
        .arg(data("toy.libsvm"))
        .assert()
        .success();
    assert!(dir.path().join("ensemble.json").exists());
}

#[test]
fn missing_dataset_exits_with_two() {
    let dir = TempDir::new().unwrap();
    mvbound()
        .args(["train", "--dataset", "does-not-exist.libsvm", "--out"])
        .arg(dir.path())
        .assert()
        .code(2)
        .stderr(predicate::str::contains("does-not-exist.libsvm"));
}

#[test]
fn unknown_flag_exits_with_two() {
    mvbound().args(["train", "--bogus"]).assert().code(2);
}

#[test]
fn binary_bounds_fill_all_columns() {
    let dir = TempDir::new().unwrap();
    train("toy.libsvm", dir.path(), &[]);
    let out = mvbound()
        .args(["bounds", "--dataset"])
        .arg(data("toy.libsvm"))
        .arg("--ensemble")
        .arg(dir.path().join("ensemble.json"))
        .arg("--out")
        .arg(dir.path())
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    assert_eq!(header(&out), ["L(MV_u)", "FO", "C1", "C2", "CTD", "TND", "DIS"]);
    // 240 training points and 20 trees leave most bounds above one.
    assert!(String::from_utf8_lossy(&out).contains(">1"));
    let doc = json(&dir.path().join("bounds.json"));
    let entries = doc["report"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 6);
    let fo = entries.iter().find(|e| e["bound"] == "FO").unwrap();
    assert_eq!(fo["exceeds_one"], fo["value"].as_f64().unwrap() > 1.0);
    assert!(doc["ensemble_hash"].is_string());
    assert!(doc["version"].is_string());
    assert!(dir.path().join("stats.json").exists());
}

#[test]
fn multiclass_defaults_drop_binary_only_bounds() {
    let dir = TempDir::new().unwrap();
    train("toy3.libsvm", dir.path(), &[]);
    let run = |extra: &[&str]| {
        let mut cmd = mvbound();
        cmd.args(["bounds", "--dataset"])
            .arg(data("toy3.libsvm"))
            .arg("--ensemble")
            .arg(dir.path().join("ensemble.json"))
            .arg("--out")
            .arg(dir.path())
            .args(extra);
        cmd.assert()
    };
    let out = run(&[]).success().get_output().stdout.clone();
    assert_eq!(header(&out), ["L(MV_u)", "FO", "CTD", "TND"]);
    run(&["--bounds", "FO,C1"])
        .code(2)
        .stderr(predicate::str::contains("binary"));
}

#[test]
fn hash_mismatch_is_rejected() {
    let dir = TempDir::new().unwrap();
    train("toy.libsvm", dir.path(), &[]);
    mvbound()
        .args(["bounds", "--dataset"])
        .arg(data("toy3.libsvm"))
        .arg("--ensemble")
        .arg(dir.path().join("ensemble.json"))
        .arg("--out")
        .arg(dir.path())
        .assert()
        .code(2)
        .stderr(predicate::str::contains("hashes to"));
}

#[test]
fn empty_overlap_is_a_computation_failure() {
    let dir = TempDir::new().unwrap();
    // Six training points: some pair of trees shares no out-of-bag sample.
    train(
        "toy.libsvm",
        dir.path(),
        &["--trees", "10", "--test-fraction", "0.98", "--seed", "1"],
    );
    mvbound()
        .args(["bounds", "--dataset"])
        .arg(data("toy.libsvm"))
        .arg("--ensemble")
        .arg(dir.path().join("ensemble.json"))
        .arg("--out")
        .arg(dir.path())
        .assert()
        .code(1)
        .stderr(predicate::str::contains("share no out-of-bag"));
}

#[test]
fn optimize_reports_three_losses_and_monotone_traces() {
    let dir = TempDir::new().unwrap();
    train("toy.libsvm", dir.path(), &[]);
    let out = mvbound()
        .args(["optimize", "--dataset"])
        .arg(data("toy.libsvm"))
        .arg("--ensemble")
        .arg(dir.path().join("ensemble.json"))
        .arg("--out")
        .arg(dir.path())
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    assert_eq!(header(&out), ["L(MV_u)", "L(MV_rho*_FO)", "L(MV_rho*_TND)"]);
    let text = String::from_utf8_lossy(&out);
    assert!(text.contains("rho* for FO (sorted"));
    assert!(text.contains("rho* for TND (sorted"));

    let doc = json(&dir.path().join("optimize.json"));
    let results = doc["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    for r in results {
        let trace: Vec<f64> = r["result"]["trace"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        assert!(!trace.is_empty());
        assert!(trace.windows(2).all(|w| w[1] <= w[0]), "{trace:?}");
        let rho: f64 = r["result"]["rho_star"]["rho"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .sum();
        assert!((rho - 1.0).abs() < 1e-9);
    }
}

#[test]
fn only_fo_tnd_dis_can_be_optimized() {
    let dir = TempDir::new().unwrap();
    train("toy.libsvm", dir.path(), &[]);
    mvbound()
        .args(["optimize", "--optimize", "CTD", "--dataset"])
        .arg(data("toy.libsvm"))
        .arg("--ensemble")
        .arg(dir.path().join("ensemble.json"))
        .arg("--out")
        .arg(dir.path())
        .assert()
        .code(2);
}

#[test]
fn experiment_aggregates_repetitions() {
    let dir = TempDir::new().unwrap();
    let out = mvbound()
        .args(["experiment", "--trees", "10", "--reps", "3", "--dataset"])
        .arg(data("toy.libsvm"))
        .arg("--out")
        .arg(dir.path())
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    assert!(String::from_utf8_lossy(&out).contains('±'));
    let doc = json(&dir.path().join("experiment.json"));
    assert_eq!(doc["runs"].as_array().unwrap().len(), 3);
    let group = &doc["groups"][0];
    let tnd = group["metrics"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["metric"] == "TND")
        .unwrap();
    assert_eq!(tnd["count"], 3);
    assert!(tnd["std"].as_f64().unwrap() >= 0.0);
}

#[test]
fn experiment_sweeps_bagging_and_labeled_fraction() {
    let dir = TempDir::new().unwrap();
    mvbound()
        .args([
            "experiment",
            "--trees",
            "10",
            "--bagging",
            "full,reduced",
            "--unlabeled-r",
            "0.1,0.5",
            "--bounds",
            "FO,TND,DIS",
            "--dataset",
        ])
        .arg(data("toy.libsvm"))
        .arg("--out")
        .arg(dir.path())
        .assert()
        .success();
    let doc = json(&dir.path().join("experiment.json"));
    let groups = doc["groups"].as_array().unwrap();
    let keys: Vec<(String, f64)> = groups
        .iter()
        .map(|g| {
            (
                g["bagging"].as_str().unwrap().to_string(),
                g["labeled_fraction"].as_f64().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        keys,
        [
            ("full".to_string(), 0.1),
            ("full".to_string(), 0.5),
            ("reduced".to_string(), 0.1),
            ("reduced".to_string(), 0.5)
        ]
    );
    for run in doc["runs"].as_array().unwrap() {
        assert!(run["n_unlabeled"].as_u64().unwrap() > 0);
    }
}

#[test]
fn experiment_rejects_binary_only_bounds_on_multiclass() {
    let dir = TempDir::new().unwrap();
    mvbound()
        .args(["experiment", "--trees", "5", "--bounds", "DIS", "--dataset"])
        .arg(data("toy3.libsvm"))
        .arg("--out")
        .arg(dir.path())
        .assert()
        .code(2);
}

#[test]
fn csv_input_matches_libsvm() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("toy.csv");
    let text = fs::read_to_string(data("toy.libsvm")).unwrap();
    let rows: Vec<String> = text
        .lines()
        .map(|l| {
            let mut parts = l.split_whitespace();
            let label = parts.next().unwrap();
            let mut cells: Vec<&str> = parts.map(|p| p.split_once(':').unwrap().1).collect();
            cells.push(label);
            cells.join(",")
        })
        .collect();
    fs::write(&csv, rows.join("\n") + "\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    train("toy.libsvm", &a, &[]);
    mvbound()
        .args(["train", "--trees", "20", "--dataset"])
        .arg(&csv)
        .arg("--out")
        .arg(&b)
        .assert()
        .success();
    let trees = |d: &Path| json(&d.join("ensemble.json"))["trees"].clone();
    assert_eq!(trees(&a), trees(&b));
}

#[test]
fn synth_dataset_round_trips_through_train() {
    let dir = TempDir::new().unwrap();
    mvbound()
        .args(["synth", "dataset", "--kind", "xor", "--n", "200", "--dim", "3", "--out"])
        .arg(dir.path())
        .assert()
        .success();
    let file = dir.path().join("synthetic.libsvm");
    assert_eq!(fs::read_to_string(&file).unwrap().lines().count(), 200);
    mvbound()
        .args(["train", "--trees", "5", "--dataset"])
        .arg(&file)
        .arg("--out")
        .arg(dir.path())
        .assert()
        .success();
}

#[test]
fn synth_population_reports_oracle_and_sample() {
    let dir = TempDir::new().unwrap();
    mvbound()
        .args([
            "synth",
            "population",
            "--kind",
            "independent",
            "--hypotheses",
            "6",
            "--risk",
            "0.3",
            "--out",
        ])
        .arg(dir.path())
        .assert()
        .success()
        .stdout(predicate::str::contains("oracle").and(predicate::str::contains("empirical")));
    let doc = json(&dir.path().join("population.json"));
    let fo = doc["oracle"]["fo"].as_f64().unwrap();
    assert!((fo - 0.6).abs() < 1e-12);
    let tnd = doc["oracle"]["tnd"].as_f64().unwrap();
    // 4 * (0.3/6 + 0.09 * 5/6)
    assert!((tnd - 0.5).abs() < 1e-12);
}
