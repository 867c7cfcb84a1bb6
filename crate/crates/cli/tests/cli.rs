use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otcoarsen"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

/// Writes a TU-format dataset of `n` small graphs: even graphs are paths,
/// odd graphs are stars, with `labels` distinct node labels.
fn toy_dataset(dir: &Path, name: &str, n: usize, labels: usize) {
    fs::create_dir_all(dir).unwrap();
    let (mut a, mut ind, mut gl, mut nl) = (String::new(), String::new(), String::new(), String::new());
    let mut next = 1;
    for g in 0..n {
        let size = 4 + g % 3;
        for i in 0..size {
            ind += &format!("{}\n", g + 1);
            nl += &format!("{}\n", (i + g) % labels);
        }
        for i in 1..size {
            let (u, v) = if g % 2 == 0 { (next + i - 1, next + i) } else { (next, next + i) };
            a += &format!("{u}, {v}\n{v}, {u}\n");
        }
        gl += &format!("{}\n", if g % 2 == 0 { 1 } else { -1 });
        next += size;
    }
    fs::write(dir.join(format!("{name}_A.txt")), a).unwrap();
    fs::write(dir.join(format!("{name}_graph_indicator.txt")), ind).unwrap();
    fs::write(dir.join(format!("{name}_graph_labels.txt")), gl).unwrap();
    fs::write(dir.join(format!("{name}_node_labels.txt")), nl).unwrap();
}

const FAST: [&str; 10] = [
    "--max-epochs", "3", "--folds", "4", "--hidden", "4", "--classifier-epochs", "5", "--classifier-hidden", "4",
];

fn train(data: &Path, out: &Path, extra: &[&str]) -> Output {
    run(bin().arg("train").arg("--dataset").arg(data).arg("--out").arg(out).args(FAST).args(extra))
}

fn accuracy_line(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).lines().last().unwrap_or_default().to_string()
}

#[test]
fn missing_dataset_is_a_usage_error() {
    let o = run(bin().args(["train", "--levels", "1"]));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--dataset"));
}

#[test]
fn out_of_range_flag_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    toy_dataset(&tmp.path().join("TOY"), "TOY", 12, 3);
    let o = train(&tmp.path().join("TOY"), tmp.path(), &["--ratio", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_then_eval_reports_the_same_accuracy() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("TOY");
    toy_dataset(&data, "TOY", 16, 3);
    let out = tmp.path().join("run");
    let t = train(&data, &out, &["--levels", "2", "--seed", "7"]);
    assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
    let ckpt = fs::read_to_string(out.join("checkpoint.json")).unwrap();
    assert!(ckpt.contains("otcoarsen-ckpt/1"));
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["config"]["levels"], 2);
    assert_eq!(metrics["folds"].as_array().unwrap().len(), 4);
    assert_eq!(metrics["folds"][0]["history"].as_array().unwrap().len(), 3);

    let eval_json = tmp.path().join("eval.json");
    let e = run(bin().arg("eval").arg("--dataset").arg(&data).arg("--checkpoint").arg(out.join("checkpoint.json")).arg("--metrics").arg(&eval_json));
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    assert_eq!(accuracy_line(&e), accuracy_line(&t));
    let eval: serde_json::Value = serde_json::from_str(&fs::read_to_string(eval_json).unwrap()).unwrap();
    assert_eq!(eval["fold_accuracies"], metrics["fold_accuracies"]);
}

#[test]
fn eval_against_a_different_feature_width_is_incompatible() {
    let tmp = TempDir::new().unwrap();
    toy_dataset(&tmp.path().join("SEVEN"), "SEVEN", 12, 7);
    toy_dataset(&tmp.path().join("THREE"), "THREE", 12, 3);
    let out = tmp.path().join("run");
    assert!(train(&tmp.path().join("SEVEN"), &out, &[]).status.success());
    let e = run(bin().arg("eval").arg("--dataset").arg(tmp.path().join("THREE")).arg("--checkpoint").arg(out.join("checkpoint.json")));
    assert_eq!(e.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&e.stderr).contains("incompatible"));
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("TOY");
    toy_dataset(&data, "TOY", 12, 3);
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, format!(r#"{{"dataset": {:?}, "gamma": 0.5, "k": 2, "levels": 3}}"#, data)).unwrap();
    let out = tmp.path().join("run");
    let o = run(bin().arg("train").arg("--config").arg(&cfg).arg("--out").arg(&out).args(FAST).args(["--k", "4"]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["config"]["gamma"], 0.5);
    assert_eq!(metrics["config"]["k"], 4);
    assert_eq!(metrics["config"]["levels"], 3);

    fs::write(&cfg, r#"{"gama": 0.5}"#).unwrap();
    let o = run(bin().arg("train").arg("--config").arg(&cfg).arg("--dataset").arg(&data));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_deduplicates_the_grid() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("TOY");
    toy_dataset(&data, "TOY", 12, 3);
    let csv = tmp.path().join("sweep.csv");
    let o = run(bin()
        .arg("sweep")
        .arg("--dataset")
        .arg(&data)
        .args(["--gammas", "0.1,1,1", "--ks", "2,5,2", "--jobs", "2"])
        .arg("--out")
        .arg(&csv)
        .args(FAST));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let body = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines[0], "gamma,k,mean_accuracy,std_accuracy");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.1,2,"));
    assert!(lines[4].starts_with("1.0,5,"));
}

#[test]
fn sweep_without_grid_is_a_usage_error() {
    let o = run(bin().args(["sweep", "--dataset", "x", "--ks", "2"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_writes_parseable_dot_per_level() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("TOY");
    toy_dataset(&data, "TOY", 12, 3);
    let run_dir = tmp.path().join("run");
    assert!(train(&data, &run_dir, &["--levels", "2"]).status.success());
    let dots = tmp.path().join("dots");
    let o = run(bin()
        .arg("export")
        .arg("--dataset")
        .arg(&data)
        .arg("--checkpoint")
        .arg(run_dir.join("checkpoint.json"))
        .args(["--graph", "1", "--fold", "2"])
        .arg("--out")
        .arg(&dots));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for level in 0..3 {
        let doc = fs::read_to_string(dots.join(format!("level_{level}.dot"))).unwrap();
        graphviz_rust::parse(&doc).unwrap_or_else(|e| panic!("level {level}: {e}\n{doc}"));
    }
    // graph 1 is a 5-node star: level sizes 5 -> 3 -> 2
    let level1 = fs::read_to_string(dots.join("level_1.dot")).unwrap();
    assert_eq!(level1.matches(" [style=").count(), 3);
    assert!(level1.contains("label=\""));

    let bad = run(bin()
        .arg("export")
        .arg("--dataset")
        .arg(&data)
        .arg("--checkpoint")
        .arg(run_dir.join("checkpoint.json"))
        .args(["--graph", "99"]));
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("index 99"));
}

#[test]
fn identical_runs_write_identical_files() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("TOY");
    toy_dataset(&data, "TOY", 12, 3);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(train(&data, &a, &["--seed", "3"]).status.success());
    assert!(train(&data, &b, &["--seed", "3"]).status.success());
    for f in ["metrics.json", "checkpoint.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
