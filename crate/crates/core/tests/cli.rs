use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sipsgraph::graph::Graph;

fn sipsgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sipsgraph")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = sipsgraph(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_small_tree() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("tree.txt");
    let stdout = ok(&["generate", "--generator", "tree", "--branching", "2", "--depth", "2", "-o", path_str(&file)]);
    assert!(stdout.contains("7 nodes, 10 pairs"), "{stdout}");
    let g = Graph::load(&file).unwrap();
    assert_eq!(g.n(), 7);
    assert_eq!(g.edge_count(), 10);
}

#[test]
fn generate_is_seed_stable() {
    let dir = tempfile::tempdir().unwrap();
    let args = |name: &str, seed: &str| {
        let file = dir.path().join(name);
        ok(&[
            "generate", "--generator", "clusters", "--clusters", "3", "--nodes", "30", "--p-in", "0.5",
            "--p-out", "0.05", "--graph-seed", seed, "-o", path_str(&file),
        ]);
        fs::read(file).unwrap()
    };
    let a = args("a.txt", "7");
    let b = args("b.txt", "7");
    let c = args("c.txt", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn overflowing_generator_is_rejected_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.txt");
    let out = sipsgraph(&["generate", "--generator", "poisson-const", "--log-rate", "40", "-o", path_str(&file)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!file.exists());

    let out = sipsgraph(&["generate", "--generator", "tree", "--branching", "1", "--depth", "3", "-o", path_str(&file)]);
    assert!(!out.status.success());
    assert!(!file.exists());
}

fn train_tree(out: &Path) {
    ok(&[
        "train", "--preset", "wordnet", "--generator", "tree", "--branching", "2", "--depth", "4", "--head", "sips",
        "--K", "5", "--seeds", "1,2,3", "--iterations", "300", "--checkpoint-every", "100", "--out", path_str(out),
    ]);
}

#[test]
fn train_writes_artifacts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    train_tree(&a);
    train_tree(&b);

    let summary: Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["model"], "sips");
    assert_eq!(summary["K"], 5);
    assert_eq!(summary["runs"].as_array().unwrap().len(), 3);
    let mean = summary["auc_test"]["mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&mean));

    let results = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 4);
    assert!(results.starts_with("model,K,seed,auc_val,auc_test\n"));
    for s in 1..=3 {
        let seed_dir = a.join(format!("seed-{s}"));
        for f in ["metrics.csv", "checkpoint-best.ckpt", "embeddings.txt"] {
            assert!(seed_dir.join(f).is_file(), "missing {f} for seed {s}");
        }
        assert_eq!(fs::read_to_string(seed_dir.join("embeddings.txt")).unwrap().lines().count(), 31);
    }
    assert!(a.join("config.resolved").is_file());

    assert_eq!(fs::read(a.join("metrics.csv")).unwrap(), fs::read(b.join("metrics.csv")).unwrap());
    assert_eq!(fs::read(a.join("results.csv")).unwrap(), fs::read(b.join("results.csv")).unwrap());

    let ckpt = a.join("seed-1").join("checkpoint-best.ckpt");
    let stdout = ok(&[
        "eval", "--checkpoint", path_str(&ckpt), "--preset", "wordnet", "--generator", "tree", "--branching", "2",
        "--depth", "4",
    ]);
    let v: Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["protocol"], "reconstruction");
    let auc = v["auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
    let recorded = summary["runs"][0]["auc_test"].as_f64().unwrap();
    assert!((auc - recorded).abs() < 1e-12, "{auc} vs {recorded}");
}

#[test]
fn config_file_drives_training() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "preset = \"coauthor\"\nseeds = [4]\noutput = \"{}\"\n\n[graph]\ngenerator = \"clusters\"\nclusters = 2\nnodes = 40\np_in = 0.5\np_out = 0.02\n\n[model]\nhead = \"ips\"\nK = 3\n\n[train]\niterations = 200\n",
            out.display()
        ),
    )
    .unwrap();
    ok(&["train", "--config", path_str(&cfg)]);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["model"], "ips");
    assert_eq!(summary["protocol"], "split");

    fs::write(&cfg, "[model]\nbogus = 1\n").unwrap();
    assert!(!sipsgraph(&["train", "--config", path_str(&cfg)]).status.success());
}

#[test]
fn check_reports_bound_and_witness() {
    let stdout = ok(&["check", "--only", "prop1,jeffrey", "--p", "2", "--M", "1", "--iterations", "1500", "--mc-samples", "50000"]);
    let lines: Vec<Value> = stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    let prop1 = &lines[0];
    assert_eq!(prop1["check"], "prop1");
    assert!((prop1["values"]["bound"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-15);
    assert_eq!(prop1["pass"], true);
    let jeffrey = &lines[1];
    assert_eq!(jeffrey["values"]["verdict"], "NotCPD");
    let witness: Vec<f64> = serde_json::from_value(jeffrey["values"]["witness"].clone()).unwrap();
    assert_eq!(witness, vec![-0.4, -0.6, 1.0]);
    assert!((jeffrey["values"]["witness_quadratic_form"].as_f64().unwrap() + 9.548).abs() < 1e-9);
}

#[test]
fn unknown_check_fails() {
    let out = sipsgraph(&["check", "--only", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown check"));
}
