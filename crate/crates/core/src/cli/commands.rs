use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sipsgraph::eval::{auc, reconstruction_auc, score_pairs};
use sipsgraph::generator::split_links;
use sipsgraph::theory::{run_check, CheckOptions, CHECK_NAMES};
use sipsgraph::training::{history_csv, train, TrainOutcome, Validation};
use sipsgraph::{checkpoint, Graph, Model};

use super::config::{Protocol, RunConfig};

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub seed: u64,
    pub auc_val: Option<f64>,
    pub auc_test: f64,
    pub best_iteration: usize,
    pub clamped: u64,
    pub aborted: Option<String>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_sd(xs: &[f64]) -> MeanSd {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    MeanSd { mean, sd }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// One `i v1 ... vK` line per node.
pub fn embeddings_text(model: &Model, graph: &Graph) -> Result<String> {
    let mut s = String::new();
    for (i, z) in model.embeddings(graph)?.iter().enumerate() {
        write!(s, "{i}").unwrap();
        for v in z {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    Ok(s)
}

struct SeedRun {
    result: RunResult,
    outcome: TrainOutcome,
}

fn run_seed(cfg: &RunConfig, graph: &Graph, seed: u64) -> Result<SeedRun> {
    let tc = cfg.train_config(seed)?;
    let eval_seed = cfg.eval.seed.unwrap_or(12345);
    let exhaustive = cfg.eval.exhaustive_negatives.unwrap_or(false);
    match cfg.protocol() {
        Protocol::Split => {
            let split = split_links(
                graph,
                cfg.eval.test_frac.unwrap_or(0.1),
                cfg.eval.val_frac.unwrap_or(0.1),
                cfg.split_mode(),
                seed,
            )?;
            let validation =
                if split.val_pairs.is_empty() { Validation::None } else { Validation::Pairs(split.val_pairs.clone()) };
            let outcome = train(&split.train, &tc, &validation)?;
            // Held-out nodes keep their attributes, so the full graph is used for scoring.
            let auc_test = auc(&score_pairs(&outcome.best, graph, &split.test_pairs)?)?;
            let result = RunResult {
                seed,
                auc_val: outcome.best_auc,
                auc_test,
                best_iteration: outcome.best_iteration,
                clamped: outcome.clamped,
                aborted: outcome.aborted.clone(),
            };
            Ok(SeedRun { result, outcome })
        }
        Protocol::Reconstruction => {
            let validation = Validation::Reconstruction { seed: eval_seed, exhaustive };
            let outcome = train(graph, &tc, &validation)?;
            let auc_test = reconstruction_auc(graph, &outcome.best, eval_seed.wrapping_add(1), exhaustive)?;
            let result = RunResult {
                seed,
                auc_val: outcome.best_auc,
                auc_test,
                best_iteration: outcome.best_iteration,
                clamped: outcome.clamped,
                aborted: outcome.aborted.clone(),
            };
            Ok(SeedRun { result, outcome })
        }
    }
}

/// Trains one model per seed and writes all artifacts under the output directory.
pub fn cmd_train(cfg: RunConfig) -> Result<Vec<RunResult>> {
    let cfg = cfg.resolve()?;
    let graph = cfg.graph()?;
    let out = cfg.output().to_path_buf();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("config.resolved"), cfg.to_toml())?;

    let runs: Vec<SeedRun> = cfg
        .seeds()
        .par_iter()
        .map(|&seed| run_seed(&cfg, &graph, seed).with_context(|| format!("seed {seed}")))
        .collect::<Result<_>>()?;

    let head = cfg.model.head.map_or("", |h| h.as_str());
    let dim = cfg.model.dim.unwrap_or(0);
    let mut metrics = String::from("seed,iteration,objective_estimate,validation_auc,wall_ms\n");
    let mut results = String::from("model,K,seed,auc_val,auc_test\n");
    for run in &runs {
        let r = &run.result;
        let dir = out.join(format!("seed-{}", r.seed));
        fs::create_dir_all(&dir)?;
        let csv = history_csv(&run.outcome.history);
        write(&dir.join("metrics.csv"), &csv)?;
        checkpoint::save(&run.outcome.best, dir.join("checkpoint-best.ckpt"))?;
        write(&dir.join("embeddings.txt"), embeddings_text(&run.outcome.best, &graph)?)?;
        for line in csv.lines().skip(1) {
            writeln!(metrics, "{},{line}", r.seed).unwrap();
        }
        let val = r.auc_val.map_or(String::new(), |v| format!("{v:.6}"));
        writeln!(results, "{head},{dim},{},{val},{:.6}", r.seed, r.auc_test).unwrap();
        if let Some(why) = &r.aborted {
            eprintln!("seed {}: training stopped early: {why}", r.seed);
        }
    }
    write(&out.join("metrics.csv"), metrics)?;
    write(&out.join("results.csv"), results)?;

    let results: Vec<RunResult> = runs.into_iter().map(|r| r.result).collect();
    let tests: Vec<f64> = results.iter().map(|r| r.auc_test).collect();
    let vals: Vec<f64> = results.iter().filter_map(|r| r.auc_val).collect();
    let summary = json!({
        "model": head,
        "K": dim,
        "protocol": cfg.protocol(),
        "runs": results,
        "auc_test": mean_sd(&tests),
        "auc_val": if vals.is_empty() { None } else { Some(mean_sd(&vals)) },
    });
    write(&out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(results)
}

/// Scores a saved checkpoint under the configured protocol.
pub fn cmd_eval(cfg: RunConfig, checkpoint_path: &Path, seed: Option<u64>) -> Result<serde_json::Value> {
    let mut cfg = cfg;
    if cfg.model.head.is_none() {
        // The checkpoint fixes the model; keep resolution from demanding it.
        let m = checkpoint::load(checkpoint_path)?;
        cfg.model.head = Some(m.head.kind());
        cfg.model.dim = Some(m.dim());
    }
    let cfg = cfg.resolve()?;
    let model = checkpoint::load(checkpoint_path)
        .with_context(|| format!("loading checkpoint {}", checkpoint_path.display()))?;
    let graph = cfg.graph()?;
    let seed = seed.unwrap_or(cfg.seeds()[0]);
    let exhaustive = cfg.eval.exhaustive_negatives.unwrap_or(false);
    let value = match cfg.protocol() {
        Protocol::Split => {
            let split = split_links(
                &graph,
                cfg.eval.test_frac.unwrap_or(0.1),
                cfg.eval.val_frac.unwrap_or(0.1),
                cfg.split_mode(),
                seed,
            )?;
            auc(&score_pairs(&model, &graph, &split.test_pairs)?)?
        }
        Protocol::Reconstruction => {
            reconstruction_auc(&graph, &model, cfg.eval.seed.unwrap_or(12345).wrapping_add(1), exhaustive)?
        }
    };
    Ok(json!({ "protocol": cfg.protocol(), "seed": seed, "auc": value }))
}

/// Writes the configured graph to `path`; nothing is written if generation fails.
pub fn cmd_generate(cfg: RunConfig, path: &PathBuf) -> Result<Graph> {
    let cfg = cfg.resolve()?;
    if cfg.graph.generator.is_none() {
        bail!("generate needs --generator");
    }
    let graph = cfg.graph()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    graph.save(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(graph)
}

/// Runs the requested checks, printing one JSON line each. Returns the names of failures.
pub fn cmd_check(opts: &CheckOptions, only: &[String], mut emit: impl FnMut(&str)) -> Result<Vec<String>> {
    let names: Vec<&str> = if only.is_empty() { CHECK_NAMES.to_vec() } else { only.iter().map(String::as_str).collect() };
    for n in &names {
        if !CHECK_NAMES.contains(n) {
            bail!("unknown check {n:?}; known: {}", CHECK_NAMES.join(", "));
        }
    }
    let mut failed = Vec::new();
    for name in names {
        let v = run_check(name, opts)?;
        emit(&serde_json::to_string(&v)?);
        if !v.pass {
            failed.push(name.to_string());
        }
    }
    Ok(failed)
}
