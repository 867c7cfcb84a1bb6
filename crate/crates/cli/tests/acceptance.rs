//! End-to-end acceptance checks. Each criterion prints one line:
//! `[PASS]`, `[FAIL]` or `[SKIP]`, followed by the measured quantity and the
//! pinned tolerance.
//!
//! Correctness criteria (structure, conservation, transport, gradients,
//! permutation invariance, determinism) fail the test when red. The
//! accuracy-reproduction criteria on real data are statistical; they are
//! reported but only fail the test when `OTCOARSEN_STRICT_ACCEPTANCE=1`.
//!
//! `OTCOARSEN_ACCEPTANCE_ONLY=3,5` restricts the run to the listed criteria.

use std::path::{Path, PathBuf};
use std::process::Command;

use otcoarsen::coarsen::{check_corollary1, check_theorem1, coarsen_graph};
use otcoarsen::data::{build_features, parse_tu_dataset, FeatureSpec};
use otcoarsen::generate::{connected_erdos_renyi, random_features};
use otcoarsen::graph::{permute, Graph};
use otcoarsen::ot::{entropy, lp_exact_ot, sinkhorn_k_steps, TransportProblem};
use otcoarsen::tensor::{Matrix, Tape};
use otcoarsen::train::{cross_validate, forward_pass, gradient_check, loss, ModelParams, TrainConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Criterion {
    id: u32,
    title: &'static str,
    hard: bool,
    run: fn() -> Verdict,
}

fn data_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn load(name: &str) -> Option<Vec<Graph<f64>>> {
    let dir = data_dir(name);
    if !dir.is_dir() {
        return None;
    }
    let raw = parse_tu_dataset(&dir, name).expect("dataset parses");
    Some(build_features(&raw, FeatureSpec::default_for(&raw)).expect("features build"))
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn mutag_accuracy() -> Verdict {
    let Some(graphs) = load("MUTAG") else {
        return Verdict::Skip("data/MUTAG not present".into());
    };
    let mut best = f64::NEG_INFINITY;
    let mut points = Vec::new();
    for levels in [1, 2] {
        for lr in [0.01, 0.001] {
            let cfg = TrainConfig {
                levels,
                lr,
                gamma: 1.0,
                k: 5,
                ..TrainConfig::default()
            };
            let report = cross_validate(&graphs, &cfg).expect("cross-validation runs").report;
            points.push(format!("L={levels},lr={lr}: {:.4}±{:.4}", report.mean, report.std));
            best = best.max(report.mean);
        }
    }
    verdict(best >= 0.80, format!("best mean {best:.4} (need >= 0.80) [{}]", points.join("; ")))
}

fn proteins_accuracy() -> Verdict {
    let Some(graphs) = load("PROTEINS") else {
        return Verdict::Skip("data/PROTEINS not present (optional)".into());
    };
    let report = cross_validate(&graphs, &TrainConfig::default()).expect("cross-validation runs").report;
    verdict(report.mean >= 0.70, format!("mean {:.4} (need >= 0.70)", report.mean))
}

fn subsample_smoke() -> Verdict {
    let present: Vec<&str> = ["NCI109", "DD", "IMDB-BINARY", "IMDB-MULTI"]
        .into_iter()
        .filter(|n| data_dir(n).is_dir())
        .collect();
    if present.is_empty() {
        return Verdict::Skip("none of NCI109/DD/IMDB-BINARY/IMDB-MULTI present".into());
    }
    for name in &present {
        let out = tempfile::tempdir().unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_otcoarsen"))
            .args(["train", "--subsample", "0.1", "--max-epochs", "20", "--dataset"])
            .arg(data_dir(name))
            .arg("--out")
            .arg(out.path())
            .status()
            .unwrap();
        // running end-to-end is a hard requirement, unlike the accuracy bound
        assert!(status.success(), "{name}: 10% subsample train exited with {status}");
    }
    Verdict::Pass(format!("ran 10% subsample of {}", present.join(", ")))
}

fn other_datasets() -> Verdict {
    let parts = [proteins_accuracy(), subsample_smoke()];
    let text: Vec<String> = parts
        .iter()
        .map(|v| match v {
            Verdict::Pass(d) => format!("pass: {d}"),
            Verdict::Fail(d) => format!("fail: {d}"),
            Verdict::Skip(d) => format!("skip: {d}"),
        })
        .collect();
    let detail = text.join("; ");
    if parts.iter().any(|v| matches!(v, Verdict::Fail(_))) {
        Verdict::Fail(detail)
    } else if parts.iter().all(|v| matches!(v, Verdict::Skip(_))) {
        Verdict::Skip(detail)
    } else {
        Verdict::Pass(detail)
    }
}

fn er_corpus() -> Vec<(Graph<f64>, Matrix<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..100)
        .map(|_| {
            let n = rng.gen_range(6..=30);
            let g = connected_erdos_renyi(n, 0.3, 4, &mut rng);
            let w = random_features(4, 1, &mut rng);
            (g, w)
        })
        .collect()
}

fn structure() -> Verdict {
    let (mut cor, mut thm) = (0, 0);
    for (g, w) in er_corpus() {
        let level = coarsen_graph(&g, &w, 0.5).unwrap();
        cor += check_corollary1(&g, &level).unwrap().len();
        thm += check_theorem1(g.adjacency(), &level.s, &level.a_c).unwrap().len();
    }
    verdict(cor == 0 && thm == 0, format!("{cor} hop-distance and {thm} aggregation-set violations over 100 graphs (need 0)"))
}

fn conservation() -> Verdict {
    let (mut worst, mut checked) = (0.0f64, 0);
    for (g, w) in er_corpus() {
        let level = coarsen_graph(&g, &w, 0.5).unwrap();
        let zero_row = (0..level.s.rows()).any(|i| level.s.row(i).iter().all(|&x| x == 0.0));
        if zero_row {
            continue;
        }
        let before: f64 = g.adjacency().entries().iter().map(|e| e.2).sum();
        let after: f64 = level.a_c.entries().iter().map(|e| e.2).sum();
        worst = worst.max((after - before).abs() / before);
        checked += 1;
    }
    verdict(worst <= 1e-9 && checked > 0, format!("max relative drift {worst:.2e} over {checked} graphs (need <= 1e-9)"))
}

fn sinkhorn() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut col_err, mut gap, mut ent_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let (n, m) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let cost = Matrix::from_fn(n, m, |_, _| rng.gen_range(0.0..1.0));
        let plan = |gamma: f64, k: usize| {
            let tape = Tape::new();
            let c = tape.constant(cost.clone());
            let problem = TransportProblem::uniform(&tape, c, gamma, k).unwrap();
            let p = sinkhorn_k_steps(&tape, &problem).unwrap();
            tape.value(p.plan)
        };
        for k in 1..=30 {
            let p = plan(1.0, k);
            for s in p.col_sums() {
                col_err = col_err.max((s - 1.0 / m as f64).abs());
            }
        }
        let p = plan(0.01, 2000);
        for s in p.col_sums() {
            col_err = col_err.max((s - 1.0 / m as f64).abs());
        }
        let transport: f64 = p.as_slice().iter().zip(cost.as_slice()).map(|(a, b)| a * b).sum();
        let (_, exact) = lp_exact_ot(&cost, &vec![1.0 / n as f64; n], &vec![1.0 / m as f64; m]).unwrap();
        gap = gap.max((transport - exact).abs());

        let tape = Tape::new();
        let uniform = tape.constant(Matrix::filled(n, m, 1.0 / (n * m) as f64));
        let e = tape.scalar(entropy(&tape, uniform).unwrap());
        ent_err = ent_err.max((e - (((n * m) as f64).ln() + 1.0)).abs());
    }
    verdict(
        col_err <= 1e-12 && gap <= 5e-3 && ent_err <= 1e-12,
        format!(
            "column marginal error {col_err:.1e} (<= 1e-12), |<P,M> - LP| {gap:.2e} (<= 5e-3), entropy error {ent_err:.1e} (<= 1e-12)"
        ),
    )
}

fn gradients() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let g: Graph<f64> = connected_erdos_renyi(6, 0.4, 3, &mut rng);
        let cfg = TrainConfig {
            levels: 1 + i % 2,
            k: [1, 3][(i / 2) % 2],
            hidden: 4,
            ..TrainConfig::default()
        };
        let params = ModelParams::init(3, &cfg, &mut rng);
        worst = worst.max(gradient_check(&g, &params, &cfg, 1e-5).unwrap());
    }
    verdict(worst <= 1e-4, format!("max relative error {worst:.2e} over 20 graphs (need <= 1e-4)"))
}

fn min_alpha_gap(g: &Graph<f64>, params: &ModelParams<f64>, cfg: &TrainConfig) -> f64 {
    let out = forward_pass(g, params, cfg).unwrap();
    let mut gap = f64::INFINITY;
    for level in &out.levels {
        let mut a = level.alpha.as_slice().to_vec();
        a.sort_by(f64::total_cmp);
        for w in a.windows(2) {
            gap = gap.min(w[1] - w[0]);
        }
    }
    gap
}

fn permutation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let n = rng.gen_range(6..=20);
        let cfg = TrainConfig {
            levels: 1 + i % 2,
            hidden: 8,
            ..TrainConfig::default()
        };
        let params = ModelParams::init(3, &cfg, &mut rng);
        // Perturb features until every level has clearly distinct scores.
        // Nodes with identical closed neighbourhoods score identically for
        // any features, so such graphs are redrawn.
        let g = 'draw: loop {
            let base: Graph<f64> = connected_erdos_renyi(n, 0.3, 3, &mut rng);
            for _ in 0..5 {
                let f = random_features(n, 3, &mut rng);
                let g = Graph::new(base.adjacency().clone(), f, None).unwrap();
                if min_alpha_gap(&g, &params, &cfg) > 1e-6 {
                    break 'draw g;
                }
            }
        };
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let a = loss(&g, &params, &cfg).unwrap();
        let b = loss(&permute(&g, &perm).unwrap(), &params, &cfg).unwrap();
        worst = worst.max((a - b).abs());
    }
    verdict(worst <= 1e-8, format!("max loss difference {worst:.2e} over 20 graphs (need <= 1e-8)"))
}

fn sweep_spread() -> Verdict {
    let dir = data_dir("MUTAG");
    if !dir.is_dir() {
        return Verdict::Skip("data/MUTAG not present".into());
    }
    let out = tempfile::tempdir().unwrap();
    let csv_path = out.path().join("sweep.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_otcoarsen"))
        .args(["sweep", "--gammas", "0.1,1,10", "--ks", "2,5,10", "--dataset"])
        .arg(&dir)
        .arg("--out")
        .arg(&csv_path)
        .output()
        .unwrap();
    if !status.status.success() {
        return Verdict::Fail(format!("sweep failed: {}", String::from_utf8_lossy(&status.stderr)));
    }
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let rows: Vec<(f64, usize, f64)> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap())
        })
        .collect();
    let mut spreads = Vec::new();
    for gamma in [0.1, 1.0, 10.0] {
        let acc: Vec<f64> = rows.iter().filter(|r| r.0 == gamma).map(|r| r.2).collect();
        let spread = acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - acc.iter().cloned().fold(f64::INFINITY, f64::min);
        spreads.push((gamma, acc.len(), spread));
    }
    let ok = rows.len() == 9 && spreads.iter().all(|&(_, len, s)| len == 3 && s <= 0.08);
    let detail = spreads
        .iter()
        .map(|(g, _, s)| format!("gamma={g}: {s:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(ok, format!("accuracy spread across k {detail} (need <= 0.08 each)"))
}

fn determinism() -> Verdict {
    let dir = data_dir("MUTAG");
    if !dir.is_dir() {
        return Verdict::Skip("data/MUTAG not present".into());
    }
    let run = || {
        let out = tempfile::tempdir().unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_otcoarsen"))
            .args(["train", "--seed", "7", "--max-epochs", "20", "--dataset"])
            .arg(&dir)
            .arg("--out")
            .arg(out.path())
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.path().join("metrics.json")).unwrap()
    };
    let (a, b) = (run(), run());
    verdict(a == b, format!("metrics files {} ({} bytes)", if a == b { "identical" } else { "differ" }, a.len()))
}

fn main() {
    let criteria = [
        Criterion { id: 1, title: "MUTAG 10-fold accuracy", hard: false, run: mutag_accuracy },
        Criterion { id: 2, title: "PROTEINS accuracy and 10% subsample runs", hard: false, run: other_datasets },
        Criterion { id: 3, title: "structure preservation", hard: true, run: structure },
        Criterion { id: 4, title: "edge-weight conservation", hard: true, run: conservation },
        Criterion { id: 5, title: "Sinkhorn correctness", hard: true, run: sinkhorn },
        Criterion { id: 6, title: "end-to-end gradient", hard: true, run: gradients },
        Criterion { id: 7, title: "permutation invariance", hard: true, run: permutation },
        Criterion { id: 8, title: "gamma/k sensitivity sweep", hard: false, run: sweep_spread },
        Criterion { id: 9, title: "train determinism", hard: true, run: determinism },
    ];
    let strict = std::env::var("OTCOARSEN_STRICT_ACCEPTANCE").is_ok_and(|v| v == "1");
    let only: Option<Vec<u32>> = std::env::var("OTCOARSEN_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for c in criteria.iter().filter(|c| only.as_ref().is_none_or(|o| o.contains(&c.id))) {
        let (tag, detail) = match (c.run)() {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Skip(d) => ("SKIP", d),
            Verdict::Fail(d) => {
                if c.hard || strict {
                    failed.push(c.id);
                }
                ("FAIL", d)
            }
        };
        println!("[{tag}] criterion {}: {} — {detail}", c.id, c.title);
    }
    if !failed.is_empty() {
        eprintln!("gated acceptance criteria failed: {failed:?}");
        std::process::exit(1);
    }
}
