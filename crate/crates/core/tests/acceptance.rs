//! The twelve acceptance criteria. Each prints one `PASS`/`FAIL` line; the
//! process exits non-zero if any criterion fails.
//!
//! `ACCEPTANCE_ONLY=1,9` runs a subset.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use mtgnn::autodiff::Tensor;
use mtgnn::data::{
    apply_override, filter_freesolv, load_bundled_table, load_dataset, make_plan, make_split,
    merge_tasks, parse_dataset, parse_override, select_target_groups, CorrelationMatrix,
    TaskTable, UndefinedPolicy, BUNDLED, DEFAULT_THRESHOLD,
};
use mtgnn::experiments::{run_inference_bench, run_single_vs_multi, run_transfer_all};
use mtgnn::featurize::{batch_graphs, featurize_graph, GraphBatch};
use mtgnn::gnn::{Checkpoint, Model, ModelConfig, ModelKind};
use mtgnn::train::{
    cross_validate, evaluate, featurize_table, masked_loss, rmse, train_fold, PlateauScheduler,
    TrainConfig,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn data_dir() -> std::path::PathBuf {
    data_path("")
}

fn c1_gradients() -> Outcome {
    let (b, target, mask) = gradient_fixture();
    let mut worst = Vec::new();
    for kind in ModelKind::ALL {
        let mut m = Model::new(ModelConfig::new(kind, 2), 21).unwrap();
        jitter(&mut m, 22);
        let errs = gradient_check(&m, &b, &target, &mask, 1e-5, 1);
        let (name, err) = errs
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        worst.push((kind, name, err));
    }
    let ok = worst.iter().all(|w| w.2 < 1e-3);
    let detail = worst
        .iter()
        .map(|(k, n, e)| format!("{k} max rel err {e:.2e} ({n})"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(ok, detail)
}

fn c2_rmse_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..300);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let l = masked_loss(&Tensor::column(&p), &Tensor::column(&t), &vec![true; n]).unwrap();
        worst = worst.max((l - rmse(&p, &t)).abs());
    }
    verdict(worst <= 1e-12, format!("max |masked_loss - rmse| = {worst:.1e} over 100 batches"))
}

fn c3_invariance() -> Outcome {
    let esol = load_dataset(&data_path("esol.csv"), "esol").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let picked: Vec<_> = esol.entries.choose_multiple(&mut rng, 50).collect();
    let mut perm_err: f64 = 0.0;
    let mut batch_err: f64 = 0.0;
    for kind in ModelKind::ALL {
        let mut m = Model::new(ModelConfig::new(kind, 3), 31).unwrap();
        jitter(&mut m, 32);
        let singles: Vec<GraphBatch> = picked.iter().map(|e| featurize_graph(&e.graph)).collect();
        let alone: Vec<Tensor> = singles.iter().map(|b| m.predict(b).unwrap()).collect();
        for (i, e) in picked.iter().enumerate() {
            let order = permutation(e.graph.atoms.len(), i as u64);
            let moved = m.predict(&featurize_graph(&e.graph.permuted(&order))).unwrap();
            perm_err = perm_err.max(alone[i].max_abs_diff(&moved));
        }
        let all = m.predict(&batch_graphs(&singles).unwrap()).unwrap();
        let mut order: Vec<usize> = (0..singles.len()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let parts: Vec<&GraphBatch> = order[..17].iter().map(|&i| &singles[i]).collect();
        let some = m.predict(&batch_graphs(&parts).unwrap()).unwrap();
        for (i, a) in alone.iter().enumerate() {
            for t in 0..3 {
                batch_err = batch_err.max((all.get(i, t) - a.get(0, t)).abs());
            }
        }
        for (row, &i) in order[..17].iter().enumerate() {
            for t in 0..3 {
                batch_err = batch_err.max((some.get(row, t) - alone[i].get(0, t)).abs());
            }
        }
    }
    verdict(
        perm_err < 1e-10 && batch_err < 1e-10,
        format!("50 molecules x 3 models: relabel {perm_err:.1e}, batching {batch_err:.1e}"),
    )
}

fn c4_grouping() -> Outcome {
    let names: Vec<String> = ["esol", "freesolv", "logd74", "logp", "bp", "logvp"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let pairs = [
        ("logd74", "logp", 0.78),
        ("esol", "logp", -0.71),
        ("freesolv", "logvp", 0.62),
        ("logvp", "bp", -0.81),
        ("freesolv", "bp", -0.55),
        ("esol", "logd74", -0.31),
        ("esol", "freesolv", 0.42),
        ("logp", "bp", 0.18),
    ];
    let k = names.len();
    let idx = |n: &str| names.iter().position(|x| x == n).unwrap();
    let mut r = vec![Some(0.1); k * k];
    for i in 0..k {
        r[i * k + i] = Some(1.0);
    }
    for (a, b, v) in pairs {
        r[idx(a) * k + idx(b)] = Some(v);
        r[idx(b) * k + idx(a)] = Some(v);
    }
    let corr = CorrelationMatrix::from_values(names, r);
    let groups = select_target_groups(&corr, DEFAULT_THRESHOLD, UndefinedPolicy::Error).unwrap();
    let text = std::fs::read_to_string(data_path("groups_override.txt")).unwrap();
    let final_groups = apply_override(&groups, &parse_override(&text).unwrap()).unwrap();
    let as_sets = |gs: &[Vec<String>]| -> BTreeSet<BTreeSet<String>> {
        gs.iter().map(|g| g.iter().cloned().collect()).collect()
    };
    let expected: Vec<Vec<String>> = [vec!["logd74", "logp"], vec!["esol", "logp"], vec!["freesolv", "logvp", "bp"]]
        .iter()
        .map(|g| g.iter().map(|s| s.to_string()).collect())
        .collect();
    verdict(
        as_sets(&final_groups) == as_sets(&expected) && final_groups.len() == 3,
        format!("correlation groups {groups:?}, after override {final_groups:?}"),
    )
}

fn c5_esol() -> Outcome {
    let started = Instant::now();
    let table = load_bundled_table(&data_dir(), &["esol"]).unwrap();
    let graphs = featurize_table(&table);
    let config = TrainConfig::default();
    let plan = make_plan(table.len(), config.train_fraction, config.folds, config.seed).unwrap();
    let cv = cross_validate(&table, &graphs, &plan, &ModelConfig::new(ModelKind::Gin, 1), &config)
        .unwrap();
    let (mean, std) = cv.test_rmse("esol").unwrap();
    let minutes = started.elapsed().as_secs_f64() / 60.0;
    let epochs: Vec<usize> = cv.folds.iter().map(|f| f.run.history.len()).collect();
    verdict(
        mean <= 0.90 && minutes < 30.0,
        format!(
            "GIN ESOL 5-fold test RMSE {mean:.3} +/- {std:.3} (bound 0.90), epochs {epochs:?}, {minutes:.1} min"
        ),
    )
}

fn c6_mtl() -> Outcome {
    let table = load_bundled_table(&data_dir(), &["esol", "logp"]).unwrap();
    let group = vec!["esol".to_string(), "logp".to_string()];
    let (_, rows) = run_single_vs_multi(
        &table,
        &group,
        &group[..1],
        ModelKind::Gin,
        &ModelConfig::new(ModelKind::Gin, 2),
        &TrainConfig::default(),
        &[0, 1, 2],
    )
    .unwrap();
    let r = &rows[0];
    let p = r.welch.map(|w| format!("{:.3}", w.p_value)).unwrap_or_default();
    verdict(
        r.first.mean <= r.second.mean + 0.03,
        format!(
            "ESOL with LogP, 3 seeds x 5 folds: multitask {:.3} +/- {:.3}, single {:.3} +/- {:.3}, delta {:+.3}, Welch p {p}",
            r.first.mean, r.first.std, r.second.mean, r.second.std, r.delta
        ),
    )
}

fn c7_freesolv() -> Outcome {
    let fs = load_dataset(&data_path("freesolv.csv"), "freesolv").unwrap();
    let (kept, removed) = filter_freesolv(&fs);
    let below = fs.entries.iter().filter(|e| e.value < -10.0).count();
    let exact = removed == below
        && kept.entries.iter().all(|e| e.value >= -10.0)
        && kept.len() + removed == fs.len();
    if fs.report.rows_read != 642 {
        return if exact {
            Outcome::Skip(format!(
                "removed {removed} rows below -10; file has {} rows, not the 642-row source, count check skipped",
                fs.report.rows_read
            ))
        } else {
            Outcome::Fail(format!("removed {removed}, expected {below}"))
        };
    }
    verdict(
        exact && removed == 29,
        format!("removed {removed} of {} rows (all values < -10); expected 29", fs.report.rows_read),
    )
}

fn quick_train(table: &TaskTable, kind: ModelKind, epochs: usize, seed: u64) -> Model {
    let graphs = featurize_table(table);
    let plan = make_plan(table.len(), 0.8, 5, seed).unwrap();
    let config = TrainConfig {
        max_epochs: epochs,
        seed,
        ..TrainConfig::default()
    };
    let mc = ModelConfig::new(kind, table.task_count());
    let f = &plan.folds[0];
    train_fold(table, &graphs, &f.train, &f.validation, Model::new(mc, seed).unwrap(), &config, seed)
        .unwrap()
        .model
}

fn c8_inference() -> Outcome {
    let tasks: Vec<&str> = BUNDLED.iter().map(|(t, _)| *t).collect();
    let full = load_bundled_table(&data_dir(), &tasks).unwrap();
    let singles: Vec<Model> = tasks
        .iter()
        .map(|t| {
            let table = full.select_tasks(&[t.to_string()]).unwrap();
            quick_train(&table, ModelKind::Gin, 3, 8)
        })
        .collect();
    let multis: Vec<Model> = (3..=6)
        .map(|k| {
            let names: Vec<String> = tasks[..k].iter().map(|s| s.to_string()).collect();
            quick_train(&full.select_tasks(&names).unwrap(), ModelKind::Gin, 3, 8)
        })
        .collect();
    let fs = load_dataset(&data_path("freesolv.csv"), "freesolv").unwrap();
    let molecules: Vec<GraphBatch> = fs.entries.iter().map(|e| featurize_graph(&e.graph)).collect();
    let (_, points) = run_inference_bench(&singles, &multis, &molecules, 10).unwrap();
    let six = points.last().unwrap();
    let counts_ok = points
        .iter()
        .all(|p| p.single_forwards == p.tasks as u64 * p.multi_forwards && p.multi_forwards == 10);
    let trace = points
        .iter()
        .map(|p| format!("K={} {:.0}%", p.tasks, p.speedup_pct))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        counts_ok && six.speedup_pct >= 20.0,
        format!(
            "{} molecules, median of 10: K=6 multitask {:.1} ms vs 6 single {:.1} ms; speedups {trace}; forward counts {}:{} ({})",
            six.molecules,
            six.multi_seconds * 1e3,
            six.single_seconds * 1e3,
            six.single_forwards,
            six.multi_forwards,
            if counts_ok { "K:1 ok" } else { "K:1 broken" }
        ),
    )
}

fn atom_count_table(smiles: &[&str]) -> TaskTable {
    let mut text = String::from("smiles,value\n");
    for s in smiles {
        text.push_str(&format!("{s},{}\n", graph(s).atoms.len()));
    }
    merge_tasks(&[parse_dataset(text.as_bytes(), "atoms").unwrap()]).unwrap()
}

const SYNTHETIC: [&str; 20] = [
    "CC", "CCO", "CCCC", "c1ccccc1", "CCCCCC", "CC(C)O", "CCCCCCCC", "CCN", "c1ccncc1",
    "CC(=O)O", "CCCCCCCCCC", "OCCO", "CC(C)(C)C", "c1ccc2ccccc2c1", "CCCCC", "CCCCCCC", "C1CCCCC1",
    "CCOCC", "CCCCCCCCC", "ClCCCl",
];

fn c9_scheduler() -> Outcome {
    let mut s = PlateauScheduler::new(0.01, 0.5, 40);
    let direct: Vec<f64> = (0..81).map(|_| s.step(1.0)).collect();

    let table = atom_count_table(&SYNTHETIC);
    let graphs = featurize_table(&table);
    let mut model = Model::new(ModelConfig::new(ModelKind::Gin, 1), 9).unwrap();
    model.freeze_where(|_| true);
    let config = TrainConfig {
        max_epochs: 90,
        ..TrainConfig::default()
    };
    let rows: Vec<usize> = (0..20).collect();
    let run = train_fold(&table, &graphs, &rows[..16], &rows[16..], model, &config, 9).unwrap();
    let lr = |e: usize| run.history[e - 1].lr;
    let trace = [lr(1), lr(41), lr(81)];
    let flat = run.history.iter().all(|h| h.val_loss == run.history[0].val_loss);
    verdict(
        trace == [0.01, 0.005, 0.0025] && [direct[0], direct[40], direct[80]] == trace && flat,
        format!("lr at epochs 1/41/81 = {trace:?} (flat validation loss: {flat})"),
    )
}

fn c10_checkpoint() -> Outcome {
    let table = load_bundled_table(&data_dir(), &["esol"]).unwrap();
    let graphs = featurize_table(&table);
    let plan = make_plan(table.len(), 0.8, 5, 10).unwrap();
    let config = TrainConfig {
        max_epochs: 15,
        ..TrainConfig::default()
    };
    let f = &plan.folds[0];
    let model = Model::new(ModelConfig::new(ModelKind::Gain, 1), 10).unwrap();
    let run = train_fold(&table, &graphs, &f.train, &f.validation, model, &config, 10).unwrap();
    let before = evaluate(&run.model, &run.scalers, &table, &graphs, &plan.test).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fold.json");
    Checkpoint::from_model(&run.model, &table.task_names, &run.scalers)
        .save(&path)
        .unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    let model = loaded.to_model().unwrap();
    let after = evaluate(&model, &loaded.scalers, &table, &graphs, &plan.test).unwrap();
    let (a, b) = (before.rmse[0].unwrap(), after.rmse[0].unwrap());
    verdict(
        (a - b).abs() <= 1e-10,
        format!("test RMSE {a} before save, {b} after load (bitwise equal: {})", a.to_bits() == b.to_bits()),
    )
}

/// Alkanes and primary alcohols of 2 to 12 atoms: every test molecule is
/// built from atom environments seen in training.
fn chain_fixture() -> Vec<String> {
    (2..12)
        .flat_map(|n| ["C".repeat(n), format!("{}O", "C".repeat(n - 1))])
        .collect()
}

fn c11_learnability() -> Outcome {
    let started = Instant::now();
    let smiles = chain_fixture();
    let table = atom_count_table(&smiles.iter().map(String::as_str).collect::<Vec<_>>());
    let graphs = featurize_table(&table);
    let config = TrainConfig {
        max_epochs: 200,
        ..TrainConfig::default()
    };
    let (train, test) = make_split(table.len(), config.train_fraction, config.seed).unwrap();
    let mut results = Vec::new();
    for kind in ModelKind::ALL {
        let model = Model::new(ModelConfig::new(kind, 1), config.seed).unwrap();
        let run = train_fold(&table, &graphs, &train, &train, model, &config, config.seed).unwrap();
        let eval = evaluate(&run.model, &run.scalers, &table, &graphs, &test).unwrap();
        results.push((kind, eval.rmse[0].unwrap()));
    }
    let seconds = started.elapsed().as_secs_f64();
    verdict(
        results.iter().all(|r| r.1 < 0.5) && seconds < 120.0,
        format!(
            "atom-count test RMSE {} in {seconds:.0} s",
            results
                .iter()
                .map(|(k, r)| format!("{k} {r:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn c12_transfer() -> Outcome {
    let tasks: Vec<&str> = BUNDLED.iter().map(|(t, _)| *t).collect();
    let table = load_bundled_table(&data_dir(), &tasks).unwrap();
    let config = TrainConfig {
        max_epochs: 5,
        ..TrainConfig::default()
    };
    let (report, results) =
        run_transfer_all(&table, &ModelConfig::new(ModelKind::Gin, 1), &config).unwrap();
    let frozen = results.iter().all(|r| r.frozen_unchanged && r.frozen_parameters > 0);
    let rows = report.files["table4.csv"].lines().count() - 1;
    let covered: BTreeSet<&str> = results.iter().map(|r| r.holdout.as_str()).collect();
    let all = covered.len() == 6 && rows == 6;
    let cells = results
        .iter()
        .map(|r| format!("{} {:.2}/{:.2}", r.holdout, r.transfer.mean, r.single.mean))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        frozen && all,
        format!("6 holdouts, 5-epoch runs, transfer/single RMSE: {cells}; frozen trunk unchanged: {frozen}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("gradient correctness", c1_gradients),
        ("masked loss reduces to RMSE", c2_rmse_reduction),
        ("permutation and batching invariance", c3_invariance),
        ("target grouping", c4_grouping),
        ("ESOL single-task quality", c5_esol),
        ("MTL non-inferiority on Esol/LogP", c6_mtl),
        ("FreeSolv filter", c7_freesolv),
        ("inference speedup", c8_inference),
        ("scheduler contract", c9_scheduler),
        ("checkpoint round-trip", c10_checkpoint),
        ("synthetic learnability", c11_learnability),
        ("transfer-learning harness", c12_transfer),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Skip(d) => ("SKIP", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] criterion {n:>2} {name}: {detail} [{secs:.1}s]");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
