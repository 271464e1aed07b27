use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::CommandFactory;
use mtgnn_cli::Cli;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn mtgnn(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtgnn"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("MTGNN_DATA_DIR", data_dir())
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn run_dir(o: &Output) -> PathBuf {
    let text = stdout(o);
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix("results: "))
        .unwrap_or_else(|| panic!("no results line in {text}"));
    PathBuf::from(line)
}

fn metric(file: &Path) -> Vec<(String, f64)> {
    fs::read_to_string(file)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            (cells[0].to_string(), cells[1].parse().unwrap())
        })
        .collect()
}

fn small_dataset(dir: &Path) -> PathBuf {
    let mut text = String::from("smiles,value\n");
    for n in 1..=30 {
        text.push_str(&format!("{},{}\n", "C".repeat(n), n as f64 * 0.5));
    }
    let path = dir.join("chains.csv");
    fs::write(&path, text).unwrap();
    path
}

fn chain_config(dir: &Path) -> PathBuf {
    let data = small_dataset(dir);
    let cfg = format!(
        "tasks = [\"chains\"]\n[datasets]\nchains = {:?}\n[train]\nmax_epochs = 4\n",
        data.display().to_string()
    );
    let path = dir.join("run.toml");
    fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn help_lists_every_flag() {
    let mut root = Cli::command();
    root.build();
    let mut commands = vec![root.clone()];
    commands.extend(root.get_subcommands().cloned());
    for mut cmd in commands {
        let help = cmd.render_long_help().to_string();
        for arg in cmd.get_arguments() {
            if let Some(long) = arg.get_long() {
                assert!(help.contains(&format!("--{long}")), "{} --{long}", cmd.get_name());
            }
            assert!(
                arg.get_help().is_some() || ["help", "version"].contains(&arg.get_id().as_str()),
                "{} {} has no help",
                cmd.get_name(),
                arg.get_id()
            );
        }
    }
    Cli::command().debug_assert();
}

#[test]
fn every_documented_subcommand_exists() {
    let names: Vec<String> = Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect();
    for expected in [
        "select-targets",
        "train",
        "cv",
        "eval",
        "transfer",
        "size-study",
        "bench-inference",
        "export-weights",
        "group-comparison",
    ] {
        assert!(names.iter().any(|n| n == expected), "{expected}");
    }
}

#[test]
fn train_then_eval_reproduces_the_test_metric() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = chain_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let out = mtgnn(&["train", "--config", cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = run_dir(&out);
    for f in ["config.toml", "checkpoint.json", "history.csv", "metrics.csv", "predictions.csv", "split.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let recorded = metric(&dir.join("metrics.csv"));

    let ck = dir.join("checkpoint.json");
    let test = dir.join("test_chains.csv");
    let pair = format!("chains={}", test.display());
    let out = mtgnn(
        &["eval", "--config", cfg, "--checkpoint", ck.to_str().unwrap(), "--dataset", &pair],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let again = metric(&run_dir(&out).join("metrics.csv"));
    assert_eq!(recorded.len(), 1);
    assert_eq!(recorded[0].0, again[0].0);
    assert!((recorded[0].1 - again[0].1).abs() < 1e-10);
}

#[test]
fn reruns_give_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = chain_config(tmp.path());
    let dirs: Vec<PathBuf> = (0..2)
        .map(|i| {
            let out_dir = tmp.path().join(format!("out{i}"));
            let out = mtgnn(&["train", "--config", cfg.to_str().unwrap()], &out_dir);
            assert!(out.status.success());
            run_dir(&out)
        })
        .collect();
    for f in ["checkpoint.json", "metrics.csv", "predictions.csv", "split.json"] {
        assert_eq!(
            fs::read(dirs[0].join(f)).unwrap(),
            fs::read(dirs[1].join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn missing_dataset_exits_with_data_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "tasks = [\"x\"]\n[datasets]\nx = \"/nonexistent/x.csv\"\n").unwrap();
    let out = mtgnn(&["train", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/x.csv"));
}

#[test]
fn bad_config_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[train]\nlearning_rate = 0.1\nepochs = 3\n").unwrap();
    let out = mtgnn(&["train", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = mtgnn(&["train", "--model", "gcn"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = mtgnn(&["train", "--tasks", "melting"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn select_targets_partitions_the_bundled_tasks() {
    let tmp = tempfile::tempdir().unwrap();
    let read_groups = |args: &[&str]| -> Vec<Vec<String>> {
        let out = mtgnn(args, tmp.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(run_dir(&out).join("groups.txt"))
            .unwrap()
            .lines()
            .map(|l| l.split(',').map(String::from).collect())
            .collect()
    };
    let groups = read_groups(&["select-targets", "--skip-undefined"]);
    let mut all: Vec<String> = groups.iter().flatten().cloned().collect();
    all.sort();
    let mut expected: Vec<String> = mtgnn::data::BUNDLED.iter().map(|(t, _)| t.to_string()).collect();
    expected.sort();
    assert_eq!(all, expected);

    let singletons = read_groups(&["select-targets", "--skip-undefined", "--threshold", "1.01"]);
    assert_eq!(singletons.len(), 6);
    assert!(singletons.iter().all(|g| g.len() == 1));
}

#[test]
fn zero_threshold_joins_every_task() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mtgnn(
        &["select-targets", "--tasks", "esol,logp,logd74", "--threshold", "0"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let groups = fs::read_to_string(run_dir(&out).join("groups.txt")).unwrap();
    assert_eq!(groups.lines().count(), 1);
}

#[test]
fn export_weights_writes_histograms() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = chain_config(tmp.path());
    let out = mtgnn(&["train", "--config", cfg.to_str().unwrap()], tmp.path());
    let ck = run_dir(&out).join("checkpoint.json");
    let pair = format!("chains={}", ck.display());
    let out = mtgnn(&["export-weights", "--checkpoint", &pair, "--bins", "10"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let hist = fs::read_to_string(run_dir(&out).join("fig5_chains.csv")).unwrap();
    assert_eq!(hist.lines().count(), 11);
}

#[test]
fn config_template_and_schema_print() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mtgnn(&["config-template"], tmp.path());
    assert!(out.status.success());
    mtgnn_cli::RunConfig::parse(&stdout(&out)).unwrap().validate().unwrap();
    let out = mtgnn(&["feature-schema"], tmp.path());
    let schema: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(schema.is_object());
}

#[test]
fn size_study_emits_one_row_per_fraction() {
    let tmp = tempfile::tempdir().unwrap();
    let mut target = String::from("smiles,value\n");
    let mut companion = String::from("smiles,value\n");
    for n in 1..=40 {
        target.push_str(&format!("{},{}\n", "C".repeat(n), n));
        companion.push_str(&format!("{}O,{}\n", "C".repeat(n), -(n as f64)));
    }
    fs::write(tmp.path().join("t.csv"), target).unwrap();
    fs::write(tmp.path().join("c.csv"), companion).unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "[datasets]\nt = {:?}\nc = {:?}\n[train]\nmax_epochs = 2\n[experiment]\ntarget = \"t\"\ncompanions = [\"c\"]\n",
            tmp.path().join("t.csv").display().to_string(),
            tmp.path().join("c.csv").display().to_string()
        ),
    )
    .unwrap();
    let out = mtgnn(
        &["size-study", "--config", cfg.to_str().unwrap(), "--tasks", "t,c"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = run_dir(&out);
    let fig = fs::read_to_string(dir.join("fig4a.csv")).unwrap();
    assert_eq!(fig.lines().count(), 9);
    assert!(dir.join("report.json").exists());
}

#[test]
fn config_corpus_seeds_never_panic() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/config_toml");
    let mut valid = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        if let Ok(cfg) = mtgnn_cli::RunConfig::parse(&text) {
            if cfg.validate().is_ok() {
                valid += 1;
            }
        }
    }
    assert!(valid > 0);
}
