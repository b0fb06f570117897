use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use circuitflow::circuit::fixtures::example_circuit;
use circuitflow::io::{save_circuit, save_dataset, CircuitFormat};
use circuitflow::structures::PlantedTree;
use circuitflow::RngSeed;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_circuitflow"));
    c.env_remove("CIRCUITFLOW_THREADS").env_remove("RUST_LOG");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn circuitflow")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn value(stdout: &str, key: &str) -> f64 {
    let line =
        stdout.lines().find(|l| l.starts_with(&format!("{key} = "))).unwrap_or_else(|| panic!("{key} in {stdout}"));
    line.split(" = ").nth(1).unwrap().parse().unwrap()
}

/// Temp dir holding planted train/valid splits and the worked-example circuit.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let tree = PlantedTree::random(5, 2, 4.0, RngSeed(3));
    save_dataset(&tree.sample(400, RngSeed(4)), &dir.path().join("train.csv")).unwrap();
    save_dataset(&tree.sample(100, RngSeed(5)), &dir.path().join("valid.csv")).unwrap();
    save_circuit(&example_circuit(), &dir.path().join("example.pc"), CircuitFormat::Text).unwrap();
    fs::write(dir.path().join("example.csv"), "2,2,2,2\n0,1,0,1\n").unwrap();
    dir
}

fn read(p: PathBuf) -> Vec<u8> {
    fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn eval_prints_mean_ll_and_bpd() {
    let w = workspace();
    let out = ok(w.path(), &["eval", "--model", "example.pc", "--data", "example.csv"]);
    let ll = value(&out, "meanLL");
    assert!((ll.exp() - 0.12006).abs() < 1e-12, "{out}");
    let bpd = value(&out, "bpd");
    assert!((bpd - (-ll / std::f64::consts::LN_2 / 4.0)).abs() < 1e-12);
}

#[test]
fn validate_lists_violations_on_corrupt_model() {
    let w = workspace();
    assert!(ok(w.path(), &["validate", "--model", "example.pc"]).starts_with("valid"));
    let text = fs::read_to_string(w.path().join("example.pc")).unwrap();
    // duplicate a child of the root
    let bad: String = text
        .lines()
        .map(
            |l| if l.starts_with("14 sum") { l.replacen("children=12,13", "children=12,12", 1) } else { l.to_string() },
        )
        .collect::<Vec<_>>()
        .join("\n");
    assert_ne!(bad, text, "fixture line format changed");
    fs::write(w.path().join("bad.pc"), bad).unwrap();
    let out = run(w.path(), &["validate", "--model", "bad.pc"]);
    assert!(!out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("invalid:"), "{stdout}");
    assert!(stdout.lines().count() >= 2);
}

#[test]
fn usage_and_input_errors_exit_nonzero() {
    let w = workspace();
    let unknown = run(w.path(), &["eval", "--model", "example.pc", "--bogus"]);
    assert!(!unknown.status.success());
    let missing = run(w.path(), &["eval", "--model", "nope.pc", "--data", "example.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error: loading model nope.pc"));
    let no_data = run(w.path(), &["prune", "--model", "example.pc", "--fraction", "0.5"]);
    assert!(!no_data.status.success());
    fs::write(w.path().join("bad.toml"), "seed = 1\n[data]\ntrain = \"train.csv\"\n[compress]\nstep_fraction = 2.0\n")
        .unwrap();
    let contradiction = run(w.path(), &["compress", "--model", "example.pc", "--config", "bad.toml"]);
    assert!(!contradiction.status.success());
    assert!(String::from_utf8_lossy(&contradiction.stderr).contains("step_fraction"));
}

#[test]
fn prune_grow_and_histogram_on_the_example() {
    let w = workspace();
    let out =
        ok(w.path(), &["prune", "--model", "example.pc", "--heuristic", "param", "--fraction", "0.2", "--out", "p"]);
    assert_eq!(value(&out, "edges_after"), 5.0);
    let ev = ok(w.path(), &["eval", "--model", "p/model.pc", "--data", "example.csv"]);
    assert!((value(&ev, "meanLL").exp() - 0.114).abs() < 5e-4);
    let out = ok(
        w.path(),
        &[
            "prune",
            "--model",
            "example.pc",
            "--fraction",
            "0.2",
            "--dataset",
            "example.csv",
            "--report-bounds",
            "--out",
            "f",
        ],
    );
    assert_eq!(value(&out, "edges_after"), 5.0);
    let report = fs::read_to_string(w.path().join("f/prune_report.txt")).unwrap();
    assert!(report.contains("heuristic = flow"));
    let ev = ok(w.path(), &["eval", "--model", "f/model.pc", "--data", "example.csv"]);
    assert!((value(&ev, "meanLL").exp() - 0.147).abs() < 5e-4);
    let out = ok(w.path(), &["grow", "--model", "f/model.pc", "--seed", "2", "--out", "g"]);
    assert!(value(&out, "edges_after") > 5.0);
    let hist = ok(w.path(), &["histogram", "--model", "example.pc", "--bins", "10"]);
    let counts: Vec<&str> = hist.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(counts, ["0", "1", "1", "0", "1", "0", "1", "0", "1", "1"]);
}

#[test]
fn every_output_directory_has_a_manifest() {
    let w = workspace();
    let runs: [&[&str]; 6] = [
        &["build-hclt", "--data", "train.csv", "--hidden", "2", "--out", "a"],
        &["train", "--model", "a/model.pc", "--data", "train.csv", "--epochs", "2", "--out", "b"],
        &["grow", "--model", "a/model.pc", "--out", "c"],
        &["sample", "--model", "a/model.pc", "--count", "10", "--out", "d"],
        &["histogram", "--model", "a/model.pc", "--out", "e"],
        &["eval", "--model", "a/model.pc", "--data", "valid.csv", "--out", "f"],
    ];
    for (args, dir) in runs.iter().zip(["a", "b", "c", "d", "e", "f"]) {
        ok(w.path(), args);
        let m = fs::read_to_string(w.path().join(dir).join("manifest.toml")).unwrap();
        let parsed: toml::Table = m.parse().unwrap();
        assert_eq!(parsed["command"].as_str(), Some(args[0]));
        assert!(parsed.contains_key("versions"));
    }
    let tree = fs::read_to_string(w.path().join("a/tree.txt")).unwrap();
    assert!(tree.starts_with("# root 0"));
}

fn config_text(seed: u64) -> String {
    format!(
        "seed = {seed}\noutput_dir = \"run\"\n[data]\ntrain = \"train.csv\"\nvalid = \"valid.csv\"\n\
         [structure]\nhidden_states = 3\n[em]\nbatch_size = 100\n\
         schedule = [{{ alpha_start = 1.0, alpha_end = 0.3, epochs = 3 }}]\n\
         [loop]\nmax_iterations = 3\npatience = 3\n"
    )
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let w = workspace();
    fs::write(w.path().join("exp.toml"), config_text(11)).unwrap();
    let mut outputs = Vec::new();
    for (threads, dir) in [("1", "r1"), ("4", "r2"), ("4", "r3")] {
        let out = bin()
            .current_dir(w.path())
            .env("CIRCUITFLOW_THREADS", threads)
            .args(["spgrow", "--config", "exp.toml", "--format", "binary", "--out", dir])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let d = w.path().join(dir);
        outputs.push((read(d.join("model.pcb")), read(d.join("train_log.csv")), out.stdout));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
    let other = ok(w.path(), &["spgrow", "--config", "exp.toml", "--seed", "12", "--format", "binary", "--out", "r4"]);
    assert_ne!(read(w.path().join("r4/model.pcb")), outputs[0].0, "{other}");
}

#[test]
fn spgrow_log_improves_on_the_initial_structure() {
    let w = workspace();
    fs::write(w.path().join("exp.toml"), config_text(5)).unwrap();
    ok(w.path(), &["spgrow", "--config", "exp.toml"]);
    let log = fs::read_to_string(w.path().join("run/train_log.csv")).unwrap();
    let rows: Vec<Vec<&str>> = log.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][2], "init");
    let bpd = |r: &Vec<&str>| r[5].parse::<f64>().unwrap();
    // last finetune epoch of each iteration
    let mut ends = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let next_is_new = rows.get(i + 1).is_none_or(|n| n[1] != r[1]);
        if r[2] == "finetune" && next_is_new {
            ends.push(bpd(r));
        }
    }
    assert_eq!(ends.len(), 3);
    assert!(ends[0] < bpd(&rows[0]));
    let manifest = fs::read_to_string(w.path().join("run/manifest.toml")).unwrap();
    assert!(manifest.contains("[experiment.loop]"));
}

#[test]
fn train_from_config_builds_and_reports_splits() {
    let w = workspace();
    fs::write(w.path().join("exp.toml"), config_text(8)).unwrap();
    let out = ok(w.path(), &["train", "--config", "exp.toml", "--out", "t", "--timings"]);
    assert!(value(&out, "valid_meanLL") < 0.0);
    let log = fs::read_to_string(w.path().join("t/train_log.csv")).unwrap();
    assert!(log.lines().next().unwrap().ends_with(",wall_secs"));
    assert_eq!(log.lines().count(), 1 + 1 + 3);
}

#[test]
fn compress_keeps_likelihood_within_budget() {
    let w = workspace();
    ok(
        w.path(),
        &["train", "--data", "train.csv", "--hidden", "4", "--epochs", "10", "--batch-size", "400", "--out", "t"],
    );
    let out = ok(
        w.path(),
        &[
            "compress",
            "--model",
            "t/model.pc",
            "--data",
            "train.csv",
            "--epochs",
            "3",
            "--budget",
            "0.01",
            "--out",
            "c",
        ],
    );
    let init = value(&out, "initial_train_meanLL");
    let fin = value(&out, "final_train_meanLL");
    assert!(fin >= init - 0.01 * init.abs() - 1e-9);
    assert!(value(&out, "compression_rate") >= 0.0);
    ok(w.path(), &["validate", "--model", "c/model.pc"]);
}

#[test]
fn bad_thread_count_is_rejected() {
    let w = workspace();
    let out = bin()
        .current_dir(w.path())
        .env("CIRCUITFLOW_THREADS", "many")
        .args(["validate", "--model", "example.pc"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("CIRCUITFLOW_THREADS"));
}
