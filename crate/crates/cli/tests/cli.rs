use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chatmine::corpus::{write_jsonl, write_raw_messages};
use chatmine::synth::{balanced_fixture, random_chat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

/// Narrow models so every command finishes in seconds.
const SMALL: &str = "\
[encoder]
dim = 64

[model]
max_epochs = 4
fc_hidden = 8

[model.arch]
conv_widths = [16, 8]
attention_dim = 8

[link]
hidden = [16]

[link_train]
epochs = 2
";

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Workspace {
            dir: tempfile::tempdir().unwrap(),
        };
        fs::write(ws.path("small.toml"), SMALL).unwrap();
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    /// Runs the binary with the small config and a fixed seed.
    fn run(&self, args: &[&str]) -> Output {
        let config = self.arg("small.toml");
        Command::new(env!("CARGO_BIN_EXE_chatmine"))
            .args(args)
            .args(["--config", &config, "--seed", "5"])
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }

    fn write_labeled(&self, name: &str, n: usize) {
        let file = fs::File::create(self.path(name)).unwrap();
        write_jsonl(file, balanced_fixture(n, 2, 3)).unwrap();
    }

    fn write_chat(&self, name: &str, seed: u64) {
        let (inter, _) = random_chat(&mut ChaCha8Rng::seed_from_u64(seed), 4, "room");
        let file = fs::File::create(self.path(name)).unwrap();
        write_raw_messages(file, &inter.log.messages).unwrap();
    }
}

/// The single JSON error line on stderr.
fn error_line(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("an error line on stderr");
    serde_json::from_str(last).unwrap_or_else(|e| panic!("not JSON ({e}): {last}"))
}

fn lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn gradcheck_passes_on_shipped_fragments() {
    let ws = Workspace::new();
    let out = ws.ok(&["gradcheck", "--tol", "1e-4"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let entries = report.as_array().unwrap();
    assert_eq!(entries.len(), 18);
    assert!(entries.iter().all(|e| e["passed"] == true));
}

#[test]
fn impossible_tolerance_is_an_invariant_breach() {
    let ws = Workspace::new();
    let out = ws.run(&["gradcheck", "--tol", "1e-300", "--seeds", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_line(&out)["error"], "contract");
}

#[test]
fn missing_input_is_a_data_failure() {
    let ws = Workspace::new();
    let out = ws.run(&[
        "extract",
        "--input",
        &ws.arg("absent.jsonl"),
        "--issue-ckpt",
        "i.ckpt",
        "--solution-ckpt",
        "s.ckpt",
        "--out",
        &ws.arg("pairs.jsonl"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = error_line(&out);
    assert_eq!(err["error"], "io");
    assert_eq!(err["exit_code"], 3);
    assert!(!ws.path("pairs.jsonl").exists());
}

#[test]
fn bad_flags_exit_2() {
    let ws = Workspace::new();
    for args in [
        vec!["train", "--target", "banana", "--out", "x"],
        vec!["extract", "--input", "a"],
        vec!["frobnicate"],
        vec!["gradcheck", "--jobs", "0"],
        vec!["train", "--target", "issue", "--out", "x"],
    ] {
        let out = ws.run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(error_line(&out)["error"], "usage", "{args:?}");
    }
}

#[test]
fn bad_settings_exit_3() {
    let ws = Workspace::new();
    let out = ws.run(&["gradcheck", "--set", "model.bogus=1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)["error"], "config");
    let out = ws.run(&["gradcheck", "--set", "model.issue_threshold=0.95"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn single_class_training_data_is_rejected() {
    let ws = Workspace::new();
    let chatter: Vec<_> = balanced_fixture(6, 1, 1).into_iter().filter(|r| !r.issue).collect();
    write_jsonl(fs::File::create(ws.path("chatter.jsonl")).unwrap(), chatter).unwrap();
    let out = ws.run(&[
        "train",
        "--target",
        "issue",
        "--input",
        &ws.arg("chatter.jsonl"),
        "--out",
        &ws.arg("i.ckpt"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)["error"], "data");
}

#[test]
fn preprocess_reports_skipped_lines() {
    let ws = Workspace::new();
    fs::write(
        ws.path("raw.jsonl"),
        "{\"time\": 1000, \"id\": \"a\", \"text\": \"hi, npm install fails\"}\nnot json\n\
         {\"time\": 2000, \"id\": \"b\", \"text\": \"which node version?\"}\n",
    )
    .unwrap();
    ws.ok(&[
        "preprocess",
        "--input",
        &ws.arg("raw.jsonl"),
        "--out",
        &ws.arg("utts.jsonl"),
        "--skipped",
        &ws.arg("skipped.jsonl"),
    ]);
    let utts = lines(&ws.path("utts.jsonl"));
    assert_eq!(utts.len(), 2);
    assert_eq!(utts[1]["author_id"], "b");
    let skipped = lines(&ws.path("skipped.jsonl"));
    assert_eq!(skipped.len(), 1);
    assert_eq!(skipped[0]["line_no"], 2);
}

#[test]
fn annotated_link_training_checks_parents() {
    let ws = Workspace::new();
    fs::write(
        ws.path("links.jsonl"),
        "{\"time\": 1000, \"id\": \"a\", \"text\": \"build fails on arm\", \"parent\": null}\n\
         {\"time\": 2000, \"id\": \"b\", \"text\": \"which compiler?\", \"parent\": 0}\n\
         {\"time\": 3000, \"id\": \"c\", \"text\": \"release is out\", \"parent\": null}\n\
         {\"time\": 4000, \"id\": \"a\", \"text\": \"gcc 12\", \"parent\": 1}\n",
    )
    .unwrap();
    ws.ok(&[
        "train",
        "--target",
        "link",
        "--input",
        &ws.arg("links.jsonl"),
        "--out",
        &ws.arg("link.ckpt"),
        "--report",
        &ws.arg("link.json"),
    ]);
    let report: Value = serde_json::from_str(&fs::read_to_string(ws.path("link.json")).unwrap()).unwrap();
    assert_eq!(report["chats"], 1);
    assert_eq!(report["epoch_loss"].as_array().unwrap().len(), 2);

    fs::write(
        ws.path("bad.jsonl"),
        "{\"time\": 1000, \"id\": \"a\", \"text\": \"hello there\", \"parent\": 3}\n",
    )
    .unwrap();
    let out = ws.run(&["train", "--target", "link", "--input", &ws.arg("bad.jsonl"), "--out", &ws.arg("x.ckpt")]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn full_pipeline_is_reproducible() {
    let ws = Workspace::new();
    ws.write_labeled("labeled.jsonl", 12);
    ws.write_chat("chat.jsonl", 21);
    let labeled = ws.arg("labeled.jsonl");
    for (target, ckpt) in [("issue", "i.ckpt"), ("solution", "s.ckpt")] {
        ws.ok(&[
            "train",
            "--target",
            target,
            "--input",
            &labeled,
            "--out",
            &ws.arg(ckpt),
            "--report",
            &ws.arg(&format!("{target}.json")),
        ]);
    }
    let first_issue = fs::read(ws.path("i.ckpt")).unwrap();
    ws.ok(&["train", "--target", "issue", "--input", &labeled, "--out", &ws.arg("i2.ckpt")]);
    assert_eq!(first_issue, fs::read(ws.path("i2.ckpt")).unwrap());
    ws.ok(&["train", "--target", "link", "--synthetic-chats", "4", "--out", &ws.arg("link.ckpt")]);

    ws.ok(&["preprocess", "--input", &ws.arg("chat.jsonl"), "--out", &ws.arg("utts.jsonl")]);
    ws.ok(&[
        "disentangle",
        "--input",
        &ws.arg("utts.jsonl"),
        "--out",
        &ws.arg("dialogs.jsonl"),
        "--link-ckpt",
        &ws.arg("link.ckpt"),
    ]);
    let dialogs = lines(&ws.path("dialogs.jsonl"));
    let utts = lines(&ws.path("utts.jsonl"));
    let mut covered: Vec<u64> = dialogs
        .iter()
        .flat_map(|d| d["member_indexes"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()))
        .collect();
    covered.sort();
    assert_eq!(covered, (0..utts.len() as u64).collect::<Vec<_>>());

    let extract = |out: &str, jobs: &str| {
        ws.ok(&[
            "extract",
            "--input",
            &ws.arg("chat.jsonl"),
            "--issue-ckpt",
            &ws.arg("i.ckpt"),
            "--solution-ckpt",
            &ws.arg("s.ckpt"),
            "--link-ckpt",
            &ws.arg("link.ckpt"),
            "--out",
            &ws.arg(out),
            "--jobs",
            jobs,
            "--set",
            "model.issue_threshold=0.2",
        ]);
        fs::read(ws.path(out)).unwrap()
    };
    let a = extract("pairs_a.jsonl", "1");
    let b = extract("pairs_b.jsonl", "1");
    let c = extract("pairs_c.jsonl", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
    for pair in lines(&ws.path("pairs_a.jsonl")) {
        assert_eq!(pair["community_id"], "chat");
        assert!(pair["p_issue"].as_f64().unwrap() >= 0.2);
    }

    let out = ws.ok(&[
        "eval",
        "--input",
        &labeled,
        "--issue-ckpt",
        &ws.arg("i.ckpt"),
        "--solution-ckpt",
        &ws.arg("s.ckpt"),
    ]);
    let metrics: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(metrics["mode"], "checkpoints");
    let folds = metrics["metrics"]["issue"]["per_fold"].as_object().unwrap();
    assert_eq!(folds.len(), 2);

    // A checkpoint trained for another encoder is refused.
    let out = ws.run(&[
        "extract",
        "--input",
        &ws.arg("chat.jsonl"),
        "--issue-ckpt",
        &ws.arg("i.ckpt"),
        "--solution-ckpt",
        &ws.arg("s.ckpt"),
        "--link-ckpt",
        &ws.arg("link.ckpt"),
        "--out",
        &ws.arg("never.jsonl"),
        "--set",
        "encoder.dim=32",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)["error"], "checkpoint");
}

#[test]
fn cross_project_eval_writes_metrics() {
    let ws = Workspace::new();
    ws.write_labeled("labeled.jsonl", 12);
    ws.ok(&[
        "eval",
        "--input",
        &ws.arg("labeled.jsonl"),
        "--cross-project",
        "--out",
        &ws.arg("metrics.json"),
        "--set",
        "model.max_epochs=2",
    ]);
    let metrics: Value = serde_json::from_str(&fs::read_to_string(ws.path("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["mode"], "cross_project");
    let macro_f1 = metrics["metrics"]["issue"]["macro_average"]["F1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&macro_f1));
    assert_eq!(metrics["training"].as_array().unwrap().len(), 4);
}
