use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ppd_core::agent::{AgentKind, Checkpoint, EpisodeRecord};
use ppd_core::eval::Report;
use ppd_core::graph_env::{PatchLayout, PromptPool, Status};
use ppd_core::image::{Image, Mask};

fn ppd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppd")).args(args).env("PPD_LOG", "quiet").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = ppd(args);
    assert!(out.status.success(), "ppd {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    ppd(args).status.code().unwrap()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

/// A small dataset plus checkpoints from a short training run.
struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new(episodes: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        ok(&["gen-data", "--out", &s(&root.join("data")), "--count", "4", "--seed", "9"]);
        let cfg = format!(r#"{{"train.episodes": {episodes}, "train.batch_size": 16}}"#);
        fs::write(root.join("cfg.json"), cfg).unwrap();
        ok(&["train", "--data", &s(&root.join("data")), "--config", &s(&root.join("cfg.json")), "--out", &s(&root.join("run"))]);
        Self { _dir: dir, root }
    }

    fn p(&self, rel: &str) -> String {
        s(&self.root.join(rel))
    }
}

fn parse_dice(stdout: &str) -> (f64, f64) {
    let field = |name: &str| {
        stdout
            .split_whitespace()
            .find_map(|t| t.strip_prefix(&format!("{name}=")))
            .unwrap()
            .parse::<f64>()
            .unwrap()
    };
    (field("dice_before"), field("dice_after"))
}

#[test]
fn gen_data_file_count_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["gen-data", "--out", &s(d), "--count", "100", "--seed", "7"]);
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 201);
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
    let img = Image::read_ppm(a.join("0.ppm")).unwrap();
    let mask = Mask::read_pgm(a.join("0_mask.pgm")).unwrap();
    assert_eq!((img.width(), mask.height()), (64, 64));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(&dir.path().join("d"));
    assert_eq!(code(&["gen-data", "--out", &out, "--count", "0"]), 2);
    assert_eq!(code(&["gen-data", "--out", &out, "--count", "2", "--size", "8"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);

    ok(&["gen-data", "--out", &out, "--count", "2"]);
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"train.episodes": 1, "train.learning_rate": 0.1}"#).unwrap();
    let res = ppd(&["train", "--data", &out, "--config", &s(&cfg), "--out", &s(&dir.path().join("run"))]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("train.learning_rate"));

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let run = dir.path().join("run0");
    fs::write(&cfg, r#"{"train.episodes": 0}"#).unwrap();
    ok(&["train", "--data", &out, "--config", &s(&cfg), "--out", &s(&run)]);
    let ckpt = |n: &str| s(&run.join(n));
    let report = s(&dir.path().join("r.json"));
    assert_eq!(
        code(&["eval", "--ckpt-att", &ckpt("q_att.json"), "--ckpt-def", &ckpt("q_def.json"), "--data", &s(&empty), "--mode", "fm", "--out", &report]),
        2
    );
}

#[test]
fn untrained_run_writes_initial_networks_and_empty_history() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(&["gen-data", "--out", &s(&root.join("data")), "--count", "2"]);
    fs::write(root.join("cfg.json"), r#"{"train.episodes": 0, "train.seed": 5}"#).unwrap();
    let stdout = ok(&["train", "--data", &s(&root.join("data")), "--config", &s(&root.join("cfg.json")), "--out", &s(&root.join("run"))]);
    assert!(stdout.contains("final 0 episodes"));
    assert_eq!(fs::read_to_string(root.join("run/history.jsonl")).unwrap(), "");
    let att = Checkpoint::from_json(&fs::read_to_string(root.join("run/q_att.json")).unwrap()).unwrap();
    let (q_att, _) = ppd_core::agent::init_networks(5);
    assert_eq!(att.kind, AgentKind::Attack);
    assert_eq!(att.params, q_att);
}

#[test]
fn train_outputs_parse() {
    let f = Fixture::new(3);
    let history = fs::read_to_string(f.p("run/history.jsonl")).unwrap();
    let records: Vec<EpisodeRecord> = history.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 3);
    let def = Checkpoint::from_json(&fs::read_to_string(f.p("run/q_def.json")).unwrap()).unwrap();
    assert_eq!(def.kind, AgentKind::Defense);
    assert_eq!(def.config.episodes, 3);
}

#[test]
fn attack_and_defend_round_trip() {
    let f = Fixture::new(4);
    let (img, mask) = (f.p("data/1.ppm"), f.p("data/1_mask.pgm"));

    let zero = ok(&["attack", "--ckpt", &f.p("run/q_att.json"), "--image", &img, "--mask", &mask, "--steps", "0", "--trace", &f.p("t0.jsonl"), "--out", &f.p("p0.json")]);
    let (before, after) = parse_dice(&zero);
    assert_eq!(before, after);

    let stdout = ok(&["attack", "--ckpt", &f.p("run/q_att.json"), "--image", &img, "--mask", &mask, "--steps", "5", "--trace", &f.p("t.jsonl"), "--out", &f.p("attacked.json")]);
    parse_dice(&stdout);
    assert_eq!(fs::read_to_string(f.p("t.jsonl")).unwrap().lines().count(), 5);
    let layout = PatchLayout::new(64, 64, 8).unwrap();
    let attacked = PromptPool::from_json(&fs::read_to_string(f.p("attacked.json")).unwrap(), &layout).unwrap();
    Mask::read_pgm(f.p("attacked.pgm")).unwrap();

    assert_eq!(
        code(&["attack", "--ckpt", &f.p("run/q_def.json"), "--image", &img, "--mask", &mask, "--steps", "1", "--trace", &f.p("x"), "--out", &f.p("y")]),
        2
    );

    ok(&["defend", "--ckpt", &f.p("run/q_def.json"), "--image", &img, "--prompts", &f.p("attacked.json"), "--budget", "0", "--out", &f.p("same.json")]);
    let same = PromptPool::from_json(&fs::read_to_string(f.p("same.json")).unwrap(), &layout).unwrap();
    assert_eq!(same, attacked);

    let stdout = ok(&["defend", "--ckpt", &f.p("run/q_def.json"), "--image", &img, "--prompts", &f.p("attacked.json"), "--budget", "10", "--threshold", "-1e9", "--mask", &mask, "--out", &f.p("def.json"), "--pred", &f.p("def_mask.pgm")]);
    parse_dice(&stdout);
    let defended = PromptPool::from_json(&fs::read_to_string(f.p("def.json")).unwrap(), &layout).unwrap();
    assert_eq!(attacked.active_count() - defended.active_count(), 10);
    for (a, d) in attacked.prompts.iter().zip(&defended.prompts) {
        assert!(!d.is_active() || a.is_active());
        assert_eq!((a.x, a.y, a.polarity), (d.x, d.y, d.polarity));
    }
    Mask::read_pgm(f.p("def_mask.pgm")).unwrap();

    let mut none = attacked.clone();
    none.set_all(Status::Inactive);
    fs::write(f.p("none.json"), none.to_json().unwrap()).unwrap();
    assert_eq!(
        code(&["defend", "--ckpt", &f.p("run/q_def.json"), "--image", &img, "--prompts", &f.p("none.json"), "--budget", "3", "--out", &f.p("z.json")]),
        2
    );
}

#[test]
fn eval_reports_are_shaped_and_deterministic() {
    let f = Fixture::new(2);
    let args = |mode: &'static str, out: &str| {
        vec![
            "eval".to_string(),
            "--ckpt-att".into(),
            f.p("run/q_att.json"),
            "--ckpt-def".into(),
            f.p("run/q_def.json"),
            "--data".into(),
            f.p("data"),
            "--mode".into(),
            mode.into(),
            "--out".into(),
            f.p(out),
        ]
    };
    let run = |mode, out| {
        let a = args(mode, out);
        ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
        fs::read_to_string(f.p(out)).unwrap()
    };
    let ablation: Report = serde_json::from_str(&run("ablation", "a1.json")).unwrap();
    assert_eq!(ablation.rows.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), ["ideal", "attacked", "defended"]);
    assert!(ablation.rows.iter().all(|r| r.n == 4));
    let fm: Report = serde_json::from_str(&run("fm", "f1.json")).unwrap();
    assert_eq!(fm.rows.len(), 2);
    assert_eq!(fm.rows[0].n, 3);
    assert_eq!(run("ablation", "a2.json"), fs::read_to_string(f.p("a1.json")).unwrap());
    assert_eq!(run("fm", "f2.json"), fs::read_to_string(f.p("f1.json")).unwrap());
}

#[test]
fn quiet_logging_keeps_stderr_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = ppd(&["gen-data", "--out", &s(&dir.path().join("d")), "--count", "1"]);
    assert!(out.status.success());
    assert!(out.stderr.is_empty());
    let loud = Command::new(env!("CARGO_BIN_EXE_ppd"))
        .args(["gen-data", "--out", &s(&dir.path().join("e")), "--count", "1"])
        .env("PPD_LOG", "info")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&loud.stderr).contains("wrote 1 scenes"));
}

#[test]
fn help_documents_config_defaults() {
    let out = ppd(&["train", "--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("train.target_sync_every = 100"));
    assert!(text.contains("eval.fm_defense_budget  = 10"));
}
