use std::path::Path;
use std::process::{Command, Output};

const TINY_TRAIN: &str = r#"
version = 1
checkpoint = "model.ckpt"
history = "history.csv"

[training_set]
scenes = 2
phases = 2
phase_frames = 4

[train]
epochs = 3
itc = 1
d_k = 4
d_v = 4
"#;

const EXPERIMENT: &str = r#"
version = 1
checkpoint = "model.ckpt"
out_dir = "out"

[scenario]
version = 1
seed = 3
frames = 6

[[scenario.agents]]
id = 0
pose = [0.0, 0.0, 0.0]

[[scenario.agents]]
id = 1
pose = [8.0, 0.0, 0.0]

[[scenario.phases]]
start_frame = 0
dynamic_objects = 0

[[scenario.phases]]
start_frame = 3
dynamic_objects = 4
"#;

fn coopertrim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coopertrim")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_tiny(dir: &Path) {
    std::fs::write(dir.join("train.toml"), TINY_TRAIN).unwrap();
    let out = coopertrim(&["train", "--config", path(&dir.join("train.toml"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("model.ckpt").exists());
    let history = std::fs::read_to_string(dir.join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,task_loss,fraction_selected,lambda,epsilon_draws_full\n"));
    assert_eq!(history.lines().count(), 4);
}

#[test]
fn train_then_every_experiment() {
    let dir = tempfile::tempdir().unwrap();
    train_tiny(dir.path());
    let cfg = dir.path().join("experiment.toml");
    std::fs::write(&cfg, EXPERIMENT).unwrap();
    for name in ["adaptation", "loss_sweep", "latency_sweep", "compression_sweep"] {
        let out = coopertrim(&["experiment", name, "--config", path(&cfg)]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let frames = std::fs::read_to_string(dir.path().join(format!("out/{name}.csv"))).unwrap();
        assert!(frames.starts_with(
            "leg,frame_id,complexity,fraction_selected,bandwidth_mbps,iou_dynamic,iou_static,loss_events,latency_frames,payload_bytes\n"
        ));
        let summary = std::fs::read_to_string(dir.path().join(format!("out/{name}_summary.csv"))).unwrap();
        assert!(summary.starts_with("metric,value\n"));
    }
}

#[test]
fn run_writes_frames_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    train_tiny(dir.path());
    let scenario = dir.path().join("scenario.toml");
    std::fs::write(&scenario, "version = 1\nframes = 5\n").unwrap();
    let out_dir = dir.path().join("run");
    let out = coopertrim(&[
        "run",
        "--scenario",
        path(&scenario),
        "--checkpoint",
        path(&dir.path().join("model.ckpt")),
        "--out",
        path(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let frames = std::fs::read_to_string(out_dir.join("frames.csv")).unwrap();
    // header, five frames, one aggregate row
    assert_eq!(frames.lines().count(), 7);
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.contains("\nspearman,"));
}

#[test]
fn missing_checkpoint_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("experiment.toml");
    std::fs::write(&cfg, EXPERIMENT).unwrap();
    let out = coopertrim(&["experiment", "adaptation", "--config", path(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint not found"));
}

#[test]
fn bad_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("train.toml");
    std::fs::write(&cfg, "[train]\nepochs = 1\n").unwrap();
    let out = coopertrim(&["train", "--config", path(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
    let out = coopertrim(&["experiment", "nonsense", "--config", path(&cfg)]);
    assert!(!out.status.success());
}

#[test]
fn verify_passes() {
    let out = coopertrim(&["verify"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}
