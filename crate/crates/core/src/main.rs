use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coopertrim::harness::config::{self, ExperimentFile, TrainFile};
use coopertrim::harness::episode::{run_episode, EpisodeConfig};
use coopertrim::harness::experiment::{run_experiment, write_leg, ExperimentKind, FRAME_CSV_HEADER, SUMMARY_CSV_HEADER};
use coopertrim::harness::metrics::{adaptation_correlation, format_optional};
use coopertrim::harness::scenario::{build_scenario, ScenarioConfig};
use coopertrim::training::checkpoint::Checkpoint;
use coopertrim::training::trainer::{epoch_csv, train};
use coopertrim::{verify, Result};

#[derive(Parser)]
#[command(name = "coopertrim", version, about = "Uncertainty-driven feature selection for cooperative perception")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay one scenario with a trained checkpoint and write per-frame metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a generated scene set and write a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one sweep: adaptation, loss_sweep, latency_sweep or compression_sweep.
    Experiment {
        name: ExperimentKind,
        #[arg(long)]
        config: PathBuf,
    },
    /// Gradient, Monte Carlo, quantile and wire self-checks.
    Verify,
}

fn run(scenario: &Path, checkpoint: &Path, out: &Path) -> Result<()> {
    let cfg: ScenarioConfig = config::load(scenario)?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let s = build_scenario(&cfg)?;
    let m = run_episode(&s, &ckpt.model, &EpisodeConfig::default())?;
    std::fs::create_dir_all(out)?;
    let mut frames = format!("{FRAME_CSV_HEADER}\n");
    write_leg(&mut frames, "run", &m, &s.complexity_schedule);
    std::fs::write(out.join("frames.csv"), frames)?;
    let corr = format_optional(adaptation_correlation(&m, &s.complexity_schedule)?);
    let summary = format!(
        "{SUMMARY_CSV_HEADER}\nspearman,{corr}\nmean_fraction,{}\nmean_bandwidth_mbps,{}\naggregate_iou,{}\npayload_bytes,{}\n",
        m.mean_fraction(),
        m.mean_bandwidth(),
        m.aggregate_iou(),
        m.total_payload_bytes()
    );
    std::fs::write(out.join("summary.csv"), summary)?;
    println!(
        "{} frames, mean fraction {:.4}, mean bandwidth {:.3} Mbps, IoU {:.4}, spearman {corr}",
        m.rows.len(),
        m.mean_fraction(),
        m.mean_bandwidth(),
        m.aggregate_iou()
    );
    Ok(())
}

fn train_cmd(path: &Path) -> Result<()> {
    let file: TrainFile = config::load(path)?;
    let scenes = file.training_set.training_scenes()?;
    let out = train(&scenes, &file.train)?;
    let ckpt_path = config::resolve(path, &file.checkpoint);
    let history_path = config::resolve(path, &file.history);
    Checkpoint {
        model: out.model,
        state: out.state,
    }
    .save(&ckpt_path)?;
    std::fs::write(&history_path, epoch_csv(&out.history))?;
    if let Some(last) = out.history.last() {
        println!(
            "epoch {}: task loss {:.5}, fraction {:.4}, lambda {:.4}",
            last.epoch, last.task_loss, last.fraction_selected, last.lambda
        );
    }
    println!("wrote {} and {}", ckpt_path.display(), history_path.display());
    Ok(())
}

fn experiment(kind: ExperimentKind, path: &Path) -> Result<()> {
    let file: ExperimentFile = config::load(path)?;
    let ckpt = Checkpoint::load(&config::resolve(path, &file.checkpoint))?;
    let s = build_scenario(&file.scenario)?;
    let out = run_experiment(kind, &s, &ckpt.model, &file.network, &file.compression, file.network_seed)?;
    for written in out.write(&config::resolve(path, &file.out_dir))? {
        println!("wrote {}", written.display());
    }
    for (k, v) in &out.summary {
        println!("{k} = {v}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, checkpoint, out } => run(&scenario, &checkpoint, &out),
        Command::Train { config } => train_cmd(&config),
        Command::Experiment { name, config } => experiment(name, &config),
        Command::Verify => {
            let checks = verify::run_all();
            for c in &checks {
                println!("{c}");
            }
            return if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
