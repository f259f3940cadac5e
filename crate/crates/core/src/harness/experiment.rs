//! Training sets and the sweep drivers behind `coopertrim experiment`.
//!
//! Every sweep replays one scenario under a trained model and writes a frame
//! CSV (per-frame rows followed by one aggregate row per leg) and a two-column
//! summary CSV.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::encoder::encode;
use crate::harness::episode::{run_episode, run_episode_traced, training_scene, EpisodeConfig, Transport};
use crate::harness::metrics::{adaptation_correlation, format_optional, EpisodeMetrics, FrameMetrics};
use crate::harness::scenario::{build_scenario, Phase, Scenario, ScenarioConfig};
use crate::netsim::NetworkConfig;
use crate::protocol::{spatial_transform, CompressionConfig, CompressionRate, ResponseMessage};
use crate::relevance::ChannelMask;
use crate::rng::SimRng;
use crate::training::model::Model;
use crate::training::trainer::TrainingScene;

/// Scenes whose phases alternate between an empty road and a random number
/// of cars, so the learner sees both quiet and busy stretches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSetConfig {
    pub scenes: u64,
    /// Seeds the car counts of the busy phases.
    pub phase_seed: u64,
    /// Scene `k` is generated with seed `first_scene_seed + k`.
    pub first_scene_seed: u64,
    pub phases: u64,
    pub phase_frames: u64,
    /// Busy phases draw between 1 and this many cars.
    pub max_objects: usize,
    /// Everything except seed, frames and phases.
    pub scenario: ScenarioConfig,
}

impl Default for TrainingSetConfig {
    fn default() -> Self {
        Self {
            scenes: 8,
            phase_seed: 99,
            first_scene_seed: 0,
            phases: 4,
            phase_frames: 10,
            max_objects: 6,
            scenario: ScenarioConfig::default(),
        }
    }
}

impl TrainingSetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 || self.phases == 0 || self.phase_frames == 0 || self.max_objects == 0 {
            return Err(Error::Config(
                "scenes, phases, phase_frames and max_objects must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        self.validate()?;
        let mut rng = SimRng::new(self.phase_seed);
        (0..self.scenes)
            .map(|k| {
                let phases = (0..self.phases)
                    .map(|p| Phase {
                        start_frame: p * self.phase_frames,
                        dynamic_objects: if (p + k) % 2 == 0 {
                            0
                        } else {
                            1 + rng.below(self.max_objects)
                        },
                    })
                    .collect();
                build_scenario(&ScenarioConfig {
                    seed: self.first_scene_seed + k,
                    frames: self.phases * self.phase_frames,
                    phases,
                    ..self.scenario.clone()
                })
            })
            .collect()
    }

    pub fn training_scenes(&self) -> Result<Vec<TrainingScene>> {
        self.scenarios()?.iter().map(training_scene).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Adaptation,
    LossSweep,
    LatencySweep,
    CompressionSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::Adaptation,
        ExperimentKind::LossSweep,
        ExperimentKind::LatencySweep,
        ExperimentKind::CompressionSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Adaptation => "adaptation",
            ExperimentKind::LossSweep => "loss_sweep",
            ExperimentKind::LatencySweep => "latency_sweep",
            ExperimentKind::CompressionSweep => "compression_sweep",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

pub const LOSS_GRID: [f64; 2] = [0.0, 0.1];
pub const LATENCY_GRID_MS: [f64; 4] = [0.0, 50.0, 100.0, 200.0];

pub const FRAME_CSV_HEADER: &str = "leg,frame_id,complexity,fraction_selected,bandwidth_mbps,iou_dynamic,iou_static,loss_events,latency_frames,payload_bytes";
pub const SUMMARY_CSV_HEADER: &str = "metric,value";

/// Tag of the aggregate row that closes each leg.
pub const AGGREGATE: &str = "aggregate";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub kind: ExperimentKind,
    pub frames_csv: String,
    pub summary: Vec<(String, String)>,
}

impl ExperimentOutput {
    pub fn summary_csv(&self) -> String {
        let mut out = format!("{SUMMARY_CSV_HEADER}\n");
        for (k, v) in &self.summary {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn metric(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Writes `<name>.csv` and `<name>_summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let frames = dir.join(format!("{}.csv", self.kind.name()));
        let summary = dir.join(format!("{}_summary.csv", self.kind.name()));
        std::fs::write(&frames, &self.frames_csv)?;
        std::fs::write(&summary, self.summary_csv())?;
        Ok(vec![frames, summary])
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Per-frame rows for `metrics` followed by the leg's aggregate row.
pub fn write_leg(out: &mut String, leg: &str, metrics: &EpisodeMetrics, complexity: &[u64]) {
    for (r, c) in metrics.rows.iter().zip(complexity) {
        let _ = writeln!(
            out,
            "{leg},{},{c},{},{},{},{},{},{},{}",
            r.frame_id,
            r.fraction_selected,
            r.bandwidth_mbps,
            r.iou_dynamic,
            r.iou_static,
            r.loss_events,
            r.latency_frames,
            r.payload_bytes
        );
    }
    let rows = &metrics.rows;
    let _ = writeln!(
        out,
        "{leg},{AGGREGATE},{},{},{},{},{},{},{},{}",
        mean(complexity.iter().map(|&c| c as f64)),
        metrics.mean_fraction(),
        metrics.mean_bandwidth(),
        mean(rows.iter().map(|r| r.iou_dynamic)),
        mean(rows.iter().map(|r| r.iou_static)),
        rows.iter().map(|r| r.loss_events).sum::<u64>(),
        rows.iter().map(|r| r.latency_frames).max().unwrap_or(0),
        metrics.total_payload_bytes()
    );
}

/// Response payload bytes the responders would send for the given masks, one
/// mask per frame.
pub fn replay_payload_bytes(scenario: &Scenario, masks: &[ChannelMask], compression: &CompressionConfig) -> Result<u64> {
    let sc = &scenario.config;
    let mut total = 0u64;
    for (t, mask) in (0..scenario.frames()).zip(masks) {
        let ego_pose = scenario.pose(0, t);
        for k in 1..sc.agents.len() {
            let rel = ego_pose.relative_to_self(&scenario.pose(k, t));
            let (warped, _) = spatial_transform(&encode(scenario, k, t), &rel, sc.cell_size)?;
            let msg = ResponseMessage::build(sc.agents[k].id, t, mask, &warped, compression)?;
            total += msg.payload.len() as u64;
        }
    }
    Ok(total)
}

fn kv(key: impl Into<String>, value: impl ToString) -> (String, String) {
    (key.into(), value.to_string())
}

fn pct_label(rate: f64) -> String {
    format!("{}", (rate * 100.0).round() as i64)
}

/// Runs one sweep. `network` and `compression` are the baseline every leg
/// starts from; `network_seed` seeds the simulator of every leg.
pub fn run_experiment(
    kind: ExperimentKind,
    scenario: &Scenario,
    model: &Model,
    network: &NetworkConfig,
    compression: &CompressionConfig,
    network_seed: u64,
) -> Result<ExperimentOutput> {
    network.validate()?;
    let complexity = &scenario.complexity_schedule;
    let mut csv = format!("{FRAME_CSV_HEADER}\n");
    let mut summary = Vec::new();
    let simulated = |net: NetworkConfig| EpisodeConfig {
        transport: Transport::Simulated(net),
        compression: *compression,
        seed: network_seed,
    };
    match kind {
        ExperimentKind::Adaptation => {
            let m = run_episode(scenario, model, &simulated(*network))?;
            write_leg(&mut csv, "episode", &m, complexity);
            summary.push(kv("spearman", format_optional(adaptation_correlation(&m, complexity)?)));
            let phases = &scenario.config.phases;
            if let (Some(first), Some(last)) = (phases.first(), phases.last()) {
                let boundary = if phases.len() > 1 { last.start_frame } else { scenario.frames() };
                let (quiet, busy): (Vec<&FrameMetrics>, Vec<&FrameMetrics>) =
                    m.rows.iter().partition(|r| r.frame_id < boundary);
                summary.push(kv("quiet_objects", first.dynamic_objects));
                summary.push(kv("busy_objects", last.dynamic_objects));
                summary.push(kv("quiet_mean_fraction", mean(quiet.iter().map(|r| r.fraction_selected))));
                summary.push(kv("busy_mean_fraction", mean(busy.iter().map(|r| r.fraction_selected))));
            }
            summary.push(kv("mean_bandwidth_mbps", m.mean_bandwidth()));
            summary.push(kv("aggregate_iou", m.aggregate_iou()));
        }
        ExperimentKind::LossSweep => {
            let mut ious = Vec::new();
            for rate in LOSS_GRID {
                let m = run_episode(scenario, model, &simulated(NetworkConfig { loss_rate: rate, ..*network }))?;
                let leg = format!("loss_{}pct", pct_label(rate));
                write_leg(&mut csv, &leg, &m, complexity);
                summary.push(kv(format!("aggregate_iou_{leg}"), m.aggregate_iou()));
                ious.push(m.aggregate_iou());
            }
            summary.push(kv("iou_delta", ious[0] - ious[ious.len() - 1]));
        }
        ExperimentKind::LatencySweep => {
            let direct = run_episode(
                scenario,
                model,
                &EpisodeConfig {
                    transport: Transport::Direct,
                    compression: *compression,
                    seed: network_seed,
                },
            )?;
            for ms in LATENCY_GRID_MS {
                let net = NetworkConfig { latency_ms: ms, ..*network };
                let m = run_episode(scenario, model, &simulated(net))?;
                let leg = format!("latency_{}ms", ms as u64);
                write_leg(&mut csv, &leg, &m, complexity);
                summary.push(kv(format!("aggregate_iou_{leg}"), m.aggregate_iou()));
                if ms == 0.0 {
                    summary.push(kv("latency_0ms_matches_direct", m == direct));
                }
            }
        }
        ExperimentKind::CompressionSweep => {
            let mut base_masks = Vec::new();
            let mut base_iou = 0.0;
            for rate in CompressionRate::ALL {
                let comp = CompressionConfig { rate, lossless: false };
                let cfg = EpisodeConfig {
                    transport: Transport::Direct,
                    compression: comp,
                    seed: network_seed,
                };
                let (m, trace) = run_episode_traced(scenario, model, &cfg, rate == CompressionRate::X1)?;
                write_leg(&mut csv, rate.label(), &m, complexity);
                summary.push(kv(format!("aggregate_iou_{}", rate.label()), m.aggregate_iou()));
                if rate == CompressionRate::X1 {
                    base_masks = trace.masks;
                    base_iou = m.aggregate_iou();
                } else {
                    summary.push(kv(format!("iou_drop_{}", rate.label()), base_iou - m.aggregate_iou()));
                }
            }
            let bytes = |rate| replay_payload_bytes(scenario, &base_masks, &CompressionConfig { rate, lossless: false });
            let full = bytes(CompressionRate::X1)?;
            summary.push(kv("fixed_mask_payload_bytes_1x", full));
            for rate in [CompressionRate::X8, CompressionRate::X32] {
                let b = bytes(rate)?;
                summary.push(kv(format!("fixed_mask_payload_bytes_{}", rate.label()), b));
                let ratio = if full == 0 { 0.0 } else { b as f64 / full as f64 };
                summary.push(kv(format!("payload_ratio_{}", rate.label()), ratio));
            }
        }
    }
    Ok(ExperimentOutput {
        kind,
        frames_csv: csv,
        summary,
    })
}
