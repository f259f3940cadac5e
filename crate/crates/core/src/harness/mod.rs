//! Synthetic scenes, end-to-end episodes, metrics and experiment drivers.

pub mod config;
pub mod encoder;
pub mod episode;
pub mod experiment;
pub mod metrics;
pub mod scenario;

pub use episode::{run_episode, training_scene, EpisodeConfig, Transport};
pub use metrics::{adaptation_correlation, iou, spearman, EpisodeMetrics, FrameMetrics};
pub use experiment::{run_experiment, ExperimentKind, ExperimentOutput, TrainingSetConfig};
pub use scenario::{build_scenario, generate_scenario, Scenario, ScenarioConfig};
