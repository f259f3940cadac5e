//! Bandwidth-constrained training: the Lagrangian loss and λ schedule,
//! ε-greedy batching, hand-written gradients with a finite-difference check,
//! and the Monte Carlo bias test.

pub mod bias;
pub mod checkpoint;
pub mod egreedy;
pub mod gradcheck;
pub mod lagrange;
pub mod model;
pub mod trainer;

pub use bias::{proposition1_test, BiasProblem, BiasRow};
pub use checkpoint::Checkpoint;
pub use egreedy::{epsilon_greedy_choice, BatchKind};
pub use gradcheck::{grad_check, pipeline_grad_check, PipelineInstance};
pub use lagrange::{total_loss, total_loss_with, update_lambda, LagrangeState, PenaltyMode};
pub use model::{evaluate, forward_backward, select, Model, Neighbor, Objective, PassSettings, Relaxation, Sample, ToyTaskHead};
pub use trainer::{train, train_epoch, EpochMetrics, TrainConfig, TrainingFrame, TrainingScene};
