use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the bandwidth term enters the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// `λ·(f − c)`; under-budget selection lowers the loss.
    #[default]
    Signed,
    /// `λ·max(0, f − c)`.
    Hinge,
    /// `λ·|f − c|`; pulls the fraction toward the target from either side.
    Absolute,
}

impl PenaltyMode {
    pub fn value(self, lambda: f64, fraction: f64, c_target: f64) -> f64 {
        let d = fraction - c_target;
        lambda
            * match self {
                PenaltyMode::Signed => d,
                PenaltyMode::Hinge => d.max(0.0),
                PenaltyMode::Absolute => d.abs(),
            }
    }

    /// Derivative of [`PenaltyMode::value`] in `fraction` (one-sided at the kink).
    pub fn slope(self, lambda: f64, fraction: f64, c_target: f64) -> f64 {
        let d = fraction - c_target;
        match self {
            PenaltyMode::Signed => lambda,
            PenaltyMode::Hinge => {
                if d > 0.0 {
                    lambda
                } else {
                    0.0
                }
            }
            PenaltyMode::Absolute => {
                if d > 0.0 {
                    lambda
                } else if d < 0.0 {
                    -lambda
                } else {
                    0.0
                }
            }
        }
    }
}

/// Lagrange multiplier and its schedule state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangeState {
    pub lambda: f64,
    /// Epoch the next `update_lambda` call closes (1-based).
    pub epoch: u64,
    /// Initial tuning epochs with λ held at zero.
    pub itc: u64,
    pub c_target: f64,
    pub lambda_seed: f64,
    /// Running mean of the selected fraction, when tracked.
    #[serde(default)]
    pub fraction_mean: Option<f64>,
}

impl Default for LagrangeState {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            epoch: 1,
            itc: 5,
            c_target: 0.04,
            lambda_seed: 0.01,
            fraction_mean: None,
        }
    }
}

impl LagrangeState {
    pub fn new(itc: u64, c_target: f64, lambda_seed: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c_target) {
            return Err(Error::InvalidParameter(format!("c_target {c_target} outside [0, 1]")));
        }
        if !(lambda_seed > 0.0 && lambda_seed.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda_seed must be positive, got {lambda_seed}")));
        }
        Ok(Self {
            itc,
            c_target,
            lambda_seed,
            ..Self::default()
        })
    }
}

/// Task loss plus the signed bandwidth penalty `λ·(fraction − c_target)`.
pub fn total_loss(task_loss: f64, fraction_selected: f64, state: &LagrangeState) -> f64 {
    total_loss_with(task_loss, fraction_selected, state, PenaltyMode::Signed)
}

pub fn total_loss_with(task_loss: f64, fraction_selected: f64, state: &LagrangeState, mode: PenaltyMode) -> f64 {
    task_loss + mode.value(state.lambda, fraction_selected, state.c_target)
}

/// Closes epoch `state.epoch` given the selected fraction in percent.
///
/// Held at zero through `itc`; seeded at the first epoch after it; every
/// tenth epoch multiplies by `2^(P/100)`, the others by
/// `1 + 0.1·⌊(epoch − itc)/10⌋`.
pub fn update_lambda(state: &LagrangeState, fraction_selected_pct: f64) -> Result<LagrangeState> {
    if !(0.0..=100.0).contains(&fraction_selected_pct) {
        return Err(Error::InvalidParameter(format!(
            "selected percentage {fraction_selected_pct} outside [0, 100]"
        )));
    }
    let mut next = *state;
    let epoch = state.epoch;
    if epoch <= state.itc {
        next.lambda = 0.0;
    } else {
        if epoch == state.itc + 1 {
            next.lambda = state.lambda_seed;
        }
        if epoch % 10 == 0 {
            next.lambda *= 2f64.powf(fraction_selected_pct / 100.0);
        } else {
            next.lambda *= 1.0 + 0.1 * ((epoch - state.itc) / 10) as f64;
        }
    }
    next.epoch = epoch + 1;
    Ok(next)
}
