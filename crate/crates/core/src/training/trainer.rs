use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FeatureGrid;
use crate::rng::SimRng;
use crate::training::egreedy::{epsilon_greedy_choice, BatchKind};
use crate::training::lagrange::{update_lambda, LagrangeState, PenaltyMode};
use crate::training::model::{evaluate, forward_backward, soft_fuse, Model, Neighbor, Objective, PassSettings, Relaxation, Sample};
use crate::uncertainty::ChannelReduction;

/// Surrogate temperature `max(floor, initial·decay^epoch)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperatureSchedule {
    pub initial: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for TemperatureSchedule {
    fn default() -> Self {
        Self {
            initial: 0.5,
            decay: 0.9,
            floor: 0.1,
        }
    }
}

impl TemperatureSchedule {
    /// Temperature for the zero-based epoch index.
    pub fn at(&self, epoch_index: u64) -> f64 {
        (self.initial * self.decay.powi(epoch_index.min(i32::MAX as u64) as i32)).max(self.floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epsilon: f64,
    pub learning_rate: f64,
    pub epochs: u64,
    pub temperature: TemperatureSchedule,
    pub seed: u64,
    pub itc: u64,
    pub c_target: f64,
    pub lambda_seed: f64,
    pub penalty: PenaltyMode,
    /// Decay of the running mean of the selected fraction that sets the
    /// penalty slope; `None` takes the slope at each frame's own fraction.
    pub fraction_ema: Option<f64>,
    /// Per-epoch multiplier on the learning rate.
    pub learning_rate_decay: f64,
    /// Leading frames of each scene that only seed the temporal reference.
    pub burn_in_frames: usize,
    /// Rescales each step's gradient to at most this L2 norm.
    pub grad_clip: Option<f64>,
    pub d_k: usize,
    pub d_v: usize,
    pub reduction: ChannelReduction,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            learning_rate: 0.5,
            epochs: 60,
            temperature: TemperatureSchedule::default(),
            seed: 0,
            itc: 5,
            c_target: 0.04,
            lambda_seed: 0.01,
            penalty: PenaltyMode::Absolute,
            fraction_ema: Some(0.9),
            learning_rate_decay: 0.95,
            burn_in_frames: 1,
            grad_clip: Some(1.0),
            d_k: 16,
            d_v: 16,
            reduction: ChannelReduction::Max,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.learning_rate_decay > 0.0 && self.learning_rate_decay <= 1.0) {
            return bad(format!("learning_rate_decay must lie in (0, 1], got {}", self.learning_rate_decay));
        }
        let t = &self.temperature;
        if !(t.initial > 0.0 && t.floor > 0.0 && t.decay > 0.0 && t.decay <= 1.0) {
            return bad(format!("invalid temperature schedule {t:?}"));
        }
        if let Some(d) = self.fraction_ema {
            if !(0.0..1.0).contains(&d) {
                return bad(format!("fraction_ema must lie in [0, 1), got {d}"));
            }
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad(format!("grad_clip must be positive, got {c}"));
            }
        }
        if self.d_k == 0 || self.d_v == 0 {
            return bad("attention widths must be positive".into());
        }
        LagrangeState::new(self.itc, self.c_target, self.lambda_seed)?;
        Ok(())
    }

    pub fn initial_state(&self) -> Result<LagrangeState> {
        LagrangeState::new(self.itc, self.c_target, self.lambda_seed)
    }
}

/// One frame of a training scene, responders already in the ego frame.
#[derive(Debug, Clone)]
pub struct TrainingFrame {
    pub ego: FeatureGrid,
    pub neighbors: Vec<Neighbor>,
    pub truth_dynamic: Vec<bool>,
    pub truth_static: Vec<bool>,
}

/// Consecutive frames; each frame's temporal reference is the previous frame's
/// fusion under the model's own mask.
pub type TrainingScene = Vec<TrainingFrame>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u64,
    pub task_loss: f64,
    /// Mean of the model's own hard-mask fraction over the epoch's steps.
    pub fraction_selected: f64,
    /// λ in force during the epoch.
    pub lambda: f64,
    pub epsilon_draws_full: u64,
}

fn clip(grads: &mut [f64], max_norm: f64) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
}

/// One pass over every frame of every scene, one SGD step per frame, then a λ update.
pub fn train_epoch(
    model: &mut Model,
    scenes: &[TrainingScene],
    cfg: &TrainConfig,
    state: &mut LagrangeState,
    rng: &mut SimRng,
) -> Result<EpochMetrics> {
    let epoch = state.epoch;
    let temperature = cfg.temperature.at(epoch - 1);
    let learning_rate = cfg.learning_rate * cfg.learning_rate_decay.powi((epoch - 1) as i32);
    let lambda = state.lambda;
    let c_target = state.c_target;
    let settings_for = |batch, slope_at| PassSettings {
        relaxation: Relaxation::StraightThrough { temperature },
        batch,
        objective: Objective::Task {
            lambda,
            c_target,
            penalty: cfg.penalty,
            slope_at,
        },
    };
    let mut steps = 0u64;
    let mut task_sum = 0.0;
    let mut fraction_sum = 0.0;
    let mut full_draws = 0u64;
    for scene in scenes {
        let mut reference: Option<FeatureGrid> = None;
        for (i, frame) in scene.iter().enumerate() {
            if i < cfg.burn_in_frames {
                let reference_grid = reference.unwrap_or_else(|| {
                    let (c, h, w) = frame.ego.dims();
                    FeatureGrid::zeros(c, h, w)
                });
                let sample = Sample {
                    ego: &frame.ego,
                    reference: &reference_grid,
                    neighbors: &frame.neighbors,
                    truth_dynamic: &frame.truth_dynamic,
                    truth_static: &frame.truth_static,
                };
                reference = Some(evaluate(model, &sample)?.fused);
                continue;
            }
            let batch = epsilon_greedy_choice(rng, cfg.epsilon)?;
            if batch == BatchKind::Full {
                full_draws += 1;
            }
            let zeros;
            let reference_grid = match &reference {
                Some(r) => r,
                None => {
                    let (c, h, w) = frame.ego.dims();
                    zeros = FeatureGrid::zeros(c, h, w);
                    &zeros
                }
            };
            let sample = Sample {
                ego: &frame.ego,
                reference: reference_grid,
                neighbors: &frame.neighbors,
                truth_dynamic: &frame.truth_dynamic,
                truth_static: &frame.truth_static,
            };
            let slope_at = cfg.fraction_ema.and(state.fraction_mean);
            let (out, grads) = forward_backward(model, &sample, &settings_for(batch, slope_at))?;
            let mut g = grads.expect("relaxed pass returns gradients").to_vec();
            if !out.total.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch as usize,
                    step: steps as usize,
                    detail: format!(
                        "task loss {}, total {}, fraction {}, lambda {lambda}",
                        out.task_loss, out.total, out.fraction
                    ),
                });
            }
            if let Some(c) = cfg.grad_clip {
                clip(&mut g, c);
            }
            let mut params = model.to_vec();
            for (p, d) in params.iter_mut().zip(&g) {
                *p -= learning_rate * d;
            }
            model.set_from_slice(&params)?;
            task_sum += out.task_loss;
            fraction_sum += out.fraction;
            if let Some(d) = cfg.fraction_ema {
                state.fraction_mean = Some(state.fraction_mean.map_or(out.fraction, |m| d * m + (1.0 - d) * out.fraction));
            }
            steps += 1;
            // the next frame sees what inference would have fused, not the full-data pass
            reference = Some(match batch {
                BatchKind::Partial => out.fused,
                BatchKind::Full => {
                    let mask: Vec<f64> = out.mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
                    FeatureGrid::from_parts(frame.ego.dims(), soft_fuse(&frame.ego, &frame.neighbors, &mask).0)
                }
            });
        }
    }
    if steps == 0 {
        return Err(Error::Empty("training scenes"));
    }
    let fraction = fraction_sum / steps as f64;
    *state = update_lambda(state, (fraction * 100.0).clamp(0.0, 100.0))?;
    Ok(EpochMetrics {
        epoch,
        task_loss: task_sum / steps as f64,
        fraction_selected: fraction,
        lambda,
        epsilon_draws_full: full_draws,
    })
}

/// Full run from a freshly seeded model.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub state: LagrangeState,
    pub history: Vec<EpochMetrics>,
}

pub fn train(scenes: &[TrainingScene], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = scenes
        .iter()
        .flat_map(|s| s.first())
        .next()
        .ok_or(Error::Empty("training scenes"))?;
    let (c, h, w) = first.ego.dims();
    let root = SimRng::new(cfg.seed);
    let mut model = Model::init(c, h * w, cfg.d_k, cfg.d_v, &mut root.substream(1));
    model.reduction = cfg.reduction;
    let mut state = cfg.initial_state()?;
    let mut rng = root.substream(2);
    let history = (0..cfg.epochs)
        .map(|_| train_epoch(&mut model, scenes, cfg, &mut state, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainOutcome { model, state, history })
}

/// Header of the per-epoch training CSV.
pub const EPOCH_CSV_HEADER: &str = "epoch,task_loss,fraction_selected,lambda,epsilon_draws_full";

pub fn epoch_csv(history: &[EpochMetrics]) -> String {
    let mut out = String::from(EPOCH_CSV_HEADER);
    out.push('\n');
    for m in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            m.epoch, m.task_loss, m.fraction_selected, m.lambda, m.epsilon_draws_full
        ));
    }
    out
}
