//! Conformal temporal uncertainty.
//!
//! Nonconformity scores are the elementwise L1 deviation between the current
//! frame and the previous fused frame. A learnable quantile level picks a
//! threshold on those scores; scores at or below it are gated to zero, and the
//! survivors are reduced per channel into the query signal for relevance scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{l1_deviation, FeatureGrid};

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise deviation scores, same shape as the grids they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct NonconformityMap {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl NonconformityMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let grid = FeatureGrid::new(channels, height, width, values)?;
        if let Some(index) = grid.values().iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nonconformity score {} at index {index} is negative",
                grid.values()[index]
            )));
        }
        Ok(Self {
            dims: grid.dims(),
            values: grid.into_values(),
        })
    }

    pub(crate) fn from_parts(dims: (usize, usize, usize), values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self { dims, values }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn plane(&self) -> usize {
        self.dims.1 * self.dims.2
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.plane();
        &self.values[c * p..(c + 1) * p]
    }

    pub fn get(&self, c: usize, r: usize, col: usize) -> f64 {
        self.values[(c * self.dims.1 + r) * self.dims.2 + col]
    }
}

/// Learnable quantile level, squashed through a logistic so it stays in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuantileGate {
    pub raw_level: f64,
}

impl QuantileGate {
    pub fn new(raw_level: f64) -> Self {
        Self { raw_level }
    }

    /// Gate whose level() equals `level`.
    pub fn with_level(level: f64) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "quantile level {level} outside (0, 1)"
            )));
        }
        Ok(Self {
            raw_level: (level / (1.0 - level)).ln(),
        })
    }

    pub fn level(&self) -> f64 {
        logistic(self.raw_level)
    }

    /// d level / d raw_level.
    pub(crate) fn level_derivative(&self) -> f64 {
        let l = self.level();
        l * (1.0 - l)
    }
}

/// Per-channel reduction of the gated scores.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyVector(pub Vec<f64>);

impl UncertaintyVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// How gated scores collapse to one value per channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelReduction {
    #[default]
    Mean,
    Max,
    /// Share of the channel's cells whose score passed the gate.
    FractionAbove,
}

/// 1-based nearest rank `ceil(level·n)`, clamped to `[1, n]`.
///
/// Products that land within 1e-9 of an integer are snapped to it, so
/// `0.3 · 10` selects rank 3 rather than 4.
pub(crate) fn nearest_rank(level: f64, n: usize) -> usize {
    let x = level * n as f64;
    let k = if (x - x.round()).abs() < 1e-9 {
        x.round()
    } else {
        x.ceil()
    };
    (k as usize).clamp(1, n)
}

fn sorted_scores(scores: &NonconformityMap) -> Vec<f64> {
    let mut sorted = scores.values.clone();
    sorted.sort_by(f64::total_cmp);
    sorted
}

/// Nearest-rank quantile of all scores.
pub fn quantile_threshold(scores: &NonconformityMap, level: f64) -> Result<f64> {
    if scores.values.is_empty() {
        return Err(Error::Empty("nonconformity map"));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile level {level} outside (0, 1]"
        )));
    }
    let sorted = sorted_scores(scores);
    Ok(sorted[nearest_rank(level, sorted.len()) - 1])
}

/// Linearly interpolated quantile over sorted data and its slope in `level`.
///
/// This is the smooth surrogate whose derivative trains the quantile level;
/// inference always uses [`quantile_threshold`].
pub(crate) fn interpolated_quantile(sorted: &[f64], level: f64) -> (f64, f64) {
    let n = sorted.len();
    if n == 1 {
        return (sorted[0], 0.0);
    }
    let pos = level.clamp(0.0, 1.0) * (n - 1) as f64;
    let k = (pos.floor() as usize).min(n - 2);
    let frac = pos - k as f64;
    let step = sorted[k + 1] - sorted[k];
    (sorted[k] + frac * step, step * (n - 1) as f64)
}

/// Keeps scores strictly above `q`, zeroes the rest.
pub fn gate_scores(scores: &NonconformityMap, q: f64) -> Result<NonconformityMap> {
    if !q.is_finite() {
        return Err(Error::InvalidParameter(format!("gate threshold {q} is not finite")));
    }
    let values = scores
        .values
        .iter()
        .map(|&s| if s > q { s } else { 0.0 })
        .collect();
    Ok(NonconformityMap::from_parts(scores.dims, values))
}

/// Per-channel mean of the gated map.
pub fn channel_uncertainty(gated: &NonconformityMap) -> UncertaintyVector {
    channel_uncertainty_with(gated, ChannelReduction::Mean)
}

pub fn channel_uncertainty_with(gated: &NonconformityMap, reduction: ChannelReduction) -> UncertaintyVector {
    let plane = gated.plane();
    let v = (0..gated.dims.0)
        .map(|c| {
            let ch = gated.channel(c);
            match reduction {
                ChannelReduction::Mean => ch.iter().sum::<f64>() / plane as f64,
                ChannelReduction::Max => ch.iter().copied().fold(0.0, f64::max),
                ChannelReduction::FractionAbove => {
                    ch.iter().filter(|&&s| s > 0.0).count() as f64 / plane as f64
                }
            }
        })
        .collect();
    UncertaintyVector(v)
}

/// The ego's temporal reference `F_{t−1}^fused`.
///
/// Before the first fused frame exists the reference is the zero grid, so frame
/// 0 scores equal `|F_0|`. With `ema` set, the reference becomes an exponential
/// moving average of fused frames instead of the last one.
#[derive(Debug, Clone, Default)]
pub struct TemporalMemory {
    reference: Option<FeatureGrid>,
    ema: Option<f64>,
}

impl TemporalMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_ema(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("ema weight {alpha} outside (0, 1]")));
        }
        Ok(Self {
            reference: None,
            ema: Some(alpha),
        })
    }

    pub fn reference(&self) -> Option<&FeatureGrid> {
        self.reference.as_ref()
    }

    pub fn scores(&self, current: &FeatureGrid) -> Result<NonconformityMap> {
        match &self.reference {
            Some(prev) => l1_deviation(current, prev),
            None => {
                let (c, h, w) = current.dims();
                l1_deviation(current, &FeatureGrid::zeros(c, h, w))
            }
        }
    }

    pub fn store(&mut self, fused: FeatureGrid) {
        self.reference = match (self.ema, self.reference.take()) {
            (Some(alpha), Some(prev)) if prev.dims() == fused.dims() => {
                let values = prev
                    .values()
                    .iter()
                    .zip(fused.values())
                    .map(|(p, f)| alpha * f + (1.0 - alpha) * p)
                    .collect();
                Some(FeatureGrid::from_parts(fused.dims(), values))
            }
            _ => Some(fused),
        };
    }
}
