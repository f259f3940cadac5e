//! Simulated V2V channel: random loss, frame-quantized latency, and bandwidth
//! accounting on the 40 Mbps full-feature scale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FeatureGrid;
use crate::relevance::ChannelMask;
use crate::rng::SimRng;

/// Where random loss is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossGranularity {
    /// Each received channel is dropped independently.
    #[default]
    Channel,
    /// Whole response messages are dropped.
    Packet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub loss_rate: f64,
    pub latency_ms: f64,
    /// Extra per-message delay drawn uniformly from `[0, jitter_ms]`.
    pub jitter_ms: f64,
    pub frame_period_ms: f64,
    pub full_link_mbps: f64,
    pub granularity: LossGranularity,
    /// Delay requests as well as responses.
    pub delay_requests: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            loss_rate: 0.0,
            latency_ms: 0.0,
            jitter_ms: 0.0,
            frame_period_ms: 100.0,
            full_link_mbps: 40.0,
            granularity: LossGranularity::Channel,
            delay_requests: false,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(0.0..=1.0).contains(&self.loss_rate) {
            return bad(format!("loss rate {} outside [0, 1]", self.loss_rate));
        }
        if !(self.latency_ms >= 0.0 && self.latency_ms.is_finite()) {
            return bad(format!("latency {} ms must be non-negative", self.latency_ms));
        }
        if !(self.jitter_ms >= 0.0 && self.jitter_ms.is_finite()) {
            return bad(format!("jitter {} ms must be non-negative", self.jitter_ms));
        }
        if !(self.frame_period_ms > 0.0 && self.frame_period_ms.is_finite()) {
            return bad(format!("frame period {} ms must be positive", self.frame_period_ms));
        }
        if !(self.full_link_mbps > 0.0 && self.full_link_mbps.is_finite()) {
            return bad(format!("full link rate {} Mbps must be positive", self.full_link_mbps));
        }
        Ok(())
    }

    /// Whole frames of delay for a message with `latency_ms` of travel time.
    pub fn frames_for(&self, latency_ms: f64) -> u64 {
        (latency_ms / self.frame_period_ms).ceil() as u64
    }

    pub fn latency_frames(&self) -> u64 {
        self.frames_for(self.latency_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeliveryRecord {
    pub sent_frame: u64,
    /// `None` when the message was dropped.
    pub delivered_frame: Option<u64>,
    pub bytes_on_wire: usize,
}

impl DeliveryRecord {
    pub fn dropped(&self) -> bool {
        self.delivered_frame.is_none()
    }

    pub fn delay_frames(&self) -> Option<u64> {
        self.delivered_frame.map(|d| d - self.sent_frame)
    }
}

/// Drops the message with probability `loss_rate`, otherwise schedules it
/// `ceil(latency / frame_period)` frames later.
///
/// Always consumes one loss draw and, with jitter enabled, one jitter draw, so
/// traces stay aligned across loss rates for a given seed.
pub fn transmit(msg_bytes: &[u8], sent_frame: u64, cfg: &NetworkConfig, rng: &mut SimRng) -> DeliveryRecord {
    let lost = rng.uniform() < cfg.loss_rate;
    let jitter = if cfg.jitter_ms > 0.0 {
        rng.uniform_in(0.0, cfg.jitter_ms)
    } else {
        0.0
    };
    DeliveryRecord {
        sent_frame,
        delivered_frame: (!lost).then(|| sent_frame + cfg.frames_for(cfg.latency_ms + jitter)),
        bytes_on_wire: msg_bytes.len(),
    }
}

/// Link share used by a selected channel fraction.
pub fn bandwidth_mbps(fraction_selected: f64, cfg: &NetworkConfig) -> f64 {
    debug_assert!((0.0..=1.0).contains(&fraction_selected));
    fraction_selected * cfg.full_link_mbps
}

/// Channel fraction corresponding to a target link rate.
pub fn budget_fraction(target_mbps: f64, cfg: &NetworkConfig) -> Result<f64> {
    if !(0.0..=cfg.full_link_mbps).contains(&target_mbps) {
        return Err(Error::InvalidParameter(format!(
            "target {target_mbps} Mbps outside [0, {}]",
            cfg.full_link_mbps
        )));
    }
    Ok(target_mbps / cfg.full_link_mbps)
}

/// Drops each selected channel independently with probability `loss_rate`.
///
/// Dropped channels are zeroed and removed from the returned mask so fusion
/// falls back to the ego's own features there.
pub fn apply_loss_mask(
    grid: &FeatureGrid,
    mask: &ChannelMask,
    loss_rate: f64,
    rng: &mut SimRng,
) -> Result<(FeatureGrid, ChannelMask)> {
    if mask.len() != grid.channels() {
        return Err(Error::DimensionMismatch {
            what: "loss mask length",
            expected: grid.channels(),
            actual: mask.len(),
        });
    }
    let mut effective = mask.clone();
    let mut values = grid.values().to_vec();
    let plane = grid.plane();
    for c in mask.selected() {
        if rng.uniform() < loss_rate {
            effective.set(c, false);
            values[c * plane..(c + 1) * plane].fill(0.0);
        }
    }
    Ok((FeatureGrid::from_parts(grid.dims(), values), effective))
}

/// Ordered in-flight queue for one simulation.
#[derive(Debug)]
pub struct NetworkChannel<T> {
    cfg: NetworkConfig,
    rng: SimRng,
    in_flight: BTreeMap<(u64, u64), T>,
    seq: u64,
    records: Vec<DeliveryRecord>,
}

impl<T> NetworkChannel<T> {
    pub fn new(cfg: NetworkConfig, rng: SimRng) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rng,
            in_flight: BTreeMap::new(),
            seq: 0,
            records: Vec::new(),
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    /// Sends one message. Packet-level loss only applies with
    /// [`LossGranularity::Packet`]; channel-level loss is the receiver's job.
    pub fn send(&mut self, frame: u64, bytes: &[u8], payload: T) -> DeliveryRecord {
        let mut cfg = self.cfg;
        if cfg.granularity == LossGranularity::Channel {
            cfg.loss_rate = 0.0;
        }
        let record = transmit(bytes, frame, &cfg, &mut self.rng);
        if let Some(at) = record.delivered_frame {
            self.in_flight.insert((at, self.seq), payload);
            self.seq += 1;
        }
        self.records.push(record);
        record
    }

    /// Everything due at or before `frame`, in send order.
    pub fn deliver(&mut self, frame: u64) -> Vec<T> {
        let later = self.in_flight.split_off(&(frame + 1, 0));
        let due = std::mem::replace(&mut self.in_flight, later);
        due.into_values().collect()
    }

    pub fn records(&self) -> &[DeliveryRecord] {
        &self.records
    }
}
