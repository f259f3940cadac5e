//! End-to-end episode: encode, select, request, respond, transmit, fuse, predict.

use crate::error::{Error, Result};
use crate::grid::FeatureGrid;
use crate::harness::encoder::{encode, truth};
use crate::harness::metrics::{iou, EpisodeMetrics, FrameMetrics};
use crate::harness::scenario::Scenario;
use crate::netsim::{apply_loss_mask, bandwidth_mbps, LossGranularity, NetworkChannel, NetworkConfig};
use crate::protocol::{
    decode_request, decode_response, encode_request, fuse, spatial_transform, transform_validity, CompressionConfig,
    Received, ResponseMessage,
};
use crate::relevance::ChannelMask;
use crate::rng::SimRng;
use crate::training::model::{select, Model, Neighbor};
use crate::training::trainer::{TrainingFrame, TrainingScene};

/// How responses reach the ego.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transport {
    /// Decoded the same frame, no network model.
    Direct,
    Simulated(NetworkConfig),
    /// Nothing is exchanged; the ego fuses only its own features.
    EgoOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    pub transport: Transport,
    pub compression: CompressionConfig,
    /// Seeds the network simulator.
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            transport: Transport::Direct,
            compression: CompressionConfig::default(),
            seed: 0,
        }
    }
}

/// Per-frame temporal reference, requested mask and fused output.
#[derive(Debug, Clone, Default)]
pub struct EpisodeTrace {
    pub references: Vec<FeatureGrid>,
    pub masks: Vec<ChannelMask>,
    pub fused: Vec<FeatureGrid>,
}

fn check_dims(scenario: &Scenario, model: &Model) -> Result<()> {
    let cfg = &scenario.config;
    if model.channels() != cfg.channels {
        return Err(Error::DimensionMismatch {
            what: "checkpoint channels",
            expected: cfg.channels,
            actual: model.channels(),
        });
    }
    if model.plane() != cfg.height * cfg.width {
        return Err(Error::DimensionMismatch {
            what: "checkpoint plane",
            expected: cfg.height * cfg.width,
            actual: model.plane(),
        });
    }
    Ok(())
}

struct Link {
    requests: NetworkChannel<Vec<u8>>,
    responses: NetworkChannel<(u64, Vec<u8>)>,
    loss: SimRng,
}

pub fn run_episode(scenario: &Scenario, model: &Model, cfg: &EpisodeConfig) -> Result<EpisodeMetrics> {
    Ok(run_episode_traced(scenario, model, cfg, false)?.0)
}

pub fn run_episode_traced(
    scenario: &Scenario,
    model: &Model,
    cfg: &EpisodeConfig,
    keep_trace: bool,
) -> Result<(EpisodeMetrics, EpisodeTrace)> {
    check_dims(scenario, model)?;
    let sc = &scenario.config;
    let (channels, height, width) = (sc.channels, sc.height, sc.width);
    let net = match cfg.transport {
        Transport::Simulated(n) => n,
        _ => NetworkConfig::default(),
    };
    net.validate()?;
    let root = SimRng::new(cfg.seed);
    let mut links = Vec::new();
    for (k, agent) in sc.agents.iter().enumerate().skip(1) {
        let label = u64::from(agent.id) << 2;
        let mut req_cfg = net;
        req_cfg.loss_rate = 0.0;
        if !net.delay_requests {
            req_cfg.latency_ms = 0.0;
            req_cfg.jitter_ms = 0.0;
        }
        links.push((
            k,
            Link {
                requests: NetworkChannel::new(req_cfg, root.substream(label))?,
                responses: NetworkChannel::new(net, root.substream(label | 1))?,
                loss: root.substream(label | 2),
            },
        ));
    }

    let mut reference = FeatureGrid::zeros(channels, height, width);
    let mut metrics = EpisodeMetrics::default();
    let mut trace = EpisodeTrace::default();
    for t in 0..scenario.frames() {
        let frame_result = (|| -> Result<FrameMetrics> {
            let ego_pose = scenario.pose(0, t);
            let ego = encode(scenario, 0, t);
            let selection = select(model, &ego, &reference)?;
            let fraction = selection.mask.count() as f64 / channels as f64;
            let mut received = Vec::new();
            let (mut loss_events, mut latency, mut payload_bytes) = (0u64, 0u64, 0u64);

            if cfg.transport != Transport::EgoOnly {
                let request = encode_request(sc.agents[0].id, t, &selection.mask, &ego_pose)?;
                for (k, link) in links.iter_mut() {
                    let k = *k;
                    let responder_pose = scenario.pose(k, t);
                    let mut pending = Vec::new();
                    if cfg.transport == Transport::Direct {
                        pending.push(request.clone());
                    } else {
                        link.requests.send(t, &request, request.clone());
                        pending = link.requests.deliver(t);
                    }
                    for bytes in pending {
                        let req = decode_request(&bytes)?;
                        let rel = req.pose.to_pose()?.relative_to_self(&responder_pose);
                        let (warped, _) = spatial_transform(&encode(scenario, k, t), &rel, sc.cell_size)?;
                        let resp = ResponseMessage::build(sc.agents[k].id, req.frame_id, &req.mask, &warped, &cfg.compression)?;
                        payload_bytes += resp.payload.len() as u64;
                        let out = resp.encode()?;
                        if cfg.transport == Transport::Direct {
                            received.push((k, out));
                        } else {
                            let rec = link.responses.send(t, &out, (req.frame_id, out.clone()));
                            match rec.delay_frames() {
                                Some(d) => latency = latency.max(d),
                                None => loss_events += 1,
                            }
                        }
                    }
                    if cfg.transport != Transport::Direct {
                        received.extend(link.responses.deliver(t).into_iter().map(|(_, b)| (k, b)));
                    }
                }
            }

            let mut contributions = Vec::with_capacity(received.len());
            for (k, bytes) in received {
                let msg = decode_response(&bytes)?;
                let grid = msg.to_grid(height, width)?;
                let rel = scenario.pose(0, msg.frame_id).relative_to_self(&scenario.pose(k, msg.frame_id));
                let validity = transform_validity(height, width, &rel, sc.cell_size)?;
                let (grid, mask) = match cfg.transport {
                    Transport::Simulated(n) if n.granularity == LossGranularity::Channel => {
                        let link = &mut links.iter_mut().find(|(i, _)| *i == k).expect("responder link").1;
                        let (g, m) = apply_loss_mask(&grid, &msg.mask, n.loss_rate, &mut link.loss)?;
                        loss_events += (msg.mask.count() - m.count()) as u64;
                        (g, m)
                    }
                    _ => (grid, msg.mask.clone()),
                };
                contributions.push(Received { grid, validity, mask });
            }
            let fused = fuse(&ego, &contributions)?;
            let pred_d = model.dynamic_head.predict(&fused);
            let pred_s = model.static_head.predict(&fused);
            let (truth_d, truth_s) = truth(scenario, t);
            let row = FrameMetrics {
                frame_id: t,
                fraction_selected: fraction,
                bandwidth_mbps: bandwidth_mbps(fraction, &net),
                iou_dynamic: iou(&pred_d, &truth_d)?,
                iou_static: iou(&pred_s, &truth_s)?,
                loss_events,
                latency_frames: latency,
                payload_bytes,
            };
            if keep_trace {
                trace.references.push(reference.clone());
                trace.masks.push(selection.mask.clone());
                trace.fused.push(fused.clone());
            }
            reference = fused;
            Ok(row)
        })();
        metrics.rows.push(frame_result.map_err(|e| e.at_frame(t as usize))?);
    }
    Ok((metrics, trace))
}

/// Full-precision training frames: responders warped into the ego frame.
pub fn training_scene(scenario: &Scenario) -> Result<TrainingScene> {
    let sc = &scenario.config;
    (0..scenario.frames())
        .map(|t| {
            let ego_pose = scenario.pose(0, t);
            let neighbors = (1..sc.agents.len())
                .map(|k| {
                    let rel = ego_pose.relative_to_self(&scenario.pose(k, t));
                    let (grid, validity) = spatial_transform(&encode(scenario, k, t), &rel, sc.cell_size)?;
                    Ok(Neighbor { grid, validity })
                })
                .collect::<Result<Vec<_>>>()?;
            let (truth_dynamic, truth_static) = truth(scenario, t);
            Ok(TrainingFrame {
                ego: encode(scenario, 0, t),
                neighbors,
                truth_dynamic,
                truth_static,
            })
        })
        .collect()
}
