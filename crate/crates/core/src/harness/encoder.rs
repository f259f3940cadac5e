//! Fixed sensor encoder.
//!
//! Channel `k < C/2` senses cars within the agent's visibility radius and
//! reads zero elsewhere. A car is sensed only in frames where the agent's
//! detector fires on it, and with occlusion on it hides the cells behind it
//! along the line of sight. The remaining channels render the road from the
//! shared map over the whole grid. Within each half, channel `j` convolves
//! its presence raster with a peak-one Gaussian of width `SIGMAS[j % 4]`
//! (0 means a single-cell delta) centered at offset `OFFSETS[(j / 4) % 8]`
//! (rows, cols), scaled by `GAINS[(j / 4) % 4]`.

use crate::grid::FeatureGrid;
use crate::harness::scenario::{world_point, Scenario};
use crate::protocol::Pose;

pub const SIGMAS: [f64; 4] = [0.0, 0.7, 1.2, 2.0];
pub const GAINS: [f64; 4] = [1.0, 0.7, 0.45, 0.25];
pub const OFFSETS: [(i64, i64); 8] = [(0, 0), (0, 1), (1, 0), (0, -1), (-1, 0), (1, 1), (-1, -1), (1, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Dynamic,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub source: Source,
    pub sigma: f64,
    pub offset: (i64, i64),
    pub gain: f64,
}

pub fn channel_specs(channels: usize) -> Vec<ChannelSpec> {
    let half = channels / 2;
    (0..channels)
        .map(|k| {
            let (source, j) = if k < half {
                (Source::Dynamic, k)
            } else {
                (Source::Static, k - half)
            };
            ChannelSpec {
                source,
                sigma: SIGMAS[j % SIGMAS.len()],
                offset: OFFSETS[(j / SIGMAS.len()) % OFFSETS.len()],
                gain: GAINS[(j / SIGMAS.len()) % GAINS.len()],
            }
        })
        .collect()
}

/// World-raster (col, row) of every local cell of an agent at `pose`.
fn local_to_world(scenario: &Scenario, pose: &Pose) -> Vec<(f64, f64)> {
    let cfg = &scenario.config;
    let (cx, cy) = ((cfg.width as f64 - 1.0) / 2.0, (cfg.height as f64 - 1.0) / 2.0);
    let (s, c) = pose.yaw.sin_cos();
    let mut out = Vec::with_capacity(cfg.height * cfg.width);
    for r in 0..cfg.height {
        for col in 0..cfg.width {
            let (xl, yl) = ((col as f64 - cx) * cfg.cell_size, (r as f64 - cy) * cfg.cell_size);
            out.push(world_point(cfg, c * xl - s * yl + pose.x, s * xl + c * yl + pose.y));
        }
    }
    out
}

fn nearest(world: (f64, f64), height: usize, width: usize) -> Option<usize> {
    let (x, y) = (world.0.round(), world.1.round());
    (x >= 0.0 && y >= 0.0 && (x as usize) < width && (y as usize) < height).then(|| y as usize * width + x as usize)
}

/// Features agent `agent` senses at `frame`, in its own frame.
pub fn encode(scenario: &Scenario, agent: usize, frame: u64) -> FeatureGrid {
    let cfg = &scenario.config;
    let world = &scenario.world;
    let pose = scenario.pose(agent, frame);
    let (ax, ay) = world_point(cfg, pose.x, pose.y);
    let radius = cfg.visibility_radius / cfg.cell_size;
    let active = cfg.active_objects(frame);
    let cars = world.dynamic_raster(frame, active);
    let fired = &scenario.detections[agent][frame as usize];
    let detected = world.raster_where(frame, active, |i| fired[i]);
    let occupied = |col: f64, row: f64| nearest((col, row), world.height, world.width).is_some_and(|i| cars[i]);
    let visible = |col: f64, row: f64| {
        let d = ((col - ax).powi(2) + (row - ay).powi(2)).sqrt();
        if d > radius {
            return false;
        }
        if !cfg.occlusion {
            return true;
        }
        let target = (col.round(), row.round());
        let steps = (d * 4.0).ceil() as usize;
        (1..steps).all(|i| {
            let t = i as f64 / steps as f64;
            let (x, y) = ((ax + t * (col - ax)).round(), (ay + t * (row - ay)).round());
            (x, y) == target || !occupied(x, y)
        })
    };

    let cells = local_to_world(scenario, &pose);
    let plane = cells.len();
    let specs = channel_specs(cfg.channels);
    let mut values = vec![0.0; cfg.channels * plane];
    for (k, spec) in specs.iter().enumerate() {
        let present = |i: usize| -> bool {
            match spec.source {
                Source::Dynamic => {
                    let (row, col) = ((i / world.width) as f64, (i % world.width) as f64);
                    detected[i] && visible(col, row)
                }
                Source::Static => world.road[i],
            }
        };
        let sources: Vec<(f64, f64)> = (0..world.height * world.width)
            .filter(|&i| present(i))
            .map(|i| ((i % world.width) as f64, (i / world.width) as f64))
            .collect();
        if sources.is_empty() {
            continue;
        }
        let (dr, dc) = (spec.offset.0 as f64, spec.offset.1 as f64);
        for (p, &(wx, wy)) in cells.iter().enumerate() {
            if spec.source == Source::Dynamic && !visible(wx, wy) {
                continue;
            }
            let (qx, qy) = (wx - dc, wy - dr);
            let v = if spec.sigma == 0.0 {
                match nearest((qx, qy), world.height, world.width) {
                    Some(i) if present(i) => 1.0,
                    _ => 0.0,
                }
            } else {
                let reach = 3.0 * spec.sigma;
                let inv = 1.0 / (2.0 * spec.sigma * spec.sigma);
                sources
                    .iter()
                    .filter(|(x, y)| (x - qx).abs() <= reach && (y - qy).abs() <= reach)
                    .map(|(x, y)| (-((x - qx).powi(2) + (y - qy).powi(2)) * inv).exp())
                    .sum()
            };
            values[k * plane + p] = spec.gain * v;
        }
    }
    FeatureGrid::new(cfg.channels, cfg.height, cfg.width, values).expect("encoder output is finite")
}

/// Ground truth (cars, road) on the ego's grid at `frame`.
pub fn truth(scenario: &Scenario, frame: u64) -> (Vec<bool>, Vec<bool>) {
    let cfg = &scenario.config;
    let world = &scenario.world;
    let cars = world.dynamic_raster(frame, cfg.active_objects(frame));
    let cells = local_to_world(scenario, &scenario.pose(0, frame));
    let lookup = |raster: &[bool]| -> Vec<bool> {
        cells
            .iter()
            .map(|&w| nearest(w, world.height, world.width).is_some_and(|i| raster[i]))
            .collect()
    };
    (lookup(&cars), lookup(&world.road))
}
