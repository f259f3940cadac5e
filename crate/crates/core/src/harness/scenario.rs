//! Synthetic road scenes.
//!
//! The world is a raster in the ego's initial frame, one cell per meter,
//! extending `margin` cells past the ego grid on every side. Roads are two
//! lanes wide; lane cars move one cell per frame and wrap at the world edge.
//! The number of active cars follows a piecewise-constant phase schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::Pose;
use crate::rng::SimRng;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: u32,
    /// x (columns), y (rows), yaw in radians, at frame 0.
    pub pose: [f64; 3],
    /// Cells per frame.
    #[serde(default)]
    pub velocity: [f64; 2],
}

/// Active car count from `start_frame` until the next phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub start_frame: u64,
    pub dynamic_objects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub seed: u64,
    pub frames: u64,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub cell_size: f64,
    pub visibility_radius: f64,
    /// Cars block the line of sight to cells behind them.
    pub occlusion: bool,
    /// Chance that an agent detects a visible car in a given frame.
    pub detection_prob: f64,
    /// Cells each car covers along its lane.
    pub car_length: usize,
    pub margin: usize,
    /// First lane row (ego grid coordinates) of each east-west road.
    pub horizontal_roads: Vec<i64>,
    /// First lane column (ego grid coordinates) of each north-south road.
    pub vertical_roads: Vec<i64>,
    pub agents: Vec<AgentSpec>,
    pub phases: Vec<Phase>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            version: SCENARIO_VERSION,
            seed: 0,
            frames: 40,
            channels: 32,
            height: 16,
            width: 16,
            cell_size: 1.0,
            visibility_radius: 6.0,
            occlusion: false,
            detection_prob: 0.7,
            car_length: 2,
            margin: 8,
            horizontal_roads: vec![7],
            vertical_roads: vec![],
            agents: vec![
                AgentSpec {
                    id: 0,
                    pose: [0.0, 0.0, 0.0],
                    velocity: [0.0, 0.0],
                },
                AgentSpec {
                    id: 1,
                    pose: [8.0, 0.0, 0.0],
                    velocity: [0.0, 0.0],
                },
                AgentSpec {
                    id: 2,
                    pose: [-8.0, 0.0, 0.0],
                    velocity: [0.0, 0.0],
                },
            ],
            phases: vec![Phase {
                start_frame: 0,
                dynamic_objects: 0,
            }],
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.version != SCENARIO_VERSION {
            return bad(format!("unsupported scenario version {}", self.version));
        }
        if self.frames == 0 || self.channels < 2 || self.height == 0 || self.width == 0 {
            return bad("frames, height and width must be positive and channels at least 2".into());
        }
        if self.channels > u16::MAX as usize {
            return bad(format!("{} channels exceed the wire limit", self.channels));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return bad(format!("cell_size must be positive, got {}", self.cell_size));
        }
        if self.car_length == 0 {
            return bad("car_length must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.detection_prob) {
            return bad(format!("detection_prob {} outside [0, 1]", self.detection_prob));
        }
        if !(self.visibility_radius >= 0.0 && self.visibility_radius.is_finite()) {
            return bad(format!("visibility_radius must be non-negative, got {}", self.visibility_radius));
        }
        if self.agents.is_empty() {
            return bad("at least one agent (the ego) is required".into());
        }
        let mut ids: Vec<u32> = self.agents.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.agents.len() {
            return bad("agent ids must be unique".into());
        }
        for a in &self.agents {
            if a.pose.iter().chain(&a.velocity).any(|v| !v.is_finite()) {
                return bad(format!("agent {} has a non-finite pose or velocity", a.id));
            }
        }
        if self.phases.first().map(|p| p.start_frame) != Some(0) {
            return bad("the first phase must start at frame 0".into());
        }
        if self.phases.windows(2).any(|w| w[1].start_frame <= w[0].start_frame) {
            return bad("phase start frames must increase".into());
        }
        let (wh, ww) = self.world_dims();
        for &r in &self.horizontal_roads {
            if r + (self.margin as i64) < 0 || r + self.margin as i64 + 1 >= wh as i64 {
                return bad(format!("horizontal road at row {r} lies outside the world"));
            }
        }
        for &c in &self.vertical_roads {
            if c + (self.margin as i64) < 0 || c + self.margin as i64 + 1 >= ww as i64 {
                return bad(format!("vertical road at column {c} lies outside the world"));
            }
        }
        if self.max_objects() > 0 && self.horizontal_roads.is_empty() && self.vertical_roads.is_empty() {
            return bad("dynamic objects need at least one road".into());
        }
        Ok(())
    }

    pub fn world_dims(&self) -> (usize, usize) {
        (self.height + 2 * self.margin, self.width + 2 * self.margin)
    }

    fn max_objects(&self) -> usize {
        self.phases.iter().map(|p| p.dynamic_objects).max().unwrap_or(0)
    }

    pub fn active_objects(&self, frame: u64) -> usize {
        self.phases
            .iter()
            .rev()
            .find(|p| p.start_frame <= frame)
            .map_or(0, |p| p.dynamic_objects)
    }

    /// Quiet first half, busy second half.
    pub fn two_phase(seed: u64, frames: u64, quiet: usize, busy: usize) -> Self {
        Self {
            seed,
            frames,
            phases: vec![
                Phase {
                    start_frame: 0,
                    dynamic_objects: quiet,
                },
                Phase {
                    start_frame: frames / 2,
                    dynamic_objects: busy,
                },
            ],
            ..Self::default()
        }
    }
}

/// A lane: cells along one row or column of the world raster, with direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lane {
    pub horizontal: bool,
    /// World row (horizontal) or column (vertical).
    pub index: usize,
    pub forward: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DynamicObject {
    pub lane: usize,
    /// Position along the lane at frame 0.
    pub start: usize,
}

/// Static road raster, lanes and cars.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub height: usize,
    pub width: usize,
    pub margin: usize,
    pub road: Vec<bool>,
    pub lanes: Vec<Lane>,
    pub objects: Vec<DynamicObject>,
    pub car_length: usize,
    /// World-cell centers of road crossings.
    pub junctions: Vec<(f64, f64)>,
}

impl World {
    fn lane_len(&self, lane: &Lane) -> usize {
        if lane.horizontal {
            self.width
        } else {
            self.height
        }
    }

    /// World cell (row, col) of object `i` at `frame`.
    pub fn object_cell(&self, i: usize, frame: u64) -> (usize, usize) {
        let obj = self.objects[i];
        let lane = self.lanes[obj.lane];
        let len = self.lane_len(&lane) as u64;
        let step = frame % len;
        let pos = if lane.forward {
            (obj.start as u64 + step) % len
        } else {
            (obj.start as u64 + len - step) % len
        } as usize;
        if lane.horizontal {
            (lane.index, pos)
        } else {
            (pos, lane.index)
        }
    }

    /// Cells covered by object `i` at `frame`: its head cell and the
    /// `car_length - 1` cells trailing it along the lane.
    pub fn object_cells(&self, i: usize, frame: u64) -> Vec<(usize, usize)> {
        let lane = self.lanes[self.objects[i].lane];
        let len = self.lane_len(&lane);
        let (r, c) = self.object_cell(i, frame);
        let head = if lane.horizontal { c } else { r };
        (0..self.car_length)
            .map(|k| {
                let pos = if lane.forward { (head + len - k) % len } else { (head + k) % len };
                if lane.horizontal {
                    (r, pos)
                } else {
                    (pos, c)
                }
            })
            .collect()
    }

    /// Occupancy raster of the cars whose index passes `keep`, among the first `active`.
    pub fn raster_where(&self, frame: u64, active: usize, keep: impl Fn(usize) -> bool) -> Vec<bool> {
        let mut out = vec![false; self.height * self.width];
        for i in (0..active.min(self.objects.len())).filter(|&i| keep(i)) {
            for (r, c) in self.object_cells(i, frame) {
                out[r * self.width + c] = true;
            }
        }
        out
    }

    /// Occupancy raster of the first `active` cars.
    pub fn dynamic_raster(&self, frame: u64, active: usize) -> Vec<bool> {
        self.raster_where(frame, active, |_| true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub world: World,
    /// Per-frame pose of every agent, indexed like `config.agents`.
    pub trajectories: Vec<Vec<Pose>>,
    /// `detections[agent][frame][object]`: whether the agent's sensor fires on that car.
    pub detections: Vec<Vec<Vec<bool>>>,
    pub complexity_schedule: Vec<u64>,
}

impl Scenario {
    pub fn frames(&self) -> u64 {
        self.config.frames
    }

    pub fn pose(&self, agent: usize, frame: u64) -> Pose {
        self.trajectories[agent][frame as usize]
    }

    /// Ego (agent 0) pose in world-cell coordinates (col, row) at `frame`.
    fn ego_center(&self, frame: u64) -> (f64, f64) {
        let p = self.pose(0, frame);
        world_point(&self.config, p.x, p.y)
    }
}

/// World-raster (col, row) of a point given in meters in the world frame.
pub(crate) fn world_point(cfg: &ScenarioConfig, x: f64, y: f64) -> (f64, f64) {
    let cx = (cfg.width as f64 - 1.0) / 2.0 + cfg.margin as f64;
    let cy = (cfg.height as f64 - 1.0) / 2.0 + cfg.margin as f64;
    (x / cfg.cell_size + cx, y / cfg.cell_size + cy)
}

fn build_world(cfg: &ScenarioConfig, rng: &mut SimRng) -> World {
    let (height, width) = cfg.world_dims();
    let m = cfg.margin as i64;
    let mut road = vec![false; height * width];
    let mut lanes = Vec::new();
    for &r in &cfg.horizontal_roads {
        let row = (r + m) as usize;
        for (k, lane_row) in [row, row + 1].into_iter().enumerate() {
            road[lane_row * width..(lane_row + 1) * width].fill(true);
            lanes.push(Lane {
                horizontal: true,
                index: lane_row,
                forward: k == 0,
            });
        }
    }
    for &c in &cfg.vertical_roads {
        let col = (c + m) as usize;
        for (k, lane_col) in [col, col + 1].into_iter().enumerate() {
            for r in 0..height {
                road[r * width + lane_col] = true;
            }
            lanes.push(Lane {
                horizontal: false,
                index: lane_col,
                forward: k == 1,
            });
        }
    }
    let mut junctions = Vec::new();
    for &r in &cfg.horizontal_roads {
        for &c in &cfg.vertical_roads {
            junctions.push(((c + m) as f64 + 0.5, (r + m) as f64 + 0.5));
        }
    }
    let n = cfg.max_objects();
    let mut objects = Vec::with_capacity(n);
    if !lanes.is_empty() {
        for i in 0..n {
            let lane = i % lanes.len();
            let len = if lanes[lane].horizontal { width } else { height };
            objects.push(DynamicObject {
                lane,
                start: rng.below(len),
            });
        }
    }
    World {
        height,
        width,
        margin: cfg.margin,
        road,
        lanes,
        objects,
        car_length: cfg.car_length,
        junctions,
    }
}

/// Scene for the config's own seed.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    generate_scenario(cfg.seed, cfg)
}

/// Deterministic scene for `(seed, cfg)`; the config's own seed is ignored.
pub fn generate_scenario(seed: u64, cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = SimRng::new(seed).substream(0x5ce7);
    let world = build_world(cfg, &mut rng);
    let trajectories = cfg
        .agents
        .iter()
        .map(|a| {
            (0..cfg.frames)
                .map(|t| {
                    let t = t as f64;
                    Pose::new(
                        a.pose[0] + a.velocity[0] * t * cfg.cell_size,
                        a.pose[1] + a.velocity[1] * t * cfg.cell_size,
                        a.pose[2],
                    )
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let detections = cfg
        .agents
        .iter()
        .map(|_| {
            (0..cfg.frames)
                .map(|_| (0..world.objects.len()).map(|_| rng.bernoulli(cfg.detection_prob)).collect())
                .collect()
        })
        .collect();
    let mut scenario = Scenario {
        config: cfg.clone(),
        world,
        trajectories,
        detections,
        complexity_schedule: Vec::new(),
    };
    scenario.complexity_schedule = (0..cfg.frames)
        .map(|t| {
            let (ex, ey) = scenario.ego_center(t);
            let visible = scenario
                .world
                .junctions
                .iter()
                .filter(|(jx, jy)| ((jx - ex).powi(2) + (jy - ey).powi(2)).sqrt() <= cfg.visibility_radius)
                .count();
            (cfg.active_objects(t) + visible) as u64
        })
        .collect();
    Ok(scenario)
}
