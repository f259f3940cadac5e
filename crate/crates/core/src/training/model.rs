//! The learnable selection pipeline plus a toy segmentation head, with a
//! hand-derived backward pass.
//!
//! Forward: scores → quantile gate → per-channel uncertainty → attention
//! relevance → channel mask → masked fusion with responders → task heads.
//! Training runs the hard forward and backpropagates through logistic
//! surrogates of both thresholds (straight-through); the fully relaxed mode
//! evaluates the surrogate itself so finite differences can check the
//! gradients.

use crate::error::{Error, Result};
use crate::grid::{l1_deviation, FeatureGrid};
use crate::protocol::Validity;
use crate::relevance::{attention_backward, attention_forward, AttentionParams, ChannelMask, MaskThreshold};
use crate::rng::SimRng;
use crate::training::egreedy::BatchKind;
use crate::training::lagrange::PenaltyMode;
use crate::uncertainty::{interpolated_quantile, logistic, nearest_rank, ChannelReduction, QuantileGate};

/// Per-cell logit `Σ_c w_c·F[c, r, col] + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTaskHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ToyTaskHead {
    pub fn init(channels: usize, rng: &mut SimRng) -> Self {
        let bound = 1.0 / (channels as f64).sqrt();
        Self {
            weights: (0..channels).map(|_| rng.uniform_in(-bound, bound)).collect(),
            bias: 0.0,
        }
    }

    pub fn logits(&self, fused: &FeatureGrid) -> Vec<f64> {
        let plane = fused.plane();
        let mut z = vec![self.bias; plane];
        for (c, w) in self.weights.iter().enumerate() {
            for (zi, f) in z.iter_mut().zip(fused.channel(c)) {
                *zi += w * f;
            }
        }
        z
    }

    /// Cells with positive logit.
    pub fn predict(&self, fused: &FeatureGrid) -> Vec<bool> {
        self.logits(fused).into_iter().map(|z| z > 0.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub gate: QuantileGate,
    pub threshold: MaskThreshold,
    pub attention: AttentionParams,
    pub reduction: ChannelReduction,
    pub dynamic_head: ToyTaskHead,
    pub static_head: ToyTaskHead,
}

impl Model {
    /// Projections U(±1/√fan_in); both thresholds start at zero (quantile level 0.5).
    pub fn init(channels: usize, plane: usize, d_k: usize, d_v: usize, rng: &mut SimRng) -> Self {
        Self {
            gate: QuantileGate::default(),
            threshold: MaskThreshold::default(),
            attention: AttentionParams::init(plane, d_k, d_v, rng),
            reduction: ChannelReduction::Mean,
            dynamic_head: ToyTaskHead::init(channels, rng),
            static_head: ToyTaskHead::init(channels, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.dynamic_head.weights.len()
    }

    pub fn plane(&self) -> usize {
        self.attention.plane()
    }

    /// Same shape, all parameters zero.
    pub fn zeros_like(&self) -> Self {
        let c = self.channels();
        Self {
            gate: QuantileGate::new(0.0),
            threshold: MaskThreshold::new(0.0),
            attention: self.attention.zeros_like(),
            reduction: self.reduction,
            dynamic_head: ToyTaskHead {
                weights: vec![0.0; c],
                bias: 0.0,
            },
            static_head: ToyTaskHead {
                weights: vec![0.0; c],
                bias: 0.0,
            },
        }
    }

    pub fn param_count(&self) -> usize {
        2 + self.attention.maps().iter().map(|m| m.param_count()).sum::<usize>() + 2 * (self.channels() + 1)
    }

    /// Flat parameter order: raw_level, raw_tau, query/key/value/out projections
    /// (weights then bias), dynamic head, static head (weights then bias).
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.push(self.gate.raw_level);
        v.push(self.threshold.raw_tau);
        for m in self.attention.maps() {
            v.extend(m.params());
        }
        for head in [&self.dynamic_head, &self.static_head] {
            v.extend(&head.weights);
            v.push(head.bias);
        }
        v
    }

    pub fn set_from_slice(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                what: "flat parameter vector",
                expected: self.param_count(),
                actual: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        let mut next = || it.next().expect("length checked");
        self.gate.raw_level = next();
        self.threshold.raw_tau = next();
        for m in self.attention.maps_mut() {
            for p in m.params_mut() {
                *p = next();
            }
        }
        for head in [&mut self.dynamic_head, &mut self.static_head] {
            for w in head.weights.iter_mut() {
                *w = next();
            }
            head.bias = next();
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

/// A responder's features already warped into the ego frame.
#[derive(Debug, Clone)]
pub struct Neighbor {
    pub grid: FeatureGrid,
    pub validity: Validity,
}

/// One training/evaluation frame as seen by the ego.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub ego: &'a FeatureGrid,
    /// Previous fused frame (zeros at frame 0).
    pub reference: &'a FeatureGrid,
    pub neighbors: &'a [Neighbor],
    pub truth_dynamic: &'a [bool],
    pub truth_static: &'a [bool],
}

/// How thresholds behave in the forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relaxation {
    /// Hard thresholds, no gradients.
    Hard,
    /// Hard forward, logistic-surrogate backward.
    StraightThrough { temperature: f64 },
    /// Logistic surrogates forward and backward.
    Relaxed { temperature: f64 },
}

/// Straight-through surrogates evaluate their slope with the logit clamped to
/// this many temperatures, so saturated channels and thresholds keep a small
/// gradient.
pub const STRAIGHT_THROUGH_WINDOW: f64 = 4.0;

/// Logistic slope at `x`, clamped to the straight-through window unless `exact`.
fn surrogate_slope(x: f64, exact: bool) -> f64 {
    let x = if exact {
        x
    } else {
        x.clamp(-STRAIGHT_THROUGH_WINDOW, STRAIGHT_THROUGH_WINDOW)
    };
    let s = logistic(x);
    s * (1.0 - s)
}

impl Relaxation {
    fn temperature(&self) -> Option<f64> {
        match *self {
            Relaxation::Hard => None,
            Relaxation::StraightThrough { temperature } | Relaxation::Relaxed { temperature } => Some(temperature),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Task loss plus the bandwidth penalty.
    Task {
        lambda: f64,
        c_target: f64,
        penalty: PenaltyMode,
        /// Fraction at which the penalty slope is taken; `None` uses this
        /// pass's own fraction. Lets a running mean decide which side of the
        /// target the budget is on.
        slope_at: Option<f64>,
    },
    /// Sum of the soft mask; isolates the selection pipeline.
    SoftMaskSum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassSettings {
    pub relaxation: Relaxation,
    pub batch: BatchKind,
    pub objective: Objective,
}

/// Results of one forward pass.
#[derive(Debug, Clone)]
pub struct PassOutput {
    pub quantile: f64,
    pub uncertainty: Vec<f64>,
    pub relevance: Vec<f64>,
    /// The model's own hard selection (before any FULL override).
    pub mask: ChannelMask,
    /// Mask fraction entering the penalty (hard, or soft when relaxed).
    pub fraction: f64,
    pub fused: FeatureGrid,
    pub task_loss: f64,
    pub total: f64,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn bce(logits: &[f64], truth: &[bool]) -> f64 {
    logits
        .iter()
        .zip(truth)
        .map(|(&z, &y)| softplus(z) - if y { z } else { 0.0 })
        .sum::<f64>()
        / logits.len() as f64
}

/// Masked uniform average of the ego with every valid, selected neighbor.
///
/// `mask[c]` may be fractional (relaxed training); at 0/1 this is exactly
/// [`crate::protocol::fuse`]. Returns the fused values and per-cell denominators.
pub(crate) fn soft_fuse(ego: &FeatureGrid, neighbors: &[Neighbor], mask: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let plane = ego.plane();
    let mut fused = ego.values().to_vec();
    let mut denom = vec![1.0; fused.len()];
    if neighbors.is_empty() {
        return (fused, denom);
    }
    for c in 0..ego.channels() {
        let m = mask[c];
        if m == 0.0 {
            continue;
        }
        for p in 0..plane {
            let idx = c * plane + p;
            let mut num = ego.values()[idx];
            let mut den = 1.0;
            for nb in neighbors {
                if nb.validity.cells()[p] {
                    num += m * nb.grid.values()[idx];
                    den += m;
                }
            }
            fused[idx] = num / den;
            denom[idx] = den;
        }
    }
    (fused, denom)
}

fn check_sample(model: &Model, s: &Sample<'_>) -> Result<()> {
    s.ego.same_shape(s.reference)?;
    if s.ego.channels() != model.channels() {
        return Err(Error::DimensionMismatch {
            what: "model channels",
            expected: model.channels(),
            actual: s.ego.channels(),
        });
    }
    for nb in s.neighbors {
        s.ego.same_shape(&nb.grid)?;
    }
    for truth in [s.truth_dynamic, s.truth_static] {
        if truth.len() != s.ego.plane() {
            return Err(Error::DimensionMismatch {
                what: "truth grid cells",
                expected: s.ego.plane(),
                actual: truth.len(),
            });
        }
    }
    Ok(())
}

/// Hard selection only, no fusion: what the ego puts in its request.
#[derive(Debug, Clone)]
pub struct Selection {
    pub quantile: f64,
    pub uncertainty: Vec<f64>,
    pub relevance: Vec<f64>,
    pub mask: ChannelMask,
}

/// Inference-time selection against the stored temporal reference.
pub fn select(model: &Model, ego: &FeatureGrid, reference: &FeatureGrid) -> Result<Selection> {
    let scores = l1_deviation(ego, reference)?;
    let level = model.gate.level();
    let mut sorted = scores.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = sorted[nearest_rank(level, sorted.len()) - 1];
    let plane = ego.plane();
    let u: Vec<f64> = (0..ego.channels())
        .map(|c| reduce_hard(scores.channel(c), q, model.reduction, plane))
        .collect();
    let cache = attention_forward(&u, ego, &model.attention)?;
    let tau = model.threshold.tau();
    let mask = ChannelMask::new(cache.relevance.iter().map(|&r| r > tau).collect());
    Ok(Selection {
        quantile: q,
        uncertainty: u,
        relevance: cache.relevance,
        mask,
    })
}

fn reduce_hard(scores: &[f64], q: f64, reduction: ChannelReduction, plane: usize) -> f64 {
    let gated = scores.iter().map(|&s| if s > q { s } else { 0.0 });
    match reduction {
        ChannelReduction::Mean => gated.sum::<f64>() / plane as f64,
        ChannelReduction::Max => gated.fold(0.0, f64::max),
        ChannelReduction::FractionAbove => gated.filter(|&g| g > 0.0).count() as f64 / plane as f64,
    }
}

/// Runs one forward pass and, unless `relaxation` is [`Relaxation::Hard`],
/// returns parameter gradients shaped like `model`.
pub fn forward_backward(model: &Model, s: &Sample<'_>, settings: &PassSettings) -> Result<(PassOutput, Option<Model>)> {
    check_sample(model, s)?;
    let (channels, _, _) = s.ego.dims();
    let plane = s.ego.plane();
    let temperature = settings.relaxation.temperature();
    if let Some(t) = temperature {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("temperature must be positive, got {t}")));
        }
    }
    let relaxed = matches!(settings.relaxation, Relaxation::Relaxed { .. });

    // nonconformity scores and the quantile threshold
    let scores = l1_deviation(s.ego, s.reference)?;
    let level = model.gate.level();
    let mut sorted = scores.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let (q_interp, q_slope) = interpolated_quantile(&sorted, level);
    let q = if relaxed {
        q_interp
    } else {
        sorted[nearest_rank(level, sorted.len()) - 1]
    };

    // gate weights: soft logistic when relaxed, strict indicator otherwise
    let gate_t = temperature.unwrap_or(1.0);
    let gate: Vec<f64> = if relaxed {
        scores.values().iter().map(|&v| logistic((v - q) / gate_t)).collect()
    } else {
        scores.values().iter().map(|&v| if v > q { 1.0 } else { 0.0 }).collect()
    };
    let mut u = vec![0.0; channels];
    let mut argmax = vec![0usize; channels];
    for c in 0..channels {
        let range = c * plane..(c + 1) * plane;
        let (sv, gv) = (&scores.values()[range.clone()], &gate[range]);
        u[c] = match model.reduction {
            ChannelReduction::Mean => sv.iter().zip(gv).map(|(a, g)| a * g).sum::<f64>() / plane as f64,
            ChannelReduction::Max => {
                let (i, m) = sv
                    .iter()
                    .zip(gv)
                    .map(|(a, g)| a * g)
                    .enumerate()
                    .fold((0, 0.0), |acc, (i, x)| if x > acc.1 { (i, x) } else { acc });
                argmax[c] = i;
                m
            }
            ChannelReduction::FractionAbove => gv.iter().sum::<f64>() / plane as f64,
        };
    }

    let cache = attention_forward(&u, s.ego, &model.attention)?;
    let tau = model.threshold.tau();
    let hard: Vec<bool> = cache.relevance.iter().map(|&r| r > tau).collect();
    let mask_t = temperature.unwrap_or(1.0);
    let soft: Vec<f64> = cache.relevance.iter().map(|&r| logistic((r - tau) / mask_t)).collect();
    let model_mask: Vec<f64> = if relaxed {
        soft.clone()
    } else {
        hard.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    };
    let used_mask: Vec<f64> = match settings.batch {
        BatchKind::Full => vec![1.0; channels],
        BatchKind::Partial => model_mask.clone(),
    };
    let fraction = model_mask.iter().sum::<f64>() / channels as f64;

    let (fused_vals, denom) = soft_fuse(s.ego, s.neighbors, &used_mask);
    let fused = FeatureGrid::from_parts(s.ego.dims(), fused_vals);

    let (task_loss, penalty, penalty_slope, logits) = match settings.objective {
        Objective::Task {
            lambda,
            c_target,
            penalty,
            slope_at,
        } => {
            let zd = model.dynamic_head.logits(&fused);
            let zs = model.static_head.logits(&fused);
            let task = bce(&zd, s.truth_dynamic) + bce(&zs, s.truth_static);
            (
                task,
                penalty.value(lambda, fraction, c_target),
                penalty.slope(lambda, slope_at.unwrap_or(fraction), c_target),
                Some((zd, zs)),
            )
        }
        Objective::SoftMaskSum => (0.0, 0.0, 0.0, None),
    };
    let total = match settings.objective {
        Objective::Task { .. } => task_loss + penalty,
        Objective::SoftMaskSum => soft.iter().sum(),
    };
    let output = PassOutput {
        quantile: q,
        uncertainty: u.clone(),
        relevance: cache.relevance.clone(),
        mask: ChannelMask::new(hard),
        fraction,
        fused,
        task_loss,
        total,
    };
    let Some(temperature) = temperature else {
        return Ok((output, None));
    };

    // ---- backward ----
    let mut grads = model.zeros_like();
    let mut g_mask = vec![0.0; channels];
    match settings.objective {
        Objective::SoftMaskSum => g_mask.fill(1.0),
        Objective::Task { .. } => {
            let (zd, zs) = logits.as_ref().expect("task objective has logits");
            let mut g_fused = vec![0.0; channels * plane];
            for (head, g_head, z, truth) in [
                (&model.dynamic_head, &mut grads.dynamic_head, zd, s.truth_dynamic),
                (&model.static_head, &mut grads.static_head, zs, s.truth_static),
            ] {
                let dz: Vec<f64> = z
                    .iter()
                    .zip(truth)
                    .map(|(&zi, &y)| (logistic(zi) - if y { 1.0 } else { 0.0 }) / plane as f64)
                    .collect();
                g_head.bias += dz.iter().sum::<f64>();
                for c in 0..channels {
                    let fc = output.fused.channel(c);
                    g_head.weights[c] += fc.iter().zip(&dz).map(|(f, d)| f * d).sum::<f64>();
                    let w = head.weights[c];
                    for (g, d) in g_fused[c * plane..(c + 1) * plane].iter_mut().zip(&dz) {
                        *g += w * d;
                    }
                }
            }
            if settings.batch == BatchKind::Partial && !s.neighbors.is_empty() {
                for c in 0..channels {
                    let mut acc = 0.0;
                    for p in 0..plane {
                        let idx = c * plane + p;
                        let f = output.fused.values()[idx];
                        let mut d = 0.0;
                        for nb in s.neighbors {
                            if nb.validity.cells()[p] {
                                d += nb.grid.values()[idx] - f;
                            }
                        }
                        acc += g_fused[idx] * d / denom[idx];
                    }
                    g_mask[c] = acc;
                }
            }
            let per_channel = penalty_slope / channels as f64;
            g_mask.iter_mut().for_each(|g| *g += per_channel);
        }
    }

    // mask → relevance and τ through the logistic surrogate
    let mut g_rel = vec![0.0; channels];
    let mut g_tau = 0.0;
    for c in 0..channels {
        let d = g_mask[c] * surrogate_slope((cache.relevance[c] - tau) / temperature, relaxed) / temperature;
        g_rel[c] = d;
        g_tau -= d;
    }
    grads.threshold.raw_tau = g_tau;

    let g_u = attention_backward(&u, s.ego, &model.attention, &cache, &g_rel, &mut grads.attention);

    // uncertainty → q → quantile level
    let mut g_q = 0.0;
    for c in 0..channels {
        if g_u[c] == 0.0 {
            continue;
        }
        let base = c * plane;
        match model.reduction {
            ChannelReduction::Mean => {
                let scale = g_u[c] / plane as f64;
                for p in 0..plane {
                    let v = scores.values()[base + p];
                    g_q -= scale * v * surrogate_slope((v - q) / gate_t, relaxed) / gate_t;
                }
            }
            ChannelReduction::Max => {
                let v = scores.values()[base + argmax[c]];
                g_q -= g_u[c] * v * surrogate_slope((v - q) / gate_t, relaxed) / gate_t;
            }
            ChannelReduction::FractionAbove => {
                let scale = g_u[c] / plane as f64;
                for p in 0..plane {
                    let v = scores.values()[base + p];
                    g_q -= scale * surrogate_slope((v - q) / gate_t, relaxed) / gate_t;
                }
            }
        }
    }
    grads.gate.raw_level = g_q * q_slope * model.gate.level_derivative();

    Ok((output, Some(grads)))
}

/// Hard inference pass: selection, fusion with the selected channels, and heads.
pub fn evaluate(model: &Model, s: &Sample<'_>) -> Result<PassOutput> {
    let settings = PassSettings {
        relaxation: Relaxation::Hard,
        batch: BatchKind::Partial,
        objective: Objective::Task {
            lambda: 0.0,
            c_target: 0.0,
            penalty: PenaltyMode::Signed,
            slope_at: None,
        },
    };
    Ok(forward_backward(model, s, &settings)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{fuse, Received};
    use crate::training::gradcheck::grad_check;

    pub(crate) struct Fixture {
        pub model: Model,
        pub ego: FeatureGrid,
        pub reference: FeatureGrid,
        pub neighbors: Vec<Neighbor>,
        pub truth_d: Vec<bool>,
        pub truth_s: Vec<bool>,
    }

    pub(crate) fn fixture(seed: u64, c: usize, h: usize, w: usize) -> Fixture {
        let mut rng = SimRng::new(seed);
        let mut model = Model::init(c, h * w, 3, 3, &mut rng);
        model.gate.raw_level = rng.uniform_in(-1.0, 1.0);
        model.threshold.raw_tau = rng.uniform_in(-0.3, 0.3);
        let ego = FeatureGrid::from_fn(c, h, w, |_, _, _| rng.uniform_in(0.0, 1.0)).unwrap();
        let reference = FeatureGrid::from_fn(c, h, w, |_, _, _| rng.uniform_in(0.0, 1.0)).unwrap();
        let neighbors = (0..2)
            .map(|_| {
                let grid = FeatureGrid::from_fn(c, h, w, |_, _, _| rng.uniform_in(0.0, 1.0)).unwrap();
                let cells: Vec<bool> = (0..h * w).map(|_| rng.bernoulli(0.7)).collect();
                let mut validity = Validity::all(h, w, true);
                for (i, v) in cells.into_iter().enumerate() {
                    if !v {
                        validity = validity_with(&validity, i, false);
                    }
                }
                Neighbor { grid, validity }
            })
            .collect();
        let truth_d = (0..h * w).map(|_| rng.bernoulli(0.3)).collect();
        let truth_s = (0..h * w).map(|_| rng.bernoulli(0.5)).collect();
        Fixture {
            model,
            ego,
            reference,
            neighbors,
            truth_d,
            truth_s,
        }
    }

    fn validity_with(v: &Validity, i: usize, on: bool) -> Validity {
        let (h, w) = v.dims();
        let mut cells = v.cells().to_vec();
        cells[i] = on;
        Validity::from_cells(h, w, cells).unwrap()
    }

    impl Fixture {
        fn sample(&self) -> Sample<'_> {
            Sample {
                ego: &self.ego,
                reference: &self.reference,
                neighbors: &self.neighbors,
                truth_dynamic: &self.truth_d,
                truth_static: &self.truth_s,
            }
        }
    }

    fn check(fx: &Fixture, settings: PassSettings) -> f64 {
        let flat = fx.model.to_vec();
        let (_, grads) = forward_backward(&fx.model, &fx.sample(), &settings).unwrap();
        let analytic = grads.unwrap().to_vec();
        let mut probe = fx.model.clone();
        grad_check(
            |p: &[f64]| {
                probe.set_from_slice(p).unwrap();
                forward_backward(&probe, &fx.sample(), &settings).map(|(o, _)| o.total).unwrap_or(f64::NAN)
            },
            &flat,
            &analytic,
            1e-5,
        )
        .unwrap()
    }

    #[test]
    fn soft_mask_sum_gradients_match_finite_differences() {
        for seed in 0..5 {
            let fx = fixture(seed, 4, 3, 3);
            let err = check(
                &fx,
                PassSettings {
                    relaxation: Relaxation::Relaxed { temperature: 0.1 },
                    batch: BatchKind::Partial,
                    objective: Objective::SoftMaskSum,
                },
            );
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn task_gradients_match_finite_differences() {
        for seed in 0..5 {
            for penalty in [PenaltyMode::Signed, PenaltyMode::Absolute] {
                for batch in [BatchKind::Partial, BatchKind::Full] {
                    let fx = fixture(100 + seed, 4, 3, 3);
                    let err = check(
                        &fx,
                        PassSettings {
                            relaxation: Relaxation::Relaxed { temperature: 0.1 },
                            batch,
                            objective: Objective::Task {
                                lambda: 0.7,
                                c_target: 0.04,
                                penalty,
                                slope_at: None,
                            },
                        },
                    );
                    assert!(err < 1e-4, "seed {seed} {penalty:?} {batch:?}: {err}");
                }
            }
        }
    }

    #[test]
    fn fraction_above_reduction_gradients() {
        let mut fx = fixture(7, 4, 3, 3);
        fx.model.reduction = ChannelReduction::FractionAbove;
        let err = check(
            &fx,
            PassSettings {
                relaxation: Relaxation::Relaxed { temperature: 0.2 },
                batch: BatchKind::Partial,
                objective: Objective::SoftMaskSum,
            },
        );
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn hard_fusion_matches_protocol_fuse() {
        let fx = fixture(3, 4, 3, 3);
        let mask = ChannelMask::from_indices(4, &[1, 3]);
        let m: Vec<f64> = mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let (soft, _) = soft_fuse(&fx.ego, &fx.neighbors, &m);
        let received: Vec<Received> = fx
            .neighbors
            .iter()
            .map(|n| Received {
                grid: n.grid.clone(),
                validity: n.validity.clone(),
                mask: mask.clone(),
            })
            .collect();
        let hard = fuse(&fx.ego, &received).unwrap();
        for (a, b) in soft.iter().zip(hard.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn evaluate_agrees_with_select() {
        let fx = fixture(5, 4, 3, 3);
        let out = evaluate(&fx.model, &fx.sample()).unwrap();
        let sel = select(&fx.model, &fx.ego, &fx.reference).unwrap();
        assert_eq!(out.mask, sel.mask);
        assert_eq!(out.relevance, sel.relevance);
    }

    #[test]
    fn flat_roundtrip() {
        let fx = fixture(1, 4, 3, 3);
        let mut m = fx.model.zeros_like();
        m.set_from_slice(&fx.model.to_vec()).unwrap();
        assert_eq!(m, fx.model);
        assert!(m.set_from_slice(&[0.0]).is_err());
    }

    #[test]
    fn straight_through_reports_hard_forward() {
        let fx = fixture(9, 4, 3, 3);
        let st = PassSettings {
            relaxation: Relaxation::StraightThrough { temperature: 0.1 },
            batch: BatchKind::Partial,
            objective: Objective::Task {
                lambda: 0.0,
                c_target: 0.04,
                penalty: PenaltyMode::Signed,
                slope_at: None,
            },
        };
        let (out, grads) = forward_backward(&fx.model, &fx.sample(), &st).unwrap();
        let hard = evaluate(&fx.model, &fx.sample()).unwrap();
        assert_eq!(out.total, hard.total);
        assert_eq!(out.fraction, hard.mask.count() as f64 / 4.0);
        assert!(grads.unwrap().is_finite());
    }
}
