//! Self-checks behind `coopertrim verify`.

use std::fmt;

use crate::error::Result;
use crate::grid::FeatureGrid;
use crate::netsim::{bandwidth_mbps, budget_fraction, NetworkConfig};
use crate::protocol::{
    decode_request, decode_response, encode_request, CompressionConfig, CompressionRate, Pose, ResponseMessage,
};
use crate::relevance::ChannelMask;
use crate::rng::SimRng;
use crate::training::{pipeline_grad_check, proposition1_test, BiasProblem};
use crate::uncertainty::{gate_scores, quantile_threshold, NonconformityMap};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn outcome(name: &'static str, r: Result<(bool, String)>) -> CheckResult {
    match r {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn bandwidth_check() -> Result<(bool, String)> {
    let net = NetworkConfig::default();
    let cases = [(0.279, 11.16), (0.2107, 8.428), (0.1018, 4.072)];
    let worst = cases
        .iter()
        .map(|&(f, mbps)| (bandwidth_mbps(f, &net) - mbps).abs())
        .fold(0.0, f64::max);
    let budget = budget_fraction(1.6, &net)?;
    Ok((worst <= 0.01 && budget == 0.04, format!("max error {worst:.2e} Mbps, budget(1.6) = {budget}")))
}

pub fn grad_check_all(seeds: u64) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        worst = worst.max(pipeline_grad_check(seed, 1e-5)?);
    }
    Ok((worst < 1e-4, format!("max relative error {worst:.3e} over {seeds} seeds")))
}

pub fn proposition1_check(trials: usize) -> Result<(bool, String)> {
    let problem = BiasProblem::new(vec![0.5, -1.0, 2.0, 0.0], vec![0.3, 0.4, 0.0, -1.2], 0.5)?;
    let rows = proposition1_test(&problem, &[0.0, 0.25, 0.5, 0.75, 1.0], trials, &mut SimRng::new(2024))?;
    let worst = rows
        .iter()
        .map(|r| (r.measured_bias_norm - r.predicted).abs() / r.standard_error)
        .fold(0.0, f64::max);
    Ok((
        rows.iter().all(|r| r.within(3.0)),
        format!("worst deviation {worst:.2} standard errors over {trials} trials"),
    ))
}

/// Value at rank `ceil(level·n)` found by counting, without sorting.
fn counting_quantile(xs: &[f64], level: f64) -> f64 {
    let need = ((level * xs.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    *xs.iter()
        .filter(|&&v| xs.iter().filter(|&&w| w <= v).count() >= need)
        .min_by(|a, b| a.total_cmp(b))
        .expect("non-empty")
}

pub fn quantile_check(arrays: usize) -> Result<(bool, String)> {
    let mut rng = SimRng::new(77);
    let mut mismatches = 0;
    for i in 0..arrays {
        let n = 1 + rng.below(24);
        // every third array draws from four distinct values
        let xs: Vec<f64> = (0..n)
            .map(|_| if i % 3 == 0 { rng.below(4) as f64 * 0.5 } else { rng.uniform() })
            .collect();
        let level = [0.25, 0.5, 0.9, 1.0, rng.uniform_in(0.01, 1.0)][i % 5];
        let map = NonconformityMap::new(1, 1, n, xs.clone())?;
        let q = quantile_threshold(&map, level)?;
        let gated = gate_scores(&map, q)?;
        let expect: Vec<f64> = xs.iter().map(|&v| if v > q { v } else { 0.0 }).collect();
        if q != counting_quantile(&xs, level) || gated.values() != expect.as_slice() {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("{mismatches} mismatches over {arrays} arrays")))
}

pub fn wire_check(messages: usize) -> Result<(bool, String)> {
    let mut rng = SimRng::new(31);
    let mut failures = 0;
    for i in 0..messages {
        let c = 1 + rng.below(40);
        let mask = ChannelMask::new((0..c).map(|_| rng.bernoulli(0.4)).collect());
        let pose = Pose::new(rng.uniform_in(-50.0, 50.0), rng.uniform_in(-50.0, 50.0), rng.uniform_in(-3.0, 3.0))?;
        let frame = rng.below(1 << 20) as u64;
        let agent = rng.below(1000) as u32;
        let req = decode_request(&encode_request(agent, frame, &mask, &pose)?)?;
        let req_ok = req.agent_id == agent && req.frame_id == frame && req.mask == mask;

        let (h, w) = (1 + rng.below(5), 1 + rng.below(5));
        let grid = FeatureGrid::from_fn(c, h, w, |_, _, _| rng.uniform_in(-2.0, 2.0))?;
        let compression = CompressionConfig {
            rate: CompressionRate::ALL[i % 3],
            lossless: rng.bernoulli(0.5),
        };
        let resp_mask = if i % 2 == 0 { ChannelMask::full(c) } else { mask.clone() };
        let msg = ResponseMessage::build(agent, frame, &resp_mask, &grid, &compression)?;
        let decoded = decode_response(&msg.encode()?)?;
        let resp_ok = decoded == msg;
        if !(req_ok && resp_ok) {
            failures += 1;
        }
    }
    Ok((failures == 0, format!("{failures} failed roundtrips over {messages} message pairs")))
}

/// Every check at acceptance scale.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        outcome("bandwidth arithmetic", bandwidth_check()),
        outcome("gradient check", grad_check_all(20)),
        outcome("epsilon-greedy bias scaling", proposition1_check(100_000)),
        outcome("quantile and gate oracles", quantile_check(10_000)),
        outcome("wire roundtrips", wire_check(10_000)),
    ]
}
