use crate::error::{Error, Result};

/// `|pred ∧ truth| / |pred ∨ truth|`, 1 when both are empty.
pub fn iou(pred: &[bool], truth: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            what: "iou grids",
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        inter += (p && t) as usize;
        union += (p || t) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation with average ranks; `None` when either series is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "correlation series",
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Ok(None);
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMetrics {
    pub frame_id: u64,
    pub fraction_selected: f64,
    pub bandwidth_mbps: f64,
    pub iou_dynamic: f64,
    pub iou_static: f64,
    /// Dropped channels plus dropped messages.
    pub loss_events: u64,
    pub latency_frames: u64,
    /// Response payload bytes sent to the ego this frame.
    pub payload_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeMetrics {
    pub rows: Vec<FrameMetrics>,
}

impl EpisodeMetrics {
    pub fn fractions(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.fraction_selected).collect()
    }

    /// Mean over frames of the mean of dynamic and static IoU.
    pub fn aggregate_iou(&self) -> f64 {
        mean(self.rows.iter().map(|r| 0.5 * (r.iou_dynamic + r.iou_static)))
    }

    pub fn mean_fraction(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.fraction_selected))
    }

    pub fn mean_bandwidth(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.bandwidth_mbps))
    }

    pub fn total_payload_bytes(&self) -> u64 {
        self.rows.iter().map(|r| r.payload_bytes).sum()
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Spearman correlation of complexity against selected fraction.
pub fn adaptation_correlation(metrics: &EpisodeMetrics, complexity: &[u64]) -> Result<Option<f64>> {
    let c: Vec<f64> = complexity.iter().map(|&v| v as f64).collect();
    spearman(&c, &metrics.fractions())
}

pub const UNDEFINED: &str = "undefined";

pub fn format_optional(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| x.to_string())
}
