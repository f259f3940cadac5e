//! Blending received features into the ego grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FeatureGrid;
use crate::protocol::spatial::Validity;
use crate::relevance::ChannelMask;

/// A responder contribution already warped into the ego frame.
#[derive(Debug, Clone)]
pub struct Received {
    pub grid: FeatureGrid,
    pub validity: Validity,
    pub mask: ChannelMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendRule {
    /// Uniform mean over the ego and every contributing responder.
    #[default]
    Average,
    /// Mean of contributing responders, replacing the ego value.
    Overwrite,
    /// Elementwise max over the ego and contributors.
    Max,
}

/// Masked uniform averaging; see [`fuse_with`].
pub fn fuse(ego: &FeatureGrid, received: &[Received]) -> Result<FeatureGrid> {
    fuse_with(ego, received, BlendRule::Average)
}

/// A responder contributes to cell `(c, r, col)` only if `c` is in its mask and
/// the cell is valid after warping; cells without contributors keep the ego value.
pub fn fuse_with(ego: &FeatureGrid, received: &[Received], rule: BlendRule) -> Result<FeatureGrid> {
    for rx in received {
        ego.same_shape(&rx.grid)?;
        if rx.mask.len() != ego.channels() {
            return Err(Error::DimensionMismatch {
                what: "received mask length",
                expected: ego.channels(),
                actual: rx.mask.len(),
            });
        }
        if rx.validity.dims() != (ego.height(), ego.width()) {
            return Err(Error::ShapeMismatch {
                left: (1, ego.height(), ego.width()),
                right: (1, rx.validity.dims().0, rx.validity.dims().1),
            });
        }
    }
    let plane = ego.plane();
    let mut out = ego.values().to_vec();
    for c in 0..ego.channels() {
        let contributors: Vec<&Received> = received.iter().filter(|rx| rx.mask.get(c)).collect();
        if contributors.is_empty() {
            continue;
        }
        for cell in 0..plane {
            let idx = c * plane + cell;
            let mut n = 0usize;
            let mut sum = 0.0;
            let mut max = out[idx];
            for rx in contributors.iter().filter(|rx| rx.validity.cells()[cell]) {
                let v = rx.grid.values()[idx];
                n += 1;
                sum += v;
                max = max.max(v);
            }
            if n == 0 {
                continue;
            }
            out[idx] = match rule {
                BlendRule::Average => (out[idx] + sum) / (n + 1) as f64,
                BlendRule::Overwrite => sum / n as f64,
                BlendRule::Max => max,
            };
        }
    }
    Ok(FeatureGrid::from_parts(ego.dims(), out))
}
