use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Which feature set a training step fuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchKind {
    /// All channels (exploration).
    Full,
    /// The model's own selection (exploitation).
    Partial,
}

/// `Full` with probability `epsilon`.
///
/// Always consumes exactly one uniform draw so the stream stays aligned
/// across ε values.
pub fn epsilon_greedy_choice(rng: &mut SimRng, epsilon: f64) -> Result<BatchKind> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} outside [0, 1]")));
    }
    Ok(if rng.uniform() < epsilon {
        BatchKind::Full
    } else {
        BatchKind::Partial
    })
}
