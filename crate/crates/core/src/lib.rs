//! Adaptive, temporal-uncertainty driven feature selection for cooperative
//! perception.
//!
//! An ego agent compares its current feature grid with its previous fused
//! grid, gates the deviations with a learned quantile, scores channel
//! relevance by cross-attention, and requests only channels whose relevance
//! clears a learned cutoff. Responders warp and compress the requested
//! channels; the ego fuses them back in. Training couples the two learned
//! thresholds to a bandwidth budget through a scheduled Lagrange multiplier
//! and ε-greedy full/partial batches.

pub mod error;
pub mod grid;
pub mod harness;
pub mod linear;
pub mod netsim;
pub mod protocol;
pub mod relevance;
pub mod rng;
pub mod training;
pub mod uncertainty;
pub mod verify;

pub use error::{Error, Result, WireError};
pub use grid::{l1_deviation, FeatureGrid};
pub use linear::LinearMap;
pub use relevance::{
    cross_attention_relevance, select_channels, selected_fraction, soft_mask, AttentionParams,
    ChannelMask, MaskThreshold, RelevanceScores,
};
pub use rng::SimRng;
pub use uncertainty::{
    channel_uncertainty, gate_scores, quantile_threshold, NonconformityMap, QuantileGate,
    UncertaintyVector,
};
