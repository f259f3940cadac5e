//! Cross-attention relevance and the learned quantity cutoff.
//!
//! Channels are the attention tokens. Each channel's scalar uncertainty is
//! lifted to a query; its H·W feature plane is projected to a key and a value.
//! Row-wise softmax over channels mixes the values, and a final projection
//! yields one relevance score per channel. Channels whose relevance is strictly
//! above the learned threshold τ are requested.

use crate::error::{Error, Result};
use crate::grid::FeatureGrid;
use crate::linear::LinearMap;
use crate::rng::SimRng;
use crate::uncertainty::{logistic, UncertaintyVector};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub query_proj: LinearMap,
    pub key_proj: LinearMap,
    pub value_proj: LinearMap,
    pub out_proj: LinearMap,
}

impl AttentionParams {
    pub fn new(
        query_proj: LinearMap,
        key_proj: LinearMap,
        value_proj: LinearMap,
        out_proj: LinearMap,
    ) -> Result<Self> {
        let check = |what, expected: usize, actual: usize| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    what,
                    expected,
                    actual,
                })
            }
        };
        check("query projection input", 1, query_proj.in_dim())?;
        check("key projection width", query_proj.out_dim(), key_proj.out_dim())?;
        check("key/value input plane", key_proj.in_dim(), value_proj.in_dim())?;
        check("output projection input", value_proj.out_dim(), out_proj.in_dim())?;
        check("output projection width", 1, out_proj.out_dim())?;
        Ok(Self {
            query_proj,
            key_proj,
            value_proj,
            out_proj,
        })
    }

    pub fn init(plane: usize, d_k: usize, d_v: usize, rng: &mut SimRng) -> Self {
        Self {
            query_proj: LinearMap::init_uniform(1, d_k, rng),
            key_proj: LinearMap::init_uniform(plane, d_k, rng),
            value_proj: LinearMap::init_uniform(plane, d_v, rng),
            out_proj: LinearMap::init_uniform(d_v, 1, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            query_proj: LinearMap::zeros(1, self.d_k()),
            key_proj: LinearMap::zeros(self.plane(), self.d_k()),
            value_proj: LinearMap::zeros(self.plane(), self.d_v()),
            out_proj: LinearMap::zeros(self.d_v(), 1),
        }
    }

    pub fn d_k(&self) -> usize {
        self.query_proj.out_dim()
    }

    pub fn d_v(&self) -> usize {
        self.value_proj.out_dim()
    }

    /// H·W, the key/value input width.
    pub fn plane(&self) -> usize {
        self.key_proj.in_dim()
    }

    pub(crate) fn maps(&self) -> [&LinearMap; 4] {
        [&self.query_proj, &self.key_proj, &self.value_proj, &self.out_proj]
    }

    pub(crate) fn maps_mut(&mut self) -> [&mut LinearMap; 4] {
        [
            &mut self.query_proj,
            &mut self.key_proj,
            &mut self.value_proj,
            &mut self.out_proj,
        ]
    }
}

/// Per-channel relevance R_t.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceScores(pub Vec<f64>);

impl RelevanceScores {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Learnable mask threshold τ (unconstrained).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MaskThreshold {
    pub raw_tau: f64,
}

impl MaskThreshold {
    pub fn new(raw_tau: f64) -> Self {
        Self { raw_tau }
    }

    pub fn tau(&self) -> f64 {
        self.raw_tau
    }
}

/// Which channels are requested. Also the unit of bandwidth.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChannelMask {
    bits: Vec<bool>,
}

impl ChannelMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn empty(channels: usize) -> Self {
        Self::new(vec![false; channels])
    }

    pub fn full(channels: usize) -> Self {
        Self::new(vec![true; channels])
    }

    pub fn from_indices(channels: usize, selected: &[usize]) -> Self {
        let mut bits = vec![false; channels];
        for &c in selected {
            bits[c] = true;
        }
        Self::new(bits)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, c: usize) -> bool {
        self.bits[c]
    }

    pub fn set(&mut self, c: usize, on: bool) {
        self.bits[c] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(c, _)| c)
    }

    pub fn is_subset_of(&self, other: &ChannelMask) -> bool {
        self.len() == other.len() && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }
}

/// Intermediate tensors of one attention pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct AttentionCache {
    pub channels: usize,
    pub d_k: usize,
    pub d_v: usize,
    /// C×d_k
    pub queries: Vec<f64>,
    /// C×d_k
    pub keys: Vec<f64>,
    /// C×d_v
    pub values: Vec<f64>,
    /// C×C row-stochastic
    pub weights: Vec<f64>,
    /// C×d_v
    pub attended: Vec<f64>,
    pub relevance: Vec<f64>,
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub(crate) fn attention_forward(
    u: &[f64],
    f: &FeatureGrid,
    p: &AttentionParams,
) -> Result<AttentionCache> {
    let c = f.channels();
    if u.len() != c {
        return Err(Error::DimensionMismatch {
            what: "uncertainty vector length",
            expected: c,
            actual: u.len(),
        });
    }
    if p.plane() != f.plane() {
        return Err(Error::DimensionMismatch {
            what: "attention key/value input plane",
            expected: p.plane(),
            actual: f.plane(),
        });
    }
    let (d_k, d_v) = (p.d_k(), p.d_v());
    let mut queries = vec![0.0; c * d_k];
    let mut keys = vec![0.0; c * d_k];
    let mut values = vec![0.0; c * d_v];
    for ch in 0..c {
        p.query_proj
            .apply_into(&[u[ch]], &mut queries[ch * d_k..(ch + 1) * d_k]);
        p.key_proj
            .apply_into(f.channel(ch), &mut keys[ch * d_k..(ch + 1) * d_k]);
        p.value_proj
            .apply_into(f.channel(ch), &mut values[ch * d_v..(ch + 1) * d_v]);
    }
    let scale = 1.0 / (d_k as f64).sqrt();
    let mut weights = vec![0.0; c * c];
    for i in 0..c {
        let qi = &queries[i * d_k..(i + 1) * d_k];
        let row = &mut weights[i * c..(i + 1) * c];
        for (j, w) in row.iter_mut().enumerate() {
            let kj = &keys[j * d_k..(j + 1) * d_k];
            *w = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
        }
        softmax_in_place(row);
    }
    let mut attended = vec![0.0; c * d_v];
    for i in 0..c {
        let oi = &mut attended[i * d_v..(i + 1) * d_v];
        for j in 0..c {
            let a = weights[i * c + j];
            for (o, v) in oi.iter_mut().zip(&values[j * d_v..(j + 1) * d_v]) {
                *o += a * v;
            }
        }
    }
    let mut relevance = vec![0.0; c];
    for i in 0..c {
        let mut out = [0.0];
        p.out_proj
            .apply_into(&attended[i * d_v..(i + 1) * d_v], &mut out);
        relevance[i] = out[0];
    }
    Ok(AttentionCache {
        channels: c,
        d_k,
        d_v,
        queries,
        keys,
        values,
        weights,
        attended,
        relevance,
    })
}

/// Backpropagates `g_relevance` through one attention pass.
///
/// Parameter gradients accumulate into `grads`; the return value is the
/// gradient with respect to the uncertainty vector.
pub(crate) fn attention_backward(
    u: &[f64],
    f: &FeatureGrid,
    p: &AttentionParams,
    cache: &AttentionCache,
    g_relevance: &[f64],
    grads: &mut AttentionParams,
) -> Vec<f64> {
    let (c, d_k, d_v) = (cache.channels, cache.d_k, cache.d_v);
    let scale = 1.0 / (d_k as f64).sqrt();

    let mut g_attended = vec![0.0; c * d_v];
    for i in 0..c {
        let oi = &cache.attended[i * d_v..(i + 1) * d_v];
        grads.out_proj.accumulate_grad(oi, &g_relevance[i..i + 1]);
        p.out_proj
            .backward_input(&g_relevance[i..i + 1], &mut g_attended[i * d_v..(i + 1) * d_v]);
    }

    let mut g_values = vec![0.0; c * d_v];
    let mut g_scores = vec![0.0; c * c];
    for i in 0..c {
        let goi = &g_attended[i * d_v..(i + 1) * d_v];
        let row = &cache.weights[i * c..(i + 1) * c];
        let mut g_weights = vec![0.0; c];
        for j in 0..c {
            let vj = &cache.values[j * d_v..(j + 1) * d_v];
            g_weights[j] = goi.iter().zip(vj).map(|(a, b)| a * b).sum();
            for (gv, go) in g_values[j * d_v..(j + 1) * d_v].iter_mut().zip(goi) {
                *gv += row[j] * go;
            }
        }
        let dot: f64 = row.iter().zip(&g_weights).map(|(a, g)| a * g).sum();
        for j in 0..c {
            g_scores[i * c + j] = row[j] * (g_weights[j] - dot);
        }
    }

    let mut g_queries = vec![0.0; c * d_k];
    let mut g_keys = vec![0.0; c * d_k];
    for i in 0..c {
        for j in 0..c {
            let gs = g_scores[i * c + j] * scale;
            if gs == 0.0 {
                continue;
            }
            for t in 0..d_k {
                g_queries[i * d_k + t] += gs * cache.keys[j * d_k + t];
                g_keys[j * d_k + t] += gs * cache.queries[i * d_k + t];
            }
        }
    }

    let mut g_u = vec![0.0; c];
    let mut tmp = [0.0];
    for ch in 0..c {
        let gq = &g_queries[ch * d_k..(ch + 1) * d_k];
        grads.query_proj.accumulate_grad(&[u[ch]], gq);
        p.query_proj.backward_input(gq, &mut tmp);
        g_u[ch] = tmp[0];
        let plane = f.channel(ch);
        grads
            .key_proj
            .accumulate_grad(plane, &g_keys[ch * d_k..(ch + 1) * d_k]);
        grads
            .value_proj
            .accumulate_grad(plane, &g_values[ch * d_v..(ch + 1) * d_v]);
    }
    g_u
}

/// Relevance score per channel from uncertainty queries and feature keys/values.
pub fn cross_attention_relevance(
    u: &UncertaintyVector,
    f: &FeatureGrid,
    p: &AttentionParams,
) -> Result<RelevanceScores> {
    Ok(RelevanceScores(attention_forward(u.as_slice(), f, p)?.relevance))
}

/// `bits[c] = r[c] > tau`; ties are not selected.
pub fn select_channels(r: &RelevanceScores, tau: f64) -> ChannelMask {
    ChannelMask::new(r.0.iter().map(|&v| v > tau).collect())
}

/// Logistic relaxation of [`select_channels`] used to carry gradients to τ.
pub fn soft_mask(r: &RelevanceScores, tau: f64, temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    Ok(r.0.iter().map(|&v| logistic((v - tau) / temperature)).collect())
}

/// Share of channels requested.
pub fn selected_fraction(mask: &ChannelMask) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    mask.count() as f64 / mask.len() as f64
}
