//! Binary checkpoint of a trained model and its Lagrange state.
//!
//! All fields little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "CTCK"
//! 4       1     version (1)
//! 5       1     reduction (0 mean, 1 max, 2 fraction_above)
//! 6       4     channels C (u32)
//! 10      4     plane H·W (u32)
//! 14      4     d_k (u32)
//! 18      4     d_v (u32)
//! 22      8·N   parameters (f64) in Model::to_vec order:
//!               raw_level, raw_tau, query/key/value/out projections
//!               (weights row-major then bias), dynamic head, static head
//! ..      8     lambda (f64)
//! ..      8     epoch (u64)
//! ..      8     itc (u64)
//! ..      8     c_target (f64)
//! ..      8     lambda_seed (f64)
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::training::lagrange::LagrangeState;
use crate::training::model::Model;
use crate::uncertainty::ChannelReduction;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"CTCK";
pub const CHECKPOINT_VERSION: u8 = 1;
const HEADER_LEN: usize = 22;
const STATE_LEN: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub state: LagrangeState,
}

fn reduction_code(r: ChannelReduction) -> u8 {
    match r {
        ChannelReduction::Mean => 0,
        ChannelReduction::Max => 1,
        ChannelReduction::FractionAbove => 2,
    }
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{what} {v} does not fit in u32")))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        let params = m.to_vec();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.len() + STATE_LEN);
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        out.push(reduction_code(m.reduction));
        for (v, what) in [
            (m.channels(), "channels"),
            (m.plane(), "plane"),
            (m.attention.d_k(), "d_k"),
            (m.attention.d_v(), "d_v"),
        ] {
            out.extend_from_slice(&u32_of(v, what)?.to_le_bytes());
        }
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        let s = &self.state;
        out.extend_from_slice(&s.lambda.to_le_bytes());
        out.extend_from_slice(&s.epoch.to_le_bytes());
        out.extend_from_slice(&s.itc.to_le_bytes());
        out.extend_from_slice(&s.c_target.to_le_bytes());
        out.extend_from_slice(&s.lambda_seed.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |msg: String| Error::Checkpoint(msg);
        if bytes.len() < HEADER_LEN {
            return Err(fail(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if bytes[..4] != CHECKPOINT_MAGIC {
            return Err(fail(format!("bad magic {:02x?}", &bytes[..4])));
        }
        if bytes[4] != CHECKPOINT_VERSION {
            return Err(fail(format!("unsupported version {}", bytes[4])));
        }
        let reduction = match bytes[5] {
            0 => ChannelReduction::Mean,
            1 => ChannelReduction::Max,
            2 => ChannelReduction::FractionAbove,
            other => return Err(fail(format!("unknown reduction code {other}"))),
        };
        let dim = |i: usize| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap()) as usize;
        let (channels, plane, d_k, d_v) = (dim(0), dim(1), dim(2), dim(3));
        if channels == 0 || plane == 0 || d_k == 0 || d_v == 0 {
            return Err(fail("zero dimension in header".into()));
        }
        let mut model = Model::init(channels, plane, d_k, d_v, &mut SimRng::new(0));
        model.reduction = reduction;
        let n = model.param_count();
        let expected = HEADER_LEN + 8 * n + STATE_LEN;
        if bytes.len() != expected {
            return Err(fail(format!("expected {expected} bytes, got {}", bytes.len())));
        }
        let word = |off: usize| -> [u8; 8] { bytes[off..off + 8].try_into().unwrap() };
        let params: Vec<f64> = (0..n).map(|i| f64::from_le_bytes(word(HEADER_LEN + 8 * i))).collect();
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(fail(format!("non-finite parameter at index {i}")));
        }
        model.set_from_slice(&params)?;
        let base = HEADER_LEN + 8 * n;
        let state = LagrangeState {
            lambda: f64::from_le_bytes(word(base)),
            epoch: u64::from_le_bytes(word(base + 8)),
            itc: u64::from_le_bytes(word(base + 16)),
            c_target: f64::from_le_bytes(word(base + 24)),
            lambda_seed: f64::from_le_bytes(word(base + 32)),
            fraction_mean: None,
        };
        if !(state.lambda >= 0.0 && state.lambda.is_finite()) {
            return Err(fail(format!("invalid lambda {}", state.lambda)));
        }
        Ok(Self { model, state })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read(path) {
            Ok(bytes) => Self::from_bytes(&bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingCheckpoint(path.to_path_buf())),
            Err(e) => Err(e.into()),
        }
    }
}
