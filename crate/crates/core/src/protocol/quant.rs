//! Affine uniform quantization of feature values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, WireError};

/// Width used for uncompressed (1x) payloads: raw IEEE-754 single precision.
pub const FULL_PRECISION_BITS: u8 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub codes: Vec<u32>,
    pub scale: f64,
    pub zero: f64,
    pub bits: u8,
}

fn f32_at_most(x: f64) -> f32 {
    let mut v = x as f32;
    if f64::from(v) > x {
        v = v.next_down();
    }
    v
}

fn f32_at_least(x: f64) -> f32 {
    let mut v = x as f32;
    if f64::from(v) < x {
        v = v.next_up();
    }
    v
}

/// Quantizes to `bits` ∈ {1, 4, 8}.
///
/// `zero` is the minimum and `scale` spans the range over `2^bits − 1` steps
/// (1 for constant input). Both are rounded outward to f32-representable
/// values so the wire header carries them exactly and every input still lies
/// in `[zero, zero + (2^bits − 1)·scale]`.
pub fn quantize(values: &[f64], bits: u8) -> Result<Quantized> {
    if values.is_empty() {
        return Err(Error::Empty("values to quantize"));
    }
    if !matches!(bits, 1 | 4 | 8) {
        return Err(WireError::BadQuantBits(bits).into());
    }
    crate::grid::check_finite(values)?;
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let levels = (1u32 << bits) - 1;
    let zero = f64::from(f32_at_most(min));
    let scale = if max == min {
        1.0
    } else {
        f64::from(f32_at_least((max - zero) / f64::from(levels)))
    };
    let codes = values
        .iter()
        .map(|&v| ((v - zero) / scale).round().clamp(0.0, f64::from(levels)) as u32)
        .collect();
    Ok(Quantized {
        codes,
        scale,
        zero,
        bits,
    })
}

pub fn dequantize(q: &Quantized) -> Vec<f64> {
    if q.bits == FULL_PRECISION_BITS {
        return q.codes.iter().map(|&c| f64::from(f32::from_bits(c))).collect();
    }
    q.codes
        .iter()
        .map(|&c| q.zero + f64::from(c) * q.scale)
        .collect()
}

/// Full-precision "quantization": the f32 bit pattern of each value.
pub(crate) fn encode_full_precision(values: &[f64]) -> Quantized {
    Quantized {
        codes: values.iter().map(|&v| (v as f32).to_bits()).collect(),
        scale: 1.0,
        zero: 0.0,
        bits: FULL_PRECISION_BITS,
    }
}

/// Post-selection compression rate relative to 32-bit floats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CompressionRate {
    #[default]
    #[serde(rename = "1x")]
    X1,
    #[serde(rename = "8x")]
    X8,
    #[serde(rename = "32x")]
    X32,
}

impl CompressionRate {
    pub const ALL: [CompressionRate; 3] = [CompressionRate::X1, CompressionRate::X8, CompressionRate::X32];

    pub fn quant_bits(self) -> u8 {
        match self {
            CompressionRate::X1 => 32,
            CompressionRate::X8 => 4,
            CompressionRate::X32 => 1,
        }
    }

    pub fn from_quant_bits(bits: u8) -> Option<Self> {
        match bits {
            32 => Some(CompressionRate::X1),
            4 => Some(CompressionRate::X8),
            1 => Some(CompressionRate::X32),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CompressionRate::X1 => "1x",
            CompressionRate::X8 => "8x",
            CompressionRate::X32 => "32x",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressionConfig {
    pub rate: CompressionRate,
    /// Run-length pass after bit packing.
    pub lossless: bool,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self {
            rate: CompressionRate::X1,
            lossless: true,
        }
    }
}

impl CompressionConfig {
    pub fn quant_bits(&self) -> u8 {
        self.rate.quant_bits()
    }

    /// Quantizes with this config's width; 32 bits keeps raw f32 patterns.
    pub(crate) fn encode(&self, values: &[f64]) -> Result<Quantized> {
        match self.quant_bits() {
            FULL_PRECISION_BITS => Ok(encode_full_precision(values)),
            _ if values.is_empty() => Ok(Quantized {
                codes: Vec::new(),
                scale: 1.0,
                zero: 0.0,
                bits: self.quant_bits(),
            }),
            bits => quantize(values, bits),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    fn max_err(values: &[f64], q: &Quantized) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &v) in values.iter().enumerate() {
            // naive dequantization, independent of `dequantize`
            let back = q.zero + q.codes[i] as f64 * q.scale;
            worst = worst.max((v - back).abs());
        }
        worst
    }

    #[test]
    fn constant_array_is_exact() {
        let v = vec![0.375; 10];
        let q = quantize(&v, 8).unwrap();
        assert!(q.codes.iter().all(|&c| c == 0));
        assert_eq!(dequantize(&q), v);
    }

    #[test]
    fn one_bit_roundtrip() {
        let q = quantize(&[0.0, 1.0], 1).unwrap();
        assert_eq!(q.codes, vec![0, 1]);
        assert_eq!(dequantize(&q), vec![0.0, 1.0]);
    }

    #[test]
    fn error_within_half_step() {
        let mut rng = SimRng::new(21);
        for bits in [1u8, 4, 8] {
            let v: Vec<f64> = (0..2000).map(|_| rng.uniform_in(-3.0, 5.0)).collect();
            let q = quantize(&v, bits).unwrap();
            let bound = q.scale / 2.0 + 8.0 * f64::EPSILON * 5.0;
            assert!(max_err(&v, &q) <= bound, "bits {bits}");
            assert!(q.codes.iter().all(|&c| c < (1 << bits)));
        }
    }

    #[test]
    fn scale_and_zero_survive_f32() {
        let q = quantize(&[0.1, 0.7, 0.33], 4).unwrap();
        assert_eq!(f64::from(q.scale as f32), q.scale);
        assert_eq!(f64::from(q.zero as f32), q.zero);
    }

    #[test]
    fn bad_inputs() {
        assert!(quantize(&[], 8).is_err());
        assert!(quantize(&[1.0], 3).is_err());
        assert!(quantize(&[f64::NAN], 8).is_err());
    }

    #[test]
    fn rate_labels() {
        assert_eq!(CompressionRate::X1.quant_bits(), 32);
        assert_eq!(CompressionRate::X8.quant_bits(), 4);
        assert_eq!(CompressionRate::X32.quant_bits(), 1);
        for r in CompressionRate::ALL {
            assert_eq!(CompressionRate::from_quant_bits(r.quant_bits()), Some(r));
        }
    }
}
