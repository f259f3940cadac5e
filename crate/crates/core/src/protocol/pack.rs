//! Dense bit packing followed by byte-level run-length encoding.
//!
//! Packed stream layout: `[mode, bits, body...]`. Mode 0 stores the bit-packed
//! body verbatim, mode 1 stores it run-length encoded. The encoder picks
//! whichever is shorter, so a packed stream is never longer than the bit-packed
//! body plus the two header bytes.
//!
//! RLE body: any byte other than 0x00 is a literal. 0x00 escapes a run token
//! `0x00, len, value` meaning `value` repeated `len` (1..=255) times. Runs of
//! four or more equal bytes and every zero byte are emitted as run tokens.

use crate::error::WireError;

pub const PACK_HEADER_LEN: usize = 2;
const MODE_STORED: u8 = 0;
const MODE_RLE: u8 = 1;
const ESCAPE: u8 = 0x00;
const MIN_RUN: usize = 4;

fn check_bits(bits: u8) -> Result<(), WireError> {
    if bits == 0 || bits > 32 {
        return Err(WireError::BadQuantBits(bits));
    }
    Ok(())
}

/// Packs each code into a `bits`-wide field, LSB-first.
pub fn bit_pack(codes: &[u32], bits: u8) -> Result<Vec<u8>, WireError> {
    check_bits(bits)?;
    let limit = if bits == 32 { u64::from(u32::MAX) } else { (1u64 << bits) - 1 };
    let mut out = Vec::with_capacity((codes.len() * bits as usize).div_ceil(8));
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    for &code in codes {
        if u64::from(code) > limit {
            return Err(WireError::MalformedStream(format!(
                "code {code} does not fit in {bits} bits"
            )));
        }
        acc |= u64::from(code) << filled;
        filled += u32::from(bits);
        while filled >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            filled -= 8;
        }
    }
    if filled > 0 {
        out.push(acc as u8);
    }
    Ok(out)
}

pub fn bit_unpack(bytes: &[u8], n: usize, bits: u8) -> Result<Vec<u32>, WireError> {
    check_bits(bits)?;
    let needed = (n * bits as usize).div_ceil(8);
    if bytes.len() != needed {
        return Err(WireError::MalformedStream(format!(
            "bit-packed body is {} bytes, expected {needed}",
            bytes.len()
        )));
    }
    let mask = if bits == 32 { u64::from(u32::MAX) } else { (1u64 << bits) - 1 };
    let mut out = Vec::with_capacity(n);
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    let mut iter = bytes.iter();
    for _ in 0..n {
        while filled < u32::from(bits) {
            // length was checked above
            acc |= u64::from(*iter.next().unwrap_or(&0)) << filled;
            filled += 8;
        }
        out.push((acc & mask) as u32);
        acc >>= bits;
        filled -= u32::from(bits);
    }
    if acc != 0 {
        return Err(WireError::MalformedStream("nonzero padding bits".into()));
    }
    Ok(out)
}

fn rle_encode(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    let mut i = 0;
    while i < data.len() {
        let value = data[i];
        let mut run = 1;
        while i + run < data.len() && data[i + run] == value && run < 255 {
            run += 1;
        }
        if run >= MIN_RUN || value == ESCAPE {
            out.extend_from_slice(&[ESCAPE, run as u8, value]);
        } else {
            out.extend(std::iter::repeat(value).take(run));
        }
        i += run;
    }
    out
}

fn rle_decode(data: &[u8], expected: usize) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::with_capacity(expected);
    let mut i = 0;
    while i < data.len() {
        if data[i] == ESCAPE {
            let (Some(&len), Some(&value)) = (data.get(i + 1), data.get(i + 2)) else {
                return Err(WireError::MalformedStream("truncated run token".into()));
            };
            if len == 0 {
                return Err(WireError::MalformedStream("zero-length run".into()));
            }
            out.extend(std::iter::repeat(value).take(len as usize));
            i += 3;
        } else {
            out.push(data[i]);
            i += 1;
        }
        if out.len() > expected {
            return Err(WireError::MalformedStream("run-length body overflows".into()));
        }
    }
    Ok(out)
}

/// Bit-packs `codes` and run-length encodes the result when that is shorter.
/// An empty code list packs to an empty stream.
pub fn lossless_pack(codes: &[u32], bits: u8) -> Result<Vec<u8>, WireError> {
    let body = bit_pack(codes, bits)?;
    if codes.is_empty() {
        return Ok(Vec::new());
    }
    let rle = rle_encode(&body);
    let mut out = Vec::with_capacity(PACK_HEADER_LEN + body.len().min(rle.len()));
    if rle.len() < body.len() {
        out.extend_from_slice(&[MODE_RLE, bits]);
        out.extend_from_slice(&rle);
    } else {
        out.extend_from_slice(&[MODE_STORED, bits]);
        out.extend_from_slice(&body);
    }
    Ok(out)
}

/// Bit-packed stream with a stored-mode header and no run-length pass.
pub(crate) fn stored_pack(codes: &[u32], bits: u8) -> Result<Vec<u8>, WireError> {
    let body = bit_pack(codes, bits)?;
    if codes.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(PACK_HEADER_LEN + body.len());
    out.extend_from_slice(&[MODE_STORED, bits]);
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn lossless_unpack(bytes: &[u8], n: usize, bits: u8) -> Result<Vec<u32>, WireError> {
    check_bits(bits)?;
    if n == 0 {
        if !bytes.is_empty() {
            return Err(WireError::MalformedStream("payload present for zero codes".into()));
        }
        return Ok(Vec::new());
    }
    let [mode, stream_bits, body @ ..] = bytes else {
        return Err(WireError::MalformedStream("missing pack header".into()));
    };
    if *stream_bits != bits {
        return Err(WireError::MalformedStream(format!(
            "stream packed at {stream_bits} bits, expected {bits}"
        )));
    }
    let expected = (n * bits as usize).div_ceil(8);
    match *mode {
        MODE_STORED => bit_unpack(body, n, bits),
        MODE_RLE => bit_unpack(&rle_decode(body, expected)?, n, bits),
        other => Err(WireError::MalformedStream(format!("unknown pack mode {other}"))),
    }
}
