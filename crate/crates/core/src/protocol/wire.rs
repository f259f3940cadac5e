//! Request/response wire format.
//!
//! Request (`19 + ceil(C/8) + 12` bytes):
//!
//! ```text
//! 0   magic "CTRQ"
//! 4   version u8 (=1)
//! 5   agent_id u32
//! 9   frame_id u64
//! 17  channel_count u16
//! 19  mask, ceil(C/8) bytes, LSB-first, bits past C are zero
//! ..  pose x, y, yaw as f32
//! ```
//!
//! Response:
//!
//! ```text
//! 0   magic "CTRS"
//! 4   version u8
//! 5   agent_id u32
//! 9   frame_id u64
//! 17  channel_count u16
//! 19  echoed mask, ceil(C/8) bytes
//! ..  quant_bits u8 ∈ {32, 8, 4, 1}
//! ..  quant_scale f32, quant_zero f32
//! ..  payload_len u32
//! ..  payload: packed stream (see `pack`) of the selected channels'
//!     values, channel-ascending, row-major within a channel
//! ```
//!
//! All integers and floats are little-endian.

use crate::error::{Error, Result, WireError};
use crate::grid::FeatureGrid;
use crate::protocol::pack::{lossless_pack, lossless_unpack, stored_pack};
use crate::protocol::quant::{dequantize, CompressionConfig, Quantized};
use crate::protocol::spatial::Pose;
use crate::relevance::ChannelMask;

pub const REQUEST_MAGIC: [u8; 4] = *b"CTRQ";
pub const RESPONSE_MAGIC: [u8; 4] = *b"CTRS";
pub const PROTOCOL_VERSION: u8 = 1;
/// Fixed bytes preceding the mask in both message types.
pub const REQUEST_HEADER_LEN: usize = 19;
const POSE_LEN: usize = 12;

/// Pose as carried on the wire (single precision).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WirePose {
    pub x: f32,
    pub y: f32,
    pub yaw: f32,
}

impl From<&Pose> for WirePose {
    fn from(p: &Pose) -> Self {
        Self {
            x: p.x as f32,
            y: p.y as f32,
            yaw: p.yaw as f32,
        }
    }
}

impl WirePose {
    pub fn to_pose(&self) -> Result<Pose> {
        Pose::new(f64::from(self.x), f64::from(self.y), f64::from(self.yaw))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestMessage {
    pub agent_id: u32,
    pub frame_id: u64,
    pub mask: ChannelMask,
    pub pose: WirePose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMessage {
    pub agent_id: u32,
    pub frame_id: u64,
    pub mask: ChannelMask,
    pub quant_bits: u8,
    pub quant_scale: f32,
    pub quant_zero: f32,
    pub payload: Vec<u8>,
}

fn mask_len(channels: usize) -> usize {
    channels.div_ceil(8)
}

fn channel_count(mask: &ChannelMask) -> Result<u16, WireError> {
    u16::try_from(mask.len()).map_err(|_| WireError::TooManyChannels(mask.len()))
}

fn put_header(out: &mut Vec<u8>, magic: [u8; 4], agent_id: u32, frame_id: u64, mask: &ChannelMask) -> Result<(), WireError> {
    let count = channel_count(mask)?;
    out.extend_from_slice(&magic);
    out.push(PROTOCOL_VERSION);
    out.extend_from_slice(&agent_id.to_le_bytes());
    out.extend_from_slice(&frame_id.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    let mut bytes = vec![0u8; mask_len(mask.len())];
    for c in mask.selected() {
        bytes[c / 8] |= 1 << (c % 8);
    }
    out.extend_from_slice(&bytes);
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(WireError::Truncated {
                needed: end,
                available: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f32(&mut self) -> Result<f32, WireError> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    fn finish(&self) -> Result<(), WireError> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            extra => Err(WireError::TrailingBytes(extra)),
        }
    }
}

/// Parses the fields shared by both message types.
fn read_header(r: &mut Reader<'_>, magic: [u8; 4]) -> Result<(u32, u64, ChannelMask), WireError> {
    let found = r.array::<4>()?;
    if found != magic {
        return Err(WireError::BadMagic {
            expected: magic,
            found,
        });
    }
    let version = r.u8()?;
    if version != PROTOCOL_VERSION {
        return Err(WireError::UnknownVersion(version));
    }
    let agent_id = r.u32()?;
    let frame_id = r.u64()?;
    let channels = r.u16()? as usize;
    let raw = r.take(mask_len(channels))?;
    if channels % 8 != 0 {
        let last = raw[raw.len() - 1];
        if last >> (channels % 8) != 0 {
            return Err(WireError::NonzeroTrailingBits { channels });
        }
    }
    let bits = (0..channels).map(|c| raw[c / 8] >> (c % 8) & 1 == 1).collect();
    Ok((agent_id, frame_id, ChannelMask::new(bits)))
}

impl RequestMessage {
    pub fn encoded_len(&self) -> usize {
        REQUEST_HEADER_LEN + mask_len(self.mask.len()) + POSE_LEN
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::with_capacity(self.encoded_len());
        put_header(&mut out, REQUEST_MAGIC, self.agent_id, self.frame_id, &self.mask)?;
        for v in [self.pose.x, self.pose.y, self.pose.yaw] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }
}

pub fn encode_request(agent_id: u32, frame_id: u64, mask: &ChannelMask, pose: &Pose) -> Result<Vec<u8>, WireError> {
    RequestMessage {
        agent_id,
        frame_id,
        mask: mask.clone(),
        pose: pose.into(),
    }
    .encode()
}

pub fn decode_request(bytes: &[u8]) -> Result<RequestMessage, WireError> {
    let mut r = Reader { bytes, pos: 0 };
    let (agent_id, frame_id, mask) = read_header(&mut r, REQUEST_MAGIC)?;
    let pose = WirePose {
        x: r.f32()?,
        y: r.f32()?,
        yaw: r.f32()?,
    };
    r.finish()?;
    Ok(RequestMessage {
        agent_id,
        frame_id,
        mask,
        pose,
    })
}

impl ResponseMessage {
    /// Packs the masked channels of `grid` (already in the requester's frame).
    pub fn build(
        agent_id: u32,
        frame_id: u64,
        mask: &ChannelMask,
        grid: &FeatureGrid,
        compression: &CompressionConfig,
    ) -> Result<Self> {
        if mask.len() != grid.channels() {
            return Err(Error::DimensionMismatch {
                what: "response mask length",
                expected: grid.channels(),
                actual: mask.len(),
            });
        }
        let mut values = Vec::with_capacity(mask.count() * grid.plane());
        for c in mask.selected() {
            values.extend(grid.channel(c).iter().map(|&v| f64::from(v as f32)));
        }
        let q = compression.encode(&values)?;
        let payload = if compression.lossless {
            lossless_pack(&q.codes, q.bits)?
        } else {
            stored_pack(&q.codes, q.bits)?
        };
        Ok(Self {
            agent_id,
            frame_id,
            mask: mask.clone(),
            quant_bits: q.bits,
            quant_scale: q.scale as f32,
            quant_zero: q.zero as f32,
            payload,
        })
    }

    /// Dequantized values of the selected channels in payload order.
    pub fn values(&self, plane: usize) -> Result<Vec<f64>> {
        let n = self.mask.count() * plane;
        let codes = lossless_unpack(&self.payload, n, self.quant_bits)?;
        Ok(dequantize(&Quantized {
            codes,
            scale: f64::from(self.quant_scale),
            zero: f64::from(self.quant_zero),
            bits: self.quant_bits,
        }))
    }

    /// Rebuilds a full grid; channels outside the mask are zero.
    pub fn to_grid(&self, height: usize, width: usize) -> Result<FeatureGrid> {
        let plane = height * width;
        let values = self.values(plane)?;
        let mut out = vec![0.0; self.mask.len() * plane];
        for (k, c) in self.mask.selected().enumerate() {
            out[c * plane..(c + 1) * plane].copy_from_slice(&values[k * plane..(k + 1) * plane]);
        }
        FeatureGrid::new(self.mask.len(), height, width, out)
    }

    pub fn encoded_len(&self) -> usize {
        REQUEST_HEADER_LEN + mask_len(self.mask.len()) + 13 + self.payload.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::with_capacity(self.encoded_len());
        put_header(&mut out, RESPONSE_MAGIC, self.agent_id, self.frame_id, &self.mask)?;
        out.push(self.quant_bits);
        out.extend_from_slice(&self.quant_scale.to_le_bytes());
        out.extend_from_slice(&self.quant_zero.to_le_bytes());
        let len = u32::try_from(self.payload.len())
            .map_err(|_| WireError::MalformedStream("payload exceeds u32 length".into()))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&self.payload);
        Ok(out)
    }
}

pub fn encode_response(msg: &ResponseMessage) -> Result<Vec<u8>, WireError> {
    msg.encode()
}

pub fn decode_response(bytes: &[u8]) -> Result<ResponseMessage, WireError> {
    let mut r = Reader { bytes, pos: 0 };
    let (agent_id, frame_id, mask) = read_header(&mut r, RESPONSE_MAGIC)?;
    let quant_bits = r.u8()?;
    if !matches!(quant_bits, 32 | 8 | 4 | 1) {
        return Err(WireError::BadQuantBits(quant_bits));
    }
    let quant_scale = r.f32()?;
    let quant_zero = r.f32()?;
    let len = r.u32()? as usize;
    let payload = r.take(len)?.to_vec();
    r.finish()?;
    Ok(ResponseMessage {
        agent_id,
        frame_id,
        mask,
        quant_bits,
        quant_scale,
        quant_zero,
        payload,
    })
}
