//! Feature exchange between ego and responders.
//!
//! Byte order is little-endian throughout and mask bits are LSB-first:
//! channel `8j + i` is bit `i` of mask byte `j`.

mod fusion;
mod pack;
mod quant;
mod spatial;
mod wire;

pub use fusion::{fuse, fuse_with, BlendRule, Received};
pub use pack::{bit_pack, bit_unpack, lossless_pack, lossless_unpack, PACK_HEADER_LEN};
pub use quant::{
    dequantize, quantize, CompressionConfig, CompressionRate, Quantized, FULL_PRECISION_BITS,
};
pub use spatial::{spatial_transform, transform_validity, Pose, Validity};
pub use wire::{
    decode_request, decode_response, encode_request, encode_response, RequestMessage,
    ResponseMessage, WirePose, PROTOCOL_VERSION, REQUEST_HEADER_LEN, REQUEST_MAGIC,
    RESPONSE_MAGIC,
};
