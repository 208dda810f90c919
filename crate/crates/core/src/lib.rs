//! FM-Delta: word-granular delta compression for fault-management keepalive
//! packets, an on-chip packet store simulator, a synthetic CCM/BFD dataset
//! generator and a compression-ratio benchmark harness.

pub mod bench;
pub mod codec;
pub mod pktgen;
pub mod store;

pub use codec::{
    compress_sequence, compressed_size, decode_delta, decompress_sequence, encode_delta,
    encode_first, CodecError, CodecParams, CompressedStream, DeltaRecord, RawPacket, WordSize,
};
