//! FM-Delta record and stream codec.
//!
//! A packet sequence is stored as a run of records. The first record (and
//! every entry point) carries the packet verbatim; every other record carries
//! a per-word equality bitmap against the previous packet plus the bytes of
//! the words that changed.
//!
//! Record wire format:
//!
//! ```text
//!  0        1        3
//! +--------+--------+-----------------------------------------+
//! | flags  | length | payload                                 |
//! +--------+--------+-----------------------------------------+
//!
//! flags   bit0 = 1: literal (entry point), payload = packet bytes
//!         bit0 = 0: delta, payload = bitmap || values
//!         bits 1-7 reserved, zero
//! length  original packet length, big-endian u16
//! bitmap  ceil(length / word) bits, MSB first, zero padded to a byte
//! values  bytes of every word whose bit is 0, in word order
//! ```

mod record;
pub(crate) mod stream;

pub use record::{decode_delta, encode_delta, encode_first, DeltaRecord};
pub use stream::{
    compress_sequence, compressed_size, decompress_sequence, encode_at, CompressedStream,
    STREAM_MAGIC, STREAM_VERSION,
};

use std::fmt;

use thiserror::Error;

/// Largest packet the codec accepts (jumbo Ethernet frame).
pub const MAX_PACKET_LEN: usize = 9216;

/// Bytes of flags + length in front of every record.
pub const RECORD_HEADER_LEN: usize = 3;

/// Largest possible serialized record: a literal jumbo frame.
pub const MAX_RECORD_LEN: usize = RECORD_HEADER_LEN + MAX_PACKET_LEN;

/// One uncompressed packet, 1 to [`MAX_PACKET_LEN`] bytes long.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RawPacket(Vec<u8>);

impl RawPacket {
    pub fn new(bytes: Vec<u8>) -> Result<Self, CodecError> {
        if bytes.is_empty() || bytes.len() > MAX_PACKET_LEN {
            return Err(CodecError::PacketLength(bytes.len()));
        }
        Ok(RawPacket(bytes))
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CodecError> {
        Self::new(bytes.to_vec())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

impl AsRef<[u8]> for RawPacket {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for RawPacket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RawPacket({}B ", self.0.len())?;
        for b in self.0.iter().take(16) {
            write!(f, "{b:02x}")?;
        }
        if self.0.len() > 16 {
            f.write_str("..")?;
        }
        f.write_str(")")
    }
}

impl TryFrom<Vec<u8>> for RawPacket {
    type Error = CodecError;

    fn try_from(bytes: Vec<u8>) -> Result<Self, Self::Error> {
        RawPacket::new(bytes)
    }
}

impl TryFrom<&[u8]> for RawPacket {
    type Error = CodecError;

    fn try_from(bytes: &[u8]) -> Result<Self, Self::Error> {
        RawPacket::from_slice(bytes)
    }
}

/// Comparison granularity of the delta bitmap, in bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordSize(u8);

impl WordSize {
    pub const ALL: [WordSize; 5] = [
        WordSize(1),
        WordSize(2),
        WordSize(4),
        WordSize(8),
        WordSize(16),
    ];

    pub fn new(bytes: usize) -> Result<Self, CodecError> {
        match bytes {
            1 | 2 | 4 | 8 | 16 => Ok(WordSize(bytes as u8)),
            _ => Err(CodecError::WordSize(bytes)),
        }
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Number of words (and bitmap bits) covering `len` bytes.
    #[inline]
    pub fn words(self, len: usize) -> usize {
        len.div_ceil(self.get())
    }

    /// Packed bitmap size in bytes for a packet of `len` bytes.
    #[inline]
    pub fn bitmap_len(self, len: usize) -> usize {
        self.words(len).div_ceil(8)
    }

    /// Byte range of word `j` within a packet of `len` bytes.
    #[inline]
    pub fn word_range(self, j: usize, len: usize) -> std::ops::Range<usize> {
        let start = j * self.get();
        start..(start + self.get()).min(len)
    }
}

impl Default for WordSize {
    fn default() -> Self {
        WordSize(2)
    }
}

impl fmt::Display for WordSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Codec parameters shared by every record of a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CodecParams {
    pub word_size: WordSize,
    /// Spacing of literal entry-point records; 1 stores everything literally.
    entry_interval: u32,
}

impl CodecParams {
    pub fn new(word_size: WordSize, entry_interval: u32) -> Result<Self, CodecError> {
        if entry_interval == 0 {
            return Err(CodecError::EntryInterval);
        }
        Ok(CodecParams {
            word_size,
            entry_interval,
        })
    }

    /// Parameters with a single entry point at the head of a `count`-packet
    /// sequence.
    pub fn single_entry(word_size: WordSize, count: usize) -> Self {
        CodecParams {
            word_size,
            entry_interval: u32::try_from(count.max(1)).unwrap_or(u32::MAX),
        }
    }

    #[inline]
    pub fn entry_interval(&self) -> u32 {
        self.entry_interval
    }

    /// Whether 0-based record `index` must be a literal entry point.
    #[inline]
    pub fn is_entry_point(&self, index: usize) -> bool {
        index.is_multiple_of(self.entry_interval as usize)
    }
}

impl Default for CodecParams {
    fn default() -> Self {
        CodecParams {
            word_size: WordSize::default(),
            entry_interval: u32::MAX,
        }
    }
}

/// Why a record or stream failed to decode.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Corruption {
    #[error("truncated: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("reserved flag bits set ({0:#04x})")]
    ReservedFlags(u8),
    #[error("record length {0} outside 1..=9216")]
    BadLength(usize),
    #[error("word {word} copies bytes beyond the {prev_len}-byte predecessor")]
    CopyBeyondPredecessor { word: usize, prev_len: usize },
    #[error("values exhausted at word {word}")]
    ValuesExhausted { word: usize },
    #[error("{0} trailing bytes in values")]
    TrailingValues(usize),
    #[error("non-zero bitmap padding")]
    BitmapPadding,
    #[error("delta record where an entry point is required")]
    MissingEntryPoint,
    #[error("bad stream magic")]
    BadMagic,
    #[error("unsupported stream version {0}")]
    BadVersion(u8),
    #[error("invalid stream header: {0}")]
    BadHeader(String),
    #[error("stream declares {declared} records, found {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("stream holds no records")]
    Empty,
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("packet length {0} outside 1..=9216")]
    PacketLength(usize),
    #[error("word size {0} is not one of 1, 2, 4, 8, 16")]
    WordSize(usize),
    #[error("entry interval must be at least 1")]
    EntryInterval,
    #[error("empty packet sequence")]
    EmptySequence,
    #[error("packet {index}: {source}")]
    Packet {
        index: usize,
        #[source]
        source: Box<CodecError>,
    },
    #[error("corrupt record: {0}")]
    CorruptRecord(Corruption),
    #[error("corrupt stream at record {index}: {kind}")]
    CorruptStream { index: usize, kind: Corruption },
}

/// Validates raw byte buffers as packets, reporting the first bad index.
pub fn packets_from_bytes<I, B>(buffers: I) -> Result<Vec<RawPacket>, CodecError>
where
    I: IntoIterator<Item = B>,
    B: Into<Vec<u8>>,
{
    buffers
        .into_iter()
        .enumerate()
        .map(|(index, b)| RawPacket::new(b.into()).map_err(|e| e.at(index)))
        .collect()
}

impl CodecError {
    /// Record index of a stream-level corruption, if any.
    pub fn record_index(&self) -> Option<usize> {
        match self {
            CodecError::CorruptStream { index, .. } | CodecError::Packet { index, .. } => {
                Some(*index)
            }
            _ => None,
        }
    }

    pub fn is_corruption(&self) -> bool {
        matches!(
            self,
            CodecError::CorruptRecord(_) | CodecError::CorruptStream { .. }
        )
    }

    pub(crate) fn at(self, index: usize) -> CodecError {
        match self {
            CodecError::CorruptRecord(kind) => CodecError::CorruptStream { index, kind },
            e @ CodecError::CorruptStream { .. } => e,
            other => CodecError::Packet {
                index,
                source: Box::new(other),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packet_bounds() {
        assert!(RawPacket::new(vec![0]).is_ok());
        assert!(RawPacket::new(vec![0; MAX_PACKET_LEN]).is_ok());
        assert_eq!(RawPacket::new(vec![]), Err(CodecError::PacketLength(0)));
        assert_eq!(
            RawPacket::new(vec![0; MAX_PACKET_LEN + 1]),
            Err(CodecError::PacketLength(9217))
        );
    }

    #[test]
    fn word_size_domain() {
        for w in [1, 2, 4, 8, 16] {
            assert_eq!(WordSize::new(w).unwrap().get(), w);
        }
        for w in [0, 3, 5, 32] {
            assert_eq!(WordSize::new(w), Err(CodecError::WordSize(w)));
        }
        assert_eq!(WordSize::default().get(), 2);
    }

    #[test]
    fn word_geometry() {
        let w = WordSize::new(4).unwrap();
        assert_eq!(w.words(9), 3);
        assert_eq!(w.word_range(2, 9), 8..9);
        assert_eq!(w.bitmap_len(9), 1);
        assert_eq!(WordSize::new(2).unwrap().bitmap_len(100), 7);
    }

    #[test]
    fn entry_points() {
        let p = CodecParams::new(WordSize::default(), 10).unwrap();
        assert!(p.is_entry_point(0));
        assert!(p.is_entry_point(20));
        assert!(!p.is_entry_point(21));
        assert_eq!(
            CodecParams::new(WordSize::default(), 0),
            Err(CodecError::EntryInterval)
        );
    }
}
