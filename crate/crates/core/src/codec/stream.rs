use super::{
    encode_delta, encode_first, CodecError, CodecParams, Corruption, DeltaRecord, RawPacket,
    WordSize, RECORD_HEADER_LEN,
};

pub const STREAM_MAGIC: &[u8; 4] = b"FMD1";
pub const STREAM_VERSION: u8 = 0x01;
const STREAM_HEADER_LEN: usize = 14;

/// A compressed packet database: codec parameters plus its records in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressedStream {
    params: CodecParams,
    records: Vec<DeltaRecord>,
}

/// Encodes `curr` as it would appear at 0-based position `index` of a
/// stream, given the packet stored before it.
///
/// Entry-point positions and the stream head are stored verbatim. Elsewhere
/// a delta is used unless it is no smaller than the verbatim record.
pub fn encode_at(prev: Option<&RawPacket>, curr: &RawPacket, index: usize, params: &CodecParams) -> DeltaRecord {
    let prev = match prev {
        Some(prev) if !params.is_entry_point(index) => prev,
        _ => return encode_first(curr),
    };
    let delta = encode_delta(prev, curr, params.word_size);
    if delta.encoded_len() >= RECORD_HEADER_LEN + curr.len() {
        encode_first(curr)
    } else {
        delta
    }
}

pub fn compress_sequence(packets: &[RawPacket], params: CodecParams) -> Result<CompressedStream, CodecError> {
    if packets.is_empty() {
        return Err(CodecError::EmptySequence);
    }
    let records = packets
        .iter()
        .enumerate()
        .map(|(i, p)| encode_at(i.checked_sub(1).map(|j| &packets[j]), p, i, &params))
        .collect();
    Ok(CompressedStream { params, records })
}

pub fn decompress_sequence(stream: &CompressedStream) -> Result<Vec<RawPacket>, CodecError> {
    if stream.records.is_empty() {
        return Err(CodecError::CorruptStream {
            index: 0,
            kind: Corruption::Empty,
        });
    }
    let mut out: Vec<RawPacket> = Vec::with_capacity(stream.records.len());
    for (i, rec) in stream.records.iter().enumerate() {
        if stream.params.is_entry_point(i) && !rec.is_literal() {
            return Err(CodecError::CorruptStream {
                index: i,
                kind: Corruption::MissingEntryPoint,
            });
        }
        let packet = rec
            .decode(out.last(), stream.params.word_size)
            .map_err(|e| e.at(i))?;
        out.push(packet);
    }
    Ok(out)
}

/// Total serialized bytes of all records, headers included.
pub fn compressed_size(stream: &CompressedStream) -> usize {
    stream.records.iter().map(DeltaRecord::encoded_len).sum()
}

impl CompressedStream {
    /// Wraps records without decoding them. Fails if the head or an entry
    /// point is not stored verbatim.
    pub fn from_records(params: CodecParams, records: Vec<DeltaRecord>) -> Result<Self, CodecError> {
        if records.is_empty() {
            return Err(CodecError::CorruptStream {
                index: 0,
                kind: Corruption::Empty,
            });
        }
        if let Some(index) = (0..records.len()).find(|&i| params.is_entry_point(i) && !records[i].is_literal()) {
            return Err(CodecError::CorruptStream {
                index,
                kind: Corruption::MissingEntryPoint,
            });
        }
        Ok(CompressedStream { params, records })
    }

    pub fn params(&self) -> &CodecParams {
        &self.params
    }

    pub fn records(&self) -> &[DeltaRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<DeltaRecord> {
        self.records
    }

    pub fn count(&self) -> usize {
        self.records.len()
    }

    /// Record bytes only, without the stream header.
    pub fn write_records(&self, out: &mut Vec<u8>) {
        for rec in &self.records {
            rec.write_to(out);
        }
    }

    /// Serializes to the `FMD1` container.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(STREAM_HEADER_LEN + compressed_size(self));
        out.extend_from_slice(STREAM_MAGIC);
        out.push(STREAM_VERSION);
        out.push(self.params.word_size.get() as u8);
        out.extend_from_slice(&self.params.entry_interval().to_be_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_be_bytes());
        self.write_records(&mut out);
        out
    }

    /// Parses an `FMD1` container. Record errors carry the record index.
    pub fn from_bytes(buf: &[u8]) -> Result<Self, CodecError> {
        let header_err = |kind| CodecError::CorruptStream { index: 0, kind };
        if buf.len() < STREAM_HEADER_LEN {
            if buf.len() >= 4 && &buf[..4] != STREAM_MAGIC {
                return Err(header_err(Corruption::BadMagic));
            }
            return Err(header_err(Corruption::Truncated {
                needed: STREAM_HEADER_LEN,
                available: buf.len(),
            }));
        }
        if &buf[..4] != STREAM_MAGIC {
            return Err(header_err(Corruption::BadMagic));
        }
        if buf[4] != STREAM_VERSION {
            return Err(header_err(Corruption::BadVersion(buf[4])));
        }
        let word_size = WordSize::new(buf[5] as usize)
            .map_err(|e| header_err(Corruption::BadHeader(e.to_string())))?;
        let interval = u32::from_be_bytes(buf[6..10].try_into().unwrap());
        let params = CodecParams::new(word_size, interval)
            .map_err(|e| header_err(Corruption::BadHeader(e.to_string())))?;
        let count = u32::from_be_bytes(buf[10..14].try_into().unwrap()) as usize;
        let records = parse_records(&buf[STREAM_HEADER_LEN..], word_size, count)?;
        CompressedStream::from_records(params, records)
    }
}

/// Parses exactly `count` back-to-back records filling all of `buf`.
pub(crate) fn parse_records(buf: &[u8], word_size: WordSize, count: usize) -> Result<Vec<DeltaRecord>, CodecError> {
    // Every record takes at least four bytes; do not trust `count` for the
    // allocation.
    let mut records = Vec::with_capacity(count.min(buf.len() / 4));
    let mut at = 0;
    for index in 0..count {
        if at == buf.len() {
            return Err(CodecError::CorruptStream {
                index,
                kind: Corruption::CountMismatch {
                    declared: count,
                    found: index,
                },
            });
        }
        let (rec, used) = DeltaRecord::parse(&buf[at..], word_size)
            .map_err(|kind| CodecError::CorruptStream { index, kind })?;
        records.push(rec);
        at += used;
    }
    if at != buf.len() {
        return Err(CodecError::CorruptStream {
            index: count,
            kind: Corruption::TrailingBytes(buf.len() - at),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(b: &[u8]) -> RawPacket {
        RawPacket::from_slice(b).unwrap()
    }

    fn params(w: usize, interval: u32) -> CodecParams {
        CodecParams::new(WordSize::new(w).unwrap(), interval).unwrap()
    }

    const A: [u8; 8] = [0xAA, 0xBB, 0xCC, 0xDD, 0xEE, 0xFF, 0x00, 0x11];
    const B: [u8; 8] = [0xAA, 0xBB, 0x99, 0x88, 0xEE, 0xFF, 0x00, 0x11];

    #[test]
    fn single_packet_stream() {
        let s = compress_sequence(&[pkt(&A)], params(2, 1)).unwrap();
        assert_eq!(s.count(), 1);
        assert!(s.records()[0].is_literal());
        assert_eq!(compressed_size(&s), 11);
    }

    #[test]
    fn two_packet_stream_size() {
        let s = compress_sequence(&[pkt(&A), pkt(&B)], params(2, 2)).unwrap();
        assert_eq!(compressed_size(&s), 17);
        assert_eq!(decompress_sequence(&s).unwrap(), vec![pkt(&A), pkt(&B)]);
    }

    #[test]
    fn identical_hundred_byte_packets() {
        let p = pkt(&[0x5A; 100]);
        let packets = vec![p; 100];
        let s = compress_sequence(&packets, params(2, 10)).unwrap();
        let literal = s.records().iter().filter(|r| r.is_literal()).count();
        assert_eq!(literal, 10);
        for (i, r) in s.records().iter().enumerate() {
            if i % 10 != 0 {
                assert_eq!(r.encoded_len(), 1 + 2 + 7);
            }
        }
        assert_eq!(compressed_size(&s), 10 * 103 + 90 * 10);
        assert_eq!(decompress_sequence(&s).unwrap(), packets);
    }

    #[test]
    fn incompressible_falls_back_to_literal() {
        let a = pkt(&[0u8; 16]);
        let b = pkt(&[1u8; 16]);
        let s = compress_sequence(&[a, b], params(2, 100)).unwrap();
        assert!(s.records()[1].is_literal());
        assert_eq!(s.records()[1].encoded_len(), 19);
    }

    #[test]
    fn empty_sequence_rejected() {
        assert_eq!(
            compress_sequence(&[], CodecParams::default()),
            Err(CodecError::EmptySequence)
        );
    }

    #[test]
    fn serialized_header_layout() {
        let s = compress_sequence(&[pkt(&A), pkt(&B)], params(2, 7)).unwrap();
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..14], b"FMD1\x01\x02\x00\x00\x00\x07\x00\x00\x00\x02");
        assert_eq!(bytes.len(), 14 + 17);
        assert_eq!(CompressedStream::from_bytes(&bytes).unwrap(), s);
    }

    #[test]
    fn delta_head_is_corrupt_at_zero() {
        let s = compress_sequence(&[pkt(&A), pkt(&B)], params(2, 2)).unwrap();
        let mut bytes = s.to_bytes();
        bytes[14] = 0x00; // record 0 flags
        let err = CompressedStream::from_bytes(&bytes).unwrap_err();
        assert_eq!(err.record_index(), Some(0));
        assert!(err.is_corruption());
    }

    #[test]
    fn truncation_never_panics() {
        let packets: Vec<_> = (0..20u8).map(|i| pkt(&[i, 1, 2, 3, i, 5, 6, 7, 8])).collect();
        let bytes = compress_sequence(&packets, params(2, 5)).unwrap().to_bytes();
        for cut in 0..bytes.len() {
            let err = CompressedStream::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(err.is_corruption(), "cut {cut}: {err}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            CompressedStream::from_bytes(&extra),
            Err(CodecError::CorruptStream {
                kind: Corruption::TrailingBytes(1),
                ..
            })
        ));
    }

    #[test]
    fn entry_point_must_be_literal() {
        let a = pkt(&A);
        let recs = vec![encode_first(&a), encode_delta(&a, &a, WordSize::default())];
        let err = CompressedStream::from_records(params(2, 1), recs).unwrap_err();
        assert_eq!(
            err,
            CodecError::CorruptStream {
                index: 1,
                kind: Corruption::MissingEntryPoint
            }
        );
    }
}
