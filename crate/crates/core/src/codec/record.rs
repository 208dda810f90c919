use super::{CodecError, Corruption, RawPacket, WordSize, MAX_PACKET_LEN, RECORD_HEADER_LEN};

const FLAG_LITERAL: u8 = 0x01;

/// One stored packet: either verbatim or as a delta against its predecessor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DeltaRecord {
    /// Entry point (or incompressible packet) stored verbatim.
    Literal(RawPacket),
    /// Word-level difference against the previous packet.
    Delta {
        /// Length of the reconstructed packet in bytes.
        length: u16,
        /// One bit per word, MSB first; 1 = copy the word from the predecessor.
        bitmap: Vec<u8>,
        /// Bytes of the words whose bit is 0, in word order.
        values: Vec<u8>,
    },
}

#[inline]
fn bit(bitmap: &[u8], j: usize) -> bool {
    bitmap[j / 8] & (0x80 >> (j % 8)) != 0
}

impl DeltaRecord {
    #[inline]
    pub fn is_literal(&self) -> bool {
        matches!(self, DeltaRecord::Literal(_))
    }

    pub fn flags(&self) -> u8 {
        match self {
            DeltaRecord::Literal(_) => FLAG_LITERAL,
            DeltaRecord::Delta { .. } => 0,
        }
    }

    /// Length of the packet this record decodes to.
    pub fn packet_len(&self) -> usize {
        match self {
            DeltaRecord::Literal(p) => p.len(),
            DeltaRecord::Delta { length, .. } => *length as usize,
        }
    }

    /// Serialized size, header included.
    pub fn encoded_len(&self) -> usize {
        RECORD_HEADER_LEN
            + match self {
                DeltaRecord::Literal(p) => p.len(),
                DeltaRecord::Delta { bitmap, values, .. } => bitmap.len() + values.len(),
            }
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.push(self.flags());
        out.extend_from_slice(&(self.packet_len() as u16).to_be_bytes());
        match self {
            DeltaRecord::Literal(p) => out.extend_from_slice(p.as_bytes()),
            DeltaRecord::Delta { bitmap, values, .. } => {
                out.extend_from_slice(bitmap);
                out.extend_from_slice(values);
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.write_to(&mut out);
        out
    }

    /// Parses one record from the front of `buf`, returning it with the
    /// number of bytes consumed.
    pub fn parse(buf: &[u8], word_size: WordSize) -> Result<(DeltaRecord, usize), Corruption> {
        let need = |needed: usize| {
            if buf.len() < needed {
                Err(Corruption::Truncated {
                    needed,
                    available: buf.len(),
                })
            } else {
                Ok(())
            }
        };
        need(RECORD_HEADER_LEN)?;
        let flags = buf[0];
        if flags & !FLAG_LITERAL != 0 {
            return Err(Corruption::ReservedFlags(flags));
        }
        let length = u16::from_be_bytes([buf[1], buf[2]]) as usize;
        if length == 0 || length > MAX_PACKET_LEN {
            return Err(Corruption::BadLength(length));
        }
        let body = &buf[RECORD_HEADER_LEN..];

        if flags & FLAG_LITERAL != 0 {
            need(RECORD_HEADER_LEN + length)?;
            let packet = RawPacket::from_slice(&body[..length]).expect("length checked");
            return Ok((DeltaRecord::Literal(packet), RECORD_HEADER_LEN + length));
        }

        let words = word_size.words(length);
        let bitmap_len = word_size.bitmap_len(length);
        need(RECORD_HEADER_LEN + bitmap_len)?;
        let bitmap = &body[..bitmap_len];
        let pad_bits = bitmap_len * 8 - words;
        if pad_bits > 0 && bitmap[bitmap_len - 1] & ((1u8 << pad_bits) - 1) != 0 {
            return Err(Corruption::BitmapPadding);
        }
        let values_len: usize = (0..words)
            .filter(|&j| !bit(bitmap, j))
            .map(|j| word_size.word_range(j, length).len())
            .sum();
        let total = RECORD_HEADER_LEN + bitmap_len + values_len;
        need(total)?;
        Ok((
            DeltaRecord::Delta {
                length: length as u16,
                bitmap: bitmap.to_vec(),
                values: body[bitmap_len..bitmap_len + values_len].to_vec(),
            },
            total,
        ))
    }

    /// Offset into `values` of every word, or `None` for copied words.
    ///
    /// Offsets depend only on the bitmap prefix, so all words of a delta
    /// record can be reconstructed independently of one another.
    pub fn value_offsets(&self, word_size: WordSize) -> Vec<Option<usize>> {
        match self {
            DeltaRecord::Literal(p) => {
                let len = p.len();
                (0..word_size.words(len))
                    .map(|j| Some(j * word_size.get()))
                    .collect()
            }
            DeltaRecord::Delta { length, bitmap, .. } => {
                let len = *length as usize;
                let mut offset = 0;
                (0..word_size.words(len))
                    .map(|j| {
                        if bit(bitmap, j) {
                            None
                        } else {
                            let at = offset;
                            offset += word_size.word_range(j, len).len();
                            Some(at)
                        }
                    })
                    .collect()
            }
        }
    }

    /// Reconstructs the packet. `prev` is ignored for literal records.
    pub fn decode(&self, prev: Option<&RawPacket>, word_size: WordSize) -> Result<RawPacket, CodecError> {
        match self {
            DeltaRecord::Literal(p) => Ok(p.clone()),
            DeltaRecord::Delta { .. } => match prev {
                Some(prev) => decode_delta(self, prev, word_size),
                None => Err(CodecError::CorruptRecord(Corruption::MissingEntryPoint)),
            },
        }
    }
}

/// Stores `packet` verbatim.
pub fn encode_first(packet: &RawPacket) -> DeltaRecord {
    DeltaRecord::Literal(packet.clone())
}

/// Encodes `curr` as a word-level delta against `prev`.
///
/// A word is marked as copied only when every one of its bytes exists in
/// `prev` and matches; words reaching past the end of `prev` are always
/// emitted as values.
pub fn encode_delta(prev: &RawPacket, curr: &RawPacket, word_size: WordSize) -> DeltaRecord {
    let (p, c) = (prev.as_bytes(), curr.as_bytes());
    let len = c.len();
    let words = word_size.words(len);
    let mut bitmap = vec![0u8; word_size.bitmap_len(len)];
    let mut values = Vec::new();
    for j in 0..words {
        let range = word_size.word_range(j, len);
        if range.end <= p.len() && c[range.clone()] == p[range.clone()] {
            bitmap[j / 8] |= 0x80 >> (j % 8);
        } else {
            values.extend_from_slice(&c[range]);
        }
    }
    DeltaRecord::Delta {
        length: len as u16,
        bitmap,
        values,
    }
}

/// Reconstructs a packet from a delta record and its predecessor.
pub fn decode_delta(record: &DeltaRecord, prev: &RawPacket, word_size: WordSize) -> Result<RawPacket, CodecError> {
    let (length, bitmap, values) = match record {
        DeltaRecord::Literal(p) => return Ok(p.clone()),
        DeltaRecord::Delta {
            length,
            bitmap,
            values,
        } => (*length as usize, bitmap, values),
    };
    let corrupt = |kind| Err(CodecError::CorruptRecord(kind));
    if length == 0 || length > MAX_PACKET_LEN {
        return corrupt(Corruption::BadLength(length));
    }
    if bitmap.len() != word_size.bitmap_len(length) {
        return corrupt(Corruption::Truncated {
            needed: word_size.bitmap_len(length),
            available: bitmap.len(),
        });
    }

    let p = prev.as_bytes();
    let mut out = vec![0u8; length];
    let mut m = 0;
    for j in 0..word_size.words(length) {
        let range = word_size.word_range(j, length);
        if bit(bitmap, j) {
            if range.end > p.len() {
                return corrupt(Corruption::CopyBeyondPredecessor {
                    word: j,
                    prev_len: p.len(),
                });
            }
            out[range.clone()].copy_from_slice(&p[range]);
        } else {
            let n = range.len();
            if m + n > values.len() {
                return corrupt(Corruption::ValuesExhausted { word: j });
            }
            out[range].copy_from_slice(&values[m..m + n]);
            m += n;
        }
    }
    if m != values.len() {
        return corrupt(Corruption::TrailingValues(values.len() - m));
    }
    Ok(RawPacket(out))
}
