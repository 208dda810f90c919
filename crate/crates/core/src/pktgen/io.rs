//! Dataset files: the length-prefixed `FMP1` format and classic pcap.

use thiserror::Error;

use crate::codec::{CodecError, RawPacket};

pub const FMP1_MAGIC: &[u8; 4] = b"FMP1";
pub const PCAP_MAGIC: u32 = 0xA1B2_C3D4;
const PCAP_LINKTYPE_ETHERNET: u32 = 1;
const PCAP_SNAPLEN: u32 = 65535;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("unrecognised dataset format")]
    UnknownFormat,
    #[error("truncated {what} at byte {offset}")]
    Truncated { what: &'static str, offset: usize },
    #[error("{0} trailing bytes after the last packet")]
    TrailingBytes(usize),
    #[error("pcap link type {0} is not Ethernet")]
    LinkType(u32),
    #[error("pcap record {index} captured {captured} of {original} bytes")]
    Snapped {
        index: usize,
        captured: usize,
        original: usize,
    },
    #[error("packet {index}: {source}")]
    Packet {
        index: usize,
        #[source]
        source: CodecError,
    },
}

/// Per-packet 2-byte big-endian length followed by the packet bytes.
pub fn write_fmp1_body(packets: &[RawPacket], out: &mut Vec<u8>) {
    for p in packets {
        out.extend_from_slice(&(p.len() as u16).to_be_bytes());
        out.extend_from_slice(p.as_bytes());
    }
}

pub fn fmp1_body(packets: &[RawPacket]) -> Vec<u8> {
    let mut out = Vec::with_capacity(packets.iter().map(|p| p.len() + 2).sum());
    write_fmp1_body(packets, &mut out);
    out
}

pub fn write_fmp1(packets: &[RawPacket]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + packets.iter().map(|p| p.len() + 2).sum::<usize>());
    out.extend_from_slice(FMP1_MAGIC);
    out.extend_from_slice(&(packets.len() as u32).to_be_bytes());
    write_fmp1_body(packets, &mut out);
    out
}

pub fn read_fmp1(buf: &[u8]) -> Result<Vec<RawPacket>, FormatError> {
    if buf.len() < 8 || &buf[..4] != FMP1_MAGIC {
        return Err(FormatError::UnknownFormat);
    }
    let count = u32::from_be_bytes(buf[4..8].try_into().unwrap()) as usize;
    let mut at = 8;
    let mut packets = Vec::with_capacity(count.min(buf.len() / 3));
    for index in 0..count {
        if buf.len() < at + 2 {
            return Err(FormatError::Truncated {
                what: "length prefix",
                offset: at,
            });
        }
        let len = u16::from_be_bytes([buf[at], buf[at + 1]]) as usize;
        at += 2;
        if buf.len() < at + len {
            return Err(FormatError::Truncated {
                what: "packet",
                offset: at,
            });
        }
        let p = RawPacket::from_slice(&buf[at..at + len]).map_err(|source| FormatError::Packet { index, source })?;
        packets.push(p);
        at += len;
    }
    if at != buf.len() {
        return Err(FormatError::TrailingBytes(buf.len() - at));
    }
    Ok(packets)
}

/// Classic little-endian pcap, Ethernet link type, zero timestamps.
pub fn write_pcap(packets: &[RawPacket]) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + packets.iter().map(|p| p.len() + 16).sum::<usize>());
    out.extend_from_slice(&PCAP_MAGIC.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&0i32.to_le_bytes()); // thiszone
    out.extend_from_slice(&0u32.to_le_bytes()); // sigfigs
    out.extend_from_slice(&PCAP_SNAPLEN.to_le_bytes());
    out.extend_from_slice(&PCAP_LINKTYPE_ETHERNET.to_le_bytes());
    for p in packets {
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&(p.len() as u32).to_le_bytes());
        out.extend_from_slice(&(p.len() as u32).to_le_bytes());
        out.extend_from_slice(p.as_bytes());
    }
    out
}

/// Reads classic pcap in either byte order (microsecond or nanosecond
/// magic).
pub fn read_pcap(buf: &[u8]) -> Result<Vec<RawPacket>, FormatError> {
    if buf.len() < 24 {
        return Err(FormatError::UnknownFormat);
    }
    let magic = u32::from_le_bytes(buf[..4].try_into().unwrap());
    let le = match magic {
        0xA1B2_C3D4 | 0xA1B2_3C4D => true,
        0xD4C3_B2A1 | 0x4D3C_B2A1 => false,
        _ => return Err(FormatError::UnknownFormat),
    };
    let u32_at = |at: usize| {
        let b: [u8; 4] = buf[at..at + 4].try_into().unwrap();
        if le {
            u32::from_le_bytes(b)
        } else {
            u32::from_be_bytes(b)
        }
    };
    let link = u32_at(20);
    if link != PCAP_LINKTYPE_ETHERNET {
        return Err(FormatError::LinkType(link));
    }
    let mut at = 24;
    let mut packets = Vec::new();
    while at < buf.len() {
        let index = packets.len();
        if buf.len() < at + 16 {
            return Err(FormatError::Truncated {
                what: "record header",
                offset: at,
            });
        }
        let captured = u32_at(at + 8) as usize;
        let original = u32_at(at + 12) as usize;
        at += 16;
        if captured != original {
            return Err(FormatError::Snapped {
                index,
                captured,
                original,
            });
        }
        if buf.len() < at + captured {
            return Err(FormatError::Truncated {
                what: "packet",
                offset: at,
            });
        }
        let p = RawPacket::from_slice(&buf[at..at + captured]).map_err(|source| FormatError::Packet { index, source })?;
        packets.push(p);
        at += captured;
    }
    Ok(packets)
}

/// Reads an `FMP1` or pcap dataset, chosen by magic.
pub fn read_dataset(buf: &[u8]) -> Result<Vec<RawPacket>, FormatError> {
    if buf.starts_with(FMP1_MAGIC) {
        read_fmp1(buf)
    } else {
        read_pcap(buf)
    }
}
