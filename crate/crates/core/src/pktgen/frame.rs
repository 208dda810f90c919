//! CCM (Ethernet OAM) and BFD-over-IPv4 frame layouts.
//!
//! ```text
//! CCM:  dst(6) src(6) [tpid(2) tci(2)]{0,2} 0x8902
//!       mdl/ver(1) opcode=1 flags(1) tlv_off=70 seq(4) mep(2)
//!       meg_id(48) counters(16) end_tlv=0                      89..=97 bytes
//!
//! BFD:  dst(6) src(6) [tpid(2) tci(2)]{0,2} 0x0800
//!       ipv4(20, proto 17) udp(8, dport 3784) bfd_control(24) 66..=74 bytes
//! ```
//!
//! The Ethernet FCS is not part of the stored frame.

use std::fmt;

use thiserror::Error;

pub const ETHERTYPE_CFM: u16 = 0x8902;
pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const TPID_CTAG: u16 = 0x8100;
pub const TPID_STAG: u16 = 0x88A8;
pub const BFD_CONTROL_PORT: u16 = 3784;

pub const CCM_OPCODE: u8 = 1;
pub const CCM_FIRST_TLV_OFFSET: u8 = 70;
pub const CCM_PDU_LEN: usize = 75;
pub const MEG_ID_LEN: usize = 48;
pub const BFD_CONTROL_LEN: usize = 24;
pub const BFD_VERSION: u8 = 1;

const ETH_HEADER_LEN: usize = 14;
const VLAN_TAG_LEN: usize = 4;
const IPV4_HEADER_LEN: usize = 20;
const UDP_HEADER_LEN: usize = 8;
const IPPROTO_UDP: u8 = 17;

pub const CCM_BASE_LEN: usize = ETH_HEADER_LEN + CCM_PDU_LEN;
pub const BFD_BASE_LEN: usize = ETH_HEADER_LEN + IPV4_HEADER_LEN + UDP_HEADER_LEN + BFD_CONTROL_LEN;
pub const MAX_VLAN_TAGS: usize = 2;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MacAddr(pub [u8; 6]);

impl fmt::Debug for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            m[0], m[1], m[2], m[3], m[4], m[5]
        )
    }
}

/// 802.1Q tag: TPID plus the full 16-bit TCI (PCP, DEI, VLAN ID).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VlanTag {
    pub tpid: u16,
    pub tci: u16,
}

impl VlanTag {
    pub fn vlan_id(&self) -> u16 {
        self.tci & 0x0FFF
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EthernetHeader {
    pub dst: MacAddr,
    pub src: MacAddr,
    pub vlan_tags: Vec<VlanTag>,
}

impl EthernetHeader {
    fn len(&self) -> usize {
        ETH_HEADER_LEN + VLAN_TAG_LEN * self.vlan_tags.len()
    }

    fn write(&self, ethertype: u16, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.dst.0);
        out.extend_from_slice(&self.src.0);
        for tag in &self.vlan_tags {
            out.extend_from_slice(&tag.tpid.to_be_bytes());
            out.extend_from_slice(&tag.tci.to_be_bytes());
        }
        out.extend_from_slice(&ethertype.to_be_bytes());
    }
}

/// Continuity Check Message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CcmFrame {
    pub eth: EthernetHeader,
    /// Maintenance domain level, 0..=7.
    pub md_level: u8,
    /// CFM version, 0..=31.
    pub version: u8,
    /// RDI bit and CCM interval code.
    pub flags: u8,
    pub sequence: u32,
    pub mep_id: u16,
    pub meg_id: [u8; MEG_ID_LEN],
    /// TxFCf, RxFCb, TxFCb and the reserved word.
    pub counters: [u8; 16],
}

/// BFD control packet carried in IPv4/UDP.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BfdFrame {
    pub eth: EthernetHeader,
    pub ip_tos: u8,
    pub ip_id: u16,
    pub ip_flags_fragment: u16,
    pub ip_ttl: u8,
    pub ip_src: [u8; 4],
    pub ip_dst: [u8; 4],
    pub udp_src_port: u16,
    pub bfd: BfdControl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BfdControl {
    pub version: u8,
    pub diag: u8,
    /// State (2 bits) and P/F/C/A/D/M flags, as on the wire.
    pub state_flags: u8,
    pub detect_mult: u8,
    pub my_discriminator: u32,
    pub your_discriminator: u32,
    pub desired_min_tx: u32,
    pub required_min_rx: u32,
    pub required_min_echo_rx: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    Ccm(CcmFrame),
    Bfd(BfdFrame),
}

impl Frame {
    pub fn eth(&self) -> &EthernetHeader {
        match self {
            Frame::Ccm(f) => &f.eth,
            Frame::Bfd(f) => &f.eth,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Frame::Ccm(f) => f.to_bytes(),
            Frame::Bfd(f) => f.to_bytes(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    Ethernet,
    Vlan,
    Cfm,
    Ipv4,
    Udp,
    Bfd,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Ethernet => "ethernet",
            Layer::Vlan => "vlan",
            Layer::Cfm => "cfm",
            Layer::Ipv4 => "ipv4",
            Layer::Udp => "udp",
            Layer::Bfd => "bfd",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{layer}: {reason}")]
pub struct ParseError {
    pub layer: Layer,
    pub reason: String,
}

fn fail<T>(layer: Layer, reason: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        layer,
        reason: reason.into(),
    })
}

/// RFC 1071 ones'-complement checksum.
pub fn internet_checksum(data: &[u8]) -> u16 {
    let mut sum: u32 = data
        .chunks(2)
        .map(|c| u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)]) as u32)
        .sum();
    while sum >> 16 != 0 {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}

impl CcmFrame {
    pub fn len(&self) -> usize {
        self.eth.len() + CCM_PDU_LEN
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len());
        self.eth.write(ETHERTYPE_CFM, &mut out);
        out.push((self.md_level & 0x07) << 5 | (self.version & 0x1F));
        out.push(CCM_OPCODE);
        out.push(self.flags);
        out.push(CCM_FIRST_TLV_OFFSET);
        out.extend_from_slice(&self.sequence.to_be_bytes());
        out.extend_from_slice(&self.mep_id.to_be_bytes());
        out.extend_from_slice(&self.meg_id);
        out.extend_from_slice(&self.counters);
        out.push(0); // End TLV
        out
    }
}

impl BfdFrame {
    pub fn len(&self) -> usize {
        self.eth.len() + IPV4_HEADER_LEN + UDP_HEADER_LEN + BFD_CONTROL_LEN
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len());
        self.eth.write(ETHERTYPE_IPV4, &mut out);

        let ip_start = out.len();
        let total_len = (IPV4_HEADER_LEN + UDP_HEADER_LEN + BFD_CONTROL_LEN) as u16;
        out.push(0x45);
        out.push(self.ip_tos);
        out.extend_from_slice(&total_len.to_be_bytes());
        out.extend_from_slice(&self.ip_id.to_be_bytes());
        out.extend_from_slice(&self.ip_flags_fragment.to_be_bytes());
        out.push(self.ip_ttl);
        out.push(IPPROTO_UDP);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&self.ip_src);
        out.extend_from_slice(&self.ip_dst);
        let csum = internet_checksum(&out[ip_start..]);
        out[ip_start + 10..ip_start + 12].copy_from_slice(&csum.to_be_bytes());

        out.extend_from_slice(&self.udp_src_port.to_be_bytes());
        out.extend_from_slice(&BFD_CONTROL_PORT.to_be_bytes());
        out.extend_from_slice(&((UDP_HEADER_LEN + BFD_CONTROL_LEN) as u16).to_be_bytes());
        out.extend_from_slice(&[0, 0]); // checksum unused

        let b = &self.bfd;
        out.push((b.version & 0x07) << 5 | (b.diag & 0x1F));
        out.push(b.state_flags);
        out.push(b.detect_mult);
        out.push(BFD_CONTROL_LEN as u8);
        for v in [
            b.my_discriminator,
            b.your_discriminator,
            b.desired_min_tx,
            b.required_min_rx,
            b.required_min_echo_rx,
        ] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out
    }
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

fn be32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(b[at..at + 4].try_into().unwrap())
}

fn parse_eth(bytes: &[u8]) -> Result<(EthernetHeader, u16, usize), ParseError> {
    if bytes.len() < ETH_HEADER_LEN {
        return fail(Layer::Ethernet, format!("{} bytes is shorter than a header", bytes.len()));
    }
    let dst = MacAddr(bytes[0..6].try_into().unwrap());
    let src = MacAddr(bytes[6..12].try_into().unwrap());
    let mut at = 12;
    let mut vlan_tags = Vec::new();
    loop {
        if bytes.len() < at + 2 {
            return fail(Layer::Vlan, "truncated tag");
        }
        let ty = be16(bytes, at);
        if ty != TPID_CTAG && ty != TPID_STAG {
            at += 2;
            return Ok((EthernetHeader { dst, src, vlan_tags }, ty, at));
        }
        if vlan_tags.len() == MAX_VLAN_TAGS {
            return fail(Layer::Vlan, "more than two tags");
        }
        if bytes.len() < at + VLAN_TAG_LEN + 2 {
            return fail(Layer::Vlan, "truncated tag");
        }
        vlan_tags.push(VlanTag {
            tpid: ty,
            tci: be16(bytes, at + 2),
        });
        at += VLAN_TAG_LEN;
    }
}

fn parse_ccm(eth: EthernetHeader, pdu: &[u8]) -> Result<CcmFrame, ParseError> {
    if pdu.len() != CCM_PDU_LEN {
        return fail(Layer::Cfm, format!("CCM PDU is {} bytes, expected {CCM_PDU_LEN}", pdu.len()));
    }
    if pdu[1] != CCM_OPCODE {
        return fail(Layer::Cfm, format!("opcode {} is not CCM", pdu[1]));
    }
    if pdu[3] != CCM_FIRST_TLV_OFFSET {
        return fail(Layer::Cfm, format!("first TLV offset {}", pdu[3]));
    }
    if pdu[CCM_PDU_LEN - 1] != 0 {
        return fail(Layer::Cfm, "missing End TLV");
    }
    Ok(CcmFrame {
        eth,
        md_level: pdu[0] >> 5,
        version: pdu[0] & 0x1F,
        flags: pdu[2],
        sequence: be32(pdu, 4),
        mep_id: be16(pdu, 8),
        meg_id: pdu[10..58].try_into().unwrap(),
        counters: pdu[58..74].try_into().unwrap(),
    })
}

fn parse_bfd(eth: EthernetHeader, ip: &[u8]) -> Result<BfdFrame, ParseError> {
    if ip.len() < IPV4_HEADER_LEN {
        return fail(Layer::Ipv4, "truncated header");
    }
    if ip[0] != 0x45 {
        return fail(Layer::Ipv4, format!("version/IHL byte {:#04x}", ip[0]));
    }
    if be16(ip, 2) as usize != ip.len() {
        return fail(Layer::Ipv4, format!("total length {} but {} bytes follow", be16(ip, 2), ip.len()));
    }
    if internet_checksum(&ip[..IPV4_HEADER_LEN]) != 0 {
        return fail(Layer::Ipv4, "bad header checksum");
    }
    if ip[9] != IPPROTO_UDP {
        return fail(Layer::Ipv4, format!("protocol {} is not UDP", ip[9]));
    }
    let udp = &ip[IPV4_HEADER_LEN..];
    if udp.len() < UDP_HEADER_LEN {
        return fail(Layer::Udp, "truncated header");
    }
    if be16(udp, 2) != BFD_CONTROL_PORT {
        return fail(Layer::Udp, format!("destination port {}", be16(udp, 2)));
    }
    if be16(udp, 4) as usize != udp.len() {
        return fail(Layer::Udp, "length mismatch");
    }
    let b = &udp[UDP_HEADER_LEN..];
    if b.len() != BFD_CONTROL_LEN || b[3] as usize != BFD_CONTROL_LEN {
        return fail(Layer::Bfd, format!("control packet is {} bytes", b.len()));
    }
    if b[0] >> 5 != BFD_VERSION {
        return fail(Layer::Bfd, format!("version {}", b[0] >> 5));
    }
    Ok(BfdFrame {
        eth,
        ip_tos: ip[1],
        ip_id: be16(ip, 4),
        ip_flags_fragment: be16(ip, 6),
        ip_ttl: ip[8],
        ip_src: ip[12..16].try_into().unwrap(),
        ip_dst: ip[16..20].try_into().unwrap(),
        udp_src_port: be16(udp, 0),
        bfd: BfdControl {
            version: b[0] >> 5,
            diag: b[0] & 0x1F,
            state_flags: b[1],
            detect_mult: b[2],
            my_discriminator: be32(b, 4),
            your_discriminator: be32(b, 8),
            desired_min_tx: be32(b, 12),
            required_min_rx: be32(b, 16),
            required_min_echo_rx: be32(b, 20),
        },
    })
}

/// Parses a stored frame as a CCM or a BFD control packet.
pub fn parse_frame(bytes: &[u8]) -> Result<Frame, ParseError> {
    let (eth, ethertype, at) = parse_eth(bytes)?;
    match ethertype {
        ETHERTYPE_CFM => parse_ccm(eth, &bytes[at..]).map(Frame::Ccm),
        ETHERTYPE_IPV4 => parse_bfd(eth, &bytes[at..]).map(Frame::Bfd),
        other => fail(Layer::Ethernet, format!("unknown EtherType {other:#06x}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eth(tags: usize) -> EthernetHeader {
        EthernetHeader {
            dst: MacAddr([1, 2, 3, 4, 5, 6]),
            src: MacAddr([0x02, 0, 0, 0, 0, 9]),
            vlan_tags: (0..tags)
                .map(|i| VlanTag {
                    tpid: TPID_CTAG,
                    tci: 100 + i as u16,
                })
                .collect(),
        }
    }

    fn ccm(tags: usize) -> CcmFrame {
        CcmFrame {
            eth: eth(tags),
            md_level: 5,
            version: 0,
            flags: 0x01,
            sequence: 7,
            mep_id: 42,
            meg_id: [0x33; MEG_ID_LEN],
            counters: [0; 16],
        }
    }

    fn bfd(tags: usize) -> BfdFrame {
        BfdFrame {
            eth: eth(tags),
            ip_tos: 0xC0,
            ip_id: 0,
            ip_flags_fragment: 0,
            ip_ttl: 255,
            ip_src: [10, 0, 0, 1],
            ip_dst: [10, 0, 0, 2],
            udp_src_port: 49152,
            bfd: BfdControl {
                version: 1,
                diag: 0,
                state_flags: 0xC0,
                detect_mult: 3,
                my_discriminator: 1,
                your_discriminator: 2,
                desired_min_tx: 3300,
                required_min_rx: 3300,
                required_min_echo_rx: 0,
            },
        }
    }

    #[test]
    fn frame_lengths() {
        for tags in 0..=2 {
            assert_eq!(ccm(tags).to_bytes().len(), 89 + 4 * tags);
            assert_eq!(bfd(tags).to_bytes().len(), 66 + 4 * tags);
        }
    }

    #[test]
    fn roundtrip() {
        for tags in 0..=2 {
            let c = ccm(tags);
            assert_eq!(parse_frame(&c.to_bytes()).unwrap(), Frame::Ccm(c));
            let b = bfd(tags);
            assert_eq!(parse_frame(&b.to_bytes()).unwrap(), Frame::Bfd(b));
        }
    }

    #[test]
    fn bad_ipv4_checksum() {
        let mut bytes = bfd(1).to_bytes();
        bytes[18 + 10] ^= 0xFF;
        let err = parse_frame(&bytes).unwrap_err();
        assert_eq!(err.layer, Layer::Ipv4);
    }

    #[test]
    fn garbage_fails_at_ethernet() {
        let err = parse_frame(&[0xEE; 10]).unwrap_err();
        assert_eq!(err.layer, Layer::Ethernet);
        let mut unknown = ccm(0).to_bytes();
        unknown[12] = 0x86;
        unknown[13] = 0xDD;
        assert_eq!(parse_frame(&unknown).unwrap_err().layer, Layer::Ethernet);
    }

    #[test]
    fn checksum_known_vector() {
        // Commonly published IPv4 header checksum vector.
        let hdr = [
            0x45, 0x00, 0x00, 0x73, 0x00, 0x00, 0x40, 0x00, 0x40, 0x11, 0x00, 0x00, 0xc0, 0xa8,
            0x00, 0x01, 0xc0, 0xa8, 0x00, 0xc7,
        ];
        assert_eq!(internet_checksum(&hdr), 0xb861);
    }
}
