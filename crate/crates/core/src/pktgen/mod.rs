//! Synthetic CCM/BFD datasets.
//!
//! Half of every dataset is CCM frames, half BFD control packets. Each frame
//! carries 0, 1 or 2 VLAN tags, a source MAC from the device's address pool
//! and a random destination MAC. CCMs share a MEG ID in consecutive groups.
//! See [`rng::DatasetRng`] for the seed-to-stream mapping and
//! [`generate_unarranged`] for the draw order.

pub mod frame;
pub mod io;
pub mod rng;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::RawPacket;
pub use frame::{parse_frame, BfdControl, BfdFrame, CcmFrame, EthernetHeader, Frame, Layer, MacAddr, ParseError, VlanTag};
use frame::{MAX_VLAN_TAGS, MEG_ID_LEN, TPID_CTAG};
use rng::DatasetRng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Sorted by frame type and length, CCMs of one MEG kept together.
    #[default]
    Ordered,
    /// Uniformly shuffled.
    Random,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ordered => "ordered",
            Mode::Random => "random",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ordered" => Ok(Mode::Ordered),
            "random" => Ok(Mode::Random),
            _ => Err(format!("unknown mode {s:?} (expected ordered or random)")),
        }
    }
}

/// How protocol fields other than addresses, VLAN tags and MEG IDs are
/// filled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldProfile {
    /// Stored frames are static per-session templates. Per-session
    /// identifiers vary (BFD discriminators and UDP source port; MEP ID and
    /// MD level per MEG); timers, state and counters take fixed values.
    #[default]
    Template,
    /// Every dynamic field (sequence numbers, MEP IDs, flags, BFD
    /// discriminators, intervals, state, IP ID) drawn per packet.
    Randomized,
}

impl FromStr for FieldProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "template" => Ok(FieldProfile::Template),
            "randomized" => Ok(FieldProfile::Randomized),
            _ => Err(format!("unknown field profile {s:?} (expected template or randomized)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub total_packets: usize,
    pub seed: u64,
    pub mode: Mode,
    pub mac_pool_size: u32,
    pub meg_group_size: usize,
    pub vlan_choices: Vec<u8>,
    pub profile: FieldProfile,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            total_packets: 100_000,
            seed: 1,
            mode: Mode::Ordered,
            mac_pool_size: 32,
            meg_group_size: 3,
            vlan_choices: vec![0, 1, 2],
            profile: FieldProfile::Template,
        }
    }
}

impl DatasetSpec {
    pub fn new(total_packets: usize, seed: u64, mode: Mode) -> Self {
        DatasetSpec {
            total_packets,
            seed,
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), PktgenError> {
        let bad = |msg: String| Err(PktgenError::InvalidSpec(msg));
        if self.total_packets < 2 || !self.total_packets.is_multiple_of(2) {
            return bad(format!(
                "total_packets must be even and at least 2, got {}",
                self.total_packets
            ));
        }
        if self.mac_pool_size == 0 {
            return bad("mac_pool_size must be at least 1".into());
        }
        if self.meg_group_size == 0 {
            return bad("meg_group_size must be at least 1".into());
        }
        if self.vlan_choices.is_empty() {
            return bad("vlan_choices must not be empty".into());
        }
        if let Some(n) = self.vlan_choices.iter().find(|&&n| n as usize > MAX_VLAN_TAGS) {
            return bad(format!("at most {MAX_VLAN_TAGS} VLAN tags supported, got {n}"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PktgenError {
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("packet {index}: {source}")]
    Unparseable {
        index: usize,
        #[source]
        source: ParseError,
    },
}

/// Y.1731 ICC-based MEG ID: reserved 0x01, format 32, length 13, then 13
/// characters of ICC + UMC, zero padded to 48 bytes.
fn icc_meg_id(rng: &mut DatasetRng) -> [u8; MEG_ID_LEN] {
    const ALPHABET: &[u8; 36] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    let mut id = [0u8; MEG_ID_LEN];
    id[..3].copy_from_slice(&[0x01, 0x20, 0x0D]);
    for b in &mut id[3..16] {
        *b = *rng.choose(ALPHABET);
    }
    id
}

/// The device's source addresses: a contiguous range starting at a random
/// locally administered unicast address.
fn mac_pool(rng: &mut DatasetRng, size: u32) -> Vec<MacAddr> {
    let mut base: [u8; 6] = rng.bytes();
    base[0] = (base[0] & 0xFC) | 0x02;
    let mut be = [0u8; 8];
    be[2..].copy_from_slice(&base);
    let base = u64::from_be_bytes(be);
    (0..size as u64)
        .map(|i| {
            let v = (base + i) & 0xFFFF_FFFF_FFFF;
            MacAddr(v.to_be_bytes()[2..].try_into().unwrap())
        })
        .collect()
}

fn ethernet(rng: &mut DatasetRng, pool: &[MacAddr], vlan_choices: &[u8]) -> EthernetHeader {
    let dst = MacAddr(rng.bytes());
    let src = *rng.choose(pool);
    let tags = *rng.choose(vlan_choices);
    let vlan_tags = (0..tags)
        .map(|_| VlanTag {
            tpid: TPID_CTAG,
            tci: rng.u16(),
        })
        .collect();
    EthernetHeader { dst, src, vlan_tags }
}

struct MegContext {
    meg_id: [u8; MEG_ID_LEN],
    md_level: u8,
    mep_id: u16,
}

fn ccm(rng: &mut DatasetRng, eth: EthernetHeader, meg: &MegContext, profile: FieldProfile) -> CcmFrame {
    let (md_level, flags, sequence, mep_id) = match profile {
        // Interval code 1 (3.33 ms); sequence number unused.
        FieldProfile::Template => (meg.md_level, 0x01, 0, meg.mep_id),
        FieldProfile::Randomized => (
            rng.below(8) as u8,
            rng.u8(),
            rng.u32(),
            rng.range_inclusive(1, 8191) as u16,
        ),
    };
    CcmFrame {
        eth,
        md_level,
        version: 0,
        flags,
        sequence,
        mep_id,
        meg_id: meg.meg_id,
        counters: [0; 16],
    }
}

fn bfd(rng: &mut DatasetRng, eth: EthernetHeader, profile: FieldProfile) -> BfdFrame {
    let ip_src = rng.bytes();
    let ip_dst = rng.bytes();
    let udp_src_port = rng.range_inclusive(49152, 65535) as u16;
    let (ip_id, bfd) = match profile {
        FieldProfile::Template => (
            0,
            BfdControl {
                version: frame::BFD_VERSION,
                diag: 0,
                state_flags: 0xC0, // Up, no flags
                detect_mult: 3,
                my_discriminator: rng.range_inclusive(1, u32::MAX),
                your_discriminator: rng.range_inclusive(1, u32::MAX),
                desired_min_tx: 3300,
                required_min_rx: 3300,
                required_min_echo_rx: 0,
            },
        ),
        FieldProfile::Randomized => (
            rng.u16(),
            BfdControl {
                version: frame::BFD_VERSION,
                diag: rng.below(32) as u8,
                state_flags: rng.u8(),
                detect_mult: rng.range_inclusive(1, 255) as u8,
                my_discriminator: rng.u32(),
                your_discriminator: rng.u32(),
                desired_min_tx: rng.u32(),
                required_min_rx: rng.u32(),
                required_min_echo_rx: rng.u32(),
            },
        ),
    };
    BfdFrame {
        eth,
        ip_tos: 0xC0,
        ip_id,
        ip_flags_fragment: 0,
        ip_ttl: 255,
        ip_src,
        ip_dst,
        udp_src_port,
        bfd,
    }
}

/// Generates the frames in creation order (all CCMs, then all BFDs) along
/// with the generator state, before any arrangement.
///
/// Draw order: MAC pool base (6 bytes); then per CCM, at the start of each
/// MEG group: MEG ID characters, MD level, MEP ID; per frame: destination
/// MAC, source pool index, tag count, one TCI per tag, then the profile's
/// protocol fields. BFD frames draw Ethernet fields, source and destination
/// IPv4 addresses, UDP source port, then the profile's fields.
fn generate_with_rng(spec: &DatasetSpec) -> Result<(Vec<Frame>, DatasetRng), PktgenError> {
    spec.validate()?;
    let mut rng = DatasetRng::new(spec.seed);
    let pool = mac_pool(&mut rng, spec.mac_pool_size);
    let half = spec.total_packets / 2;
    let mut frames = Vec::with_capacity(spec.total_packets);

    let mut meg = None;
    for i in 0..half {
        if i % spec.meg_group_size == 0 {
            meg = Some(MegContext {
                meg_id: icc_meg_id(&mut rng),
                md_level: rng.below(8) as u8,
                mep_id: rng.range_inclusive(1, 8191) as u16,
            });
        }
        let eth = ethernet(&mut rng, &pool, &spec.vlan_choices);
        let meg = meg.as_ref().expect("set at group start");
        frames.push(Frame::Ccm(ccm(&mut rng, eth, meg, spec.profile)));
    }
    for _ in 0..half {
        let eth = ethernet(&mut rng, &pool, &spec.vlan_choices);
        frames.push(Frame::Bfd(bfd(&mut rng, eth, spec.profile)));
    }
    Ok((frames, rng))
}

pub fn generate_unarranged(spec: &DatasetSpec) -> Result<Vec<Frame>, PktgenError> {
    generate_with_rng(spec).map(|(frames, _)| frames)
}

fn to_packets(frames: &[Frame]) -> Vec<RawPacket> {
    frames
        .iter()
        .map(|f| RawPacket::new(f.to_bytes()).expect("frames are 66..=97 bytes"))
        .collect()
}

/// Generates a dataset and arranges it according to `spec.mode`. Random mode
/// shuffles with the same generator, continuing after the last frame.
pub fn generate(spec: &DatasetSpec) -> Result<Vec<RawPacket>, PktgenError> {
    let (frames, mut rng) = generate_with_rng(spec)?;
    match spec.mode {
        Mode::Ordered => Ok(arrange_frames(frames).into_iter().map(|(_, p)| p).collect()),
        Mode::Random => {
            let mut packets = to_packets(&frames);
            rng.shuffle(&mut packets);
            Ok(packets)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct OrderKey<'a> {
    kind: u8,
    len: usize,
    meg_id: &'a [u8],
}

fn order_key(frame: &Frame, len: usize) -> OrderKey<'_> {
    match frame {
        Frame::Ccm(c) => OrderKey {
            kind: 0,
            len,
            meg_id: &c.meg_id,
        },
        Frame::Bfd(_) => OrderKey {
            kind: 1,
            len,
            meg_id: &[],
        },
    }
}

fn arrange_frames(frames: Vec<Frame>) -> Vec<(Frame, RawPacket)> {
    let mut tagged: Vec<(Frame, RawPacket)> = frames
        .into_iter()
        .map(|f| {
            let p = RawPacket::new(f.to_bytes()).expect("frames are 66..=97 bytes");
            (f, p)
        })
        .collect();
    tagged.sort_by(|a, b| order_key(&a.0, a.1.len()).cmp(&order_key(&b.0, b.1.len())));
    tagged
}

/// Stable sort by (frame type, length, MEG ID for CCMs): CCMs before BFDs,
/// and every run of equal-length CCMs of one MEG contiguous.
pub fn arrange_ordered(packets: &[RawPacket]) -> Result<Vec<RawPacket>, PktgenError> {
    let frames = packets
        .iter()
        .enumerate()
        .map(|(index, p)| parse_frame(p.as_bytes()).map_err(|source| PktgenError::Unparseable { index, source }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut order: Vec<usize> = (0..packets.len()).collect();
    order.sort_by(|&a, &b| order_key(&frames[a], packets[a].len()).cmp(&order_key(&frames[b], packets[b].len())));
    Ok(order.into_iter().map(|i| packets[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    fn spec(total: usize, seed: u64, mode: Mode) -> DatasetSpec {
        DatasetSpec::new(total, seed, mode)
    }

    #[test]
    fn six_packets_one_meg() {
        for mode in [Mode::Ordered, Mode::Random] {
            let packets = generate(&spec(6, 11, mode)).unwrap();
            assert_eq!(packets.len(), 6);
            let frames: Vec<_> = packets.iter().map(|p| parse_frame(p.as_bytes()).unwrap()).collect();
            let megs: HashSet<_> = frames
                .iter()
                .filter_map(|f| match f {
                    Frame::Ccm(c) => Some(c.meg_id),
                    _ => None,
                })
                .collect();
            assert_eq!(frames.iter().filter(|f| matches!(f, Frame::Ccm(_))).count(), 3);
            assert_eq!(megs.len(), 1);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate(&spec(200, 5, Mode::Random)).unwrap();
        let b = generate(&spec(200, 5, Mode::Random)).unwrap();
        let c = generate(&spec(200, 6, Mode::Random)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn spec_validation() {
        assert!(generate(&spec(5, 1, Mode::Ordered)).is_err());
        assert!(generate(&spec(0, 1, Mode::Ordered)).is_err());
        let mut s = spec(4, 1, Mode::Ordered);
        s.vlan_choices = vec![3];
        assert!(s.validate().is_err());
        s.vlan_choices = vec![];
        assert!(s.validate().is_err());
    }

    #[test]
    fn meg_groups_in_creation_order() {
        let mut s = spec(60, 9, Mode::Ordered);
        s.meg_group_size = 4;
        let frames = generate_unarranged(&s).unwrap();
        let megs: Vec<_> = frames
            .iter()
            .filter_map(|f| match f {
                Frame::Ccm(c) => Some(c.meg_id),
                _ => None,
            })
            .collect();
        assert_eq!(megs.len(), 30);
        for (g, chunk) in megs.chunks(4).enumerate() {
            assert!(chunk.iter().all(|m| *m == chunk[0]), "group {g}");
        }
        let distinct: HashSet<_> = megs.iter().collect();
        assert_eq!(distinct.len(), 8);
    }

    #[test]
    fn source_macs_from_pool() {
        let mut s = spec(2000, 2, Mode::Random);
        s.mac_pool_size = 5;
        let frames = generate_unarranged(&s).unwrap();
        let srcs: HashSet<_> = frames.iter().map(|f| f.eth().src).collect();
        assert!(srcs.len() <= 5);
    }

    #[test]
    fn ordering_is_idempotent_and_reverses() {
        let ordered = generate(&spec(300, 4, Mode::Ordered)).unwrap();
        assert_eq!(arrange_ordered(&ordered).unwrap(), ordered);
        let random = generate(&spec(300, 4, Mode::Random)).unwrap();
        let mut sorted_random = arrange_ordered(&random).unwrap();
        let mut sorted_ordered = ordered.clone();
        sorted_random.sort();
        sorted_ordered.sort();
        assert_eq!(sorted_random, sorted_ordered);
    }

    #[test]
    fn unparseable_reports_index() {
        let mut packets = generate(&spec(4, 1, Mode::Ordered)).unwrap();
        packets.insert(2, RawPacket::new(vec![0; 10]).unwrap());
        match arrange_ordered(&packets) {
            Err(PktgenError::Unparseable { index, source }) => {
                assert_eq!(index, 2);
                assert_eq!(source.layer, Layer::Ethernet);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn randomized_profile_parses() {
        let mut s = spec(400, 3, Mode::Random);
        s.profile = FieldProfile::Randomized;
        for p in generate(&s).unwrap() {
            parse_frame(p.as_bytes()).unwrap();
        }
    }
}
