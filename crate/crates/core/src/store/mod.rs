//! Simulated on-chip packet store.
//!
//! A [`PacketArena`] is a fixed-size byte memory holding the records of a
//! compressed stream back to back from offset 0. The generation engine walks
//! it with a read-decompress-write sweep: every record is read, decoded,
//! handed to a [`TransmitSink`] and written back. Insertions and removals are
//! folded into one sweep; records behind the splice point move up or down in
//! memory while the engine holds not-yet-written records in a small cache.
//!
//! Every update sweep runs twice: a dry pass that validates the request and
//! checks capacity and cache bounds without touching memory, then the
//! committing pass. A rejected request leaves the arena unchanged.
//!
//! External indices are 1-based (`P_1 .. P_N`).

mod script;

pub use script::{parse_script, run_script, ScriptError, ScriptOp};

use std::collections::VecDeque;

use thiserror::Error;

use crate::codec::{
    compress_sequence, encode_at, CodecError, CodecParams, CompressedStream, Corruption, DeltaRecord, RawPacket,
    MAX_RECORD_LEN,
};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"FMA1";

/// Bytes the engine may hold read but not yet written back: two records of
/// the largest possible size.
pub const ENGINE_CACHE_BYTES: usize = 2 * MAX_RECORD_LEN;

pub const REPORT_CSV_HEADER: &str = "count,bytes_read,bytes_written,updates_applied";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("capacity exceeded: {required} bytes required, {available} available")]
    CapacityExceeded { required: usize, available: usize },
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("cannot remove the only packet in the arena")]
    LastPacket,
    #[error("an update is already pending")]
    UpdatePending,
    #[error("stale update for index {index}: {reason}")]
    StaleRepatch { index: usize, reason: String },
    #[error("engine cache would hold {needed} bytes, limit {limit}")]
    CacheOverflow { needed: usize, limit: usize },
    #[error("invalid arena snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl StoreError {
    pub fn is_corruption(&self) -> bool {
        match self {
            StoreError::Codec(e) => e.is_corruption(),
            StoreError::Snapshot(_) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UpdateKind {
    Insert {
        /// The inserted packet, used to validate `record`.
        packet: RawPacket,
        /// The inserted packet encoded against its new predecessor.
        record: DeltaRecord,
    },
    Remove,
}

/// One pending splice.
///
/// `repatched` is the record that follows the splice point re-encoded
/// against its new predecessor (`P'_{k+1}` for a removal, `P'_k` for an
/// insertion); `None` when nothing follows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateRequest {
    pub kind: UpdateKind,
    /// 1-based position: the removed packet, or where the new one lands.
    pub index: usize,
    pub repatched: Option<DeltaRecord>,
}

impl UpdateRequest {
    pub fn new_record(&self) -> Option<&DeltaRecord> {
        match &self.kind {
            UpdateKind::Insert { record, .. } => Some(record),
            UpdateKind::Remove => None,
        }
    }

    pub fn is_insert(&self) -> bool {
        matches!(self.kind, UpdateKind::Insert { .. })
    }
}

/// Receives emitted packets in order, with their 1-based index.
pub trait TransmitSink {
    fn transmit(&mut self, index: usize, packet: &RawPacket);
}

impl<F: FnMut(usize, &RawPacket)> TransmitSink for F {
    fn transmit(&mut self, index: usize, packet: &RawPacket) {
        self(index, packet)
    }
}

/// Collects emissions into a vector.
impl TransmitSink for Vec<RawPacket> {
    fn transmit(&mut self, _index: usize, packet: &RawPacket) {
        self.push(packet.clone());
    }
}

/// Discards emissions.
pub struct NullSink;

impl TransmitSink for NullSink {
    fn transmit(&mut self, _index: usize, _packet: &RawPacket) {}
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepReport {
    /// Packets emitted.
    pub count: usize,
    pub bytes_read: usize,
    pub bytes_written: usize,
    pub updates_applied: usize,
    /// Largest amount of record data held in the engine cache.
    pub peak_cache_bytes: usize,
    pub peak_cache_records: usize,
}

impl SweepReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.count, self.bytes_read, self.bytes_written, self.updates_applied
        )
    }
}

/// Fixed-capacity contiguous record memory.
#[derive(Clone, Debug)]
pub struct PacketArena {
    params: CodecParams,
    memory: Vec<u8>,
    used: usize,
    count: usize,
    /// Byte offset of every entry-point record.
    entries: Vec<usize>,
    pending: Option<UpdateRequest>,
}

impl PartialEq for PacketArena {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.capacity() == other.capacity()
            && self.count == other.count
            && self.records_bytes() == other.records_bytes()
            && self.pending == other.pending
    }
}

impl PacketArena {
    pub fn load(packets: &[RawPacket], params: CodecParams, capacity: usize) -> Result<Self, StoreError> {
        let stream = compress_sequence(packets, params)?;
        Self::from_stream(&stream, capacity)
    }

    /// Places an already compressed stream in a fresh arena.
    pub fn from_stream(stream: &CompressedStream, capacity: usize) -> Result<Self, StoreError> {
        let mut bytes = Vec::new();
        stream.write_records(&mut bytes);
        if bytes.len() > capacity {
            return Err(StoreError::CapacityExceeded {
                required: bytes.len(),
                available: capacity,
            });
        }
        let params = *stream.params();
        let mut entries = Vec::new();
        let mut at = 0;
        for (i, rec) in stream.records().iter().enumerate() {
            if params.is_entry_point(i) {
                entries.push(at);
            }
            at += rec.encoded_len();
        }
        let used = bytes.len();
        bytes.resize(capacity, 0);
        Ok(PacketArena {
            params,
            memory: bytes,
            used,
            count: stream.count(),
            entries,
            pending: None,
        })
    }

    pub fn capacity(&self) -> usize {
        self.memory.len()
    }

    /// Bytes occupied by records.
    pub fn used_bytes(&self) -> usize {
        self.used
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn params(&self) -> &CodecParams {
        &self.params
    }

    pub fn records_bytes(&self) -> &[u8] {
        &self.memory[..self.used]
    }

    pub fn pending(&self) -> Option<&UpdateRequest> {
        self.pending.as_ref()
    }

    pub fn to_stream(&self) -> Result<CompressedStream, StoreError> {
        let records = crate::codec::stream::parse_records(self.records_bytes(), self.params.word_size, self.count)?;
        Ok(CompressedStream::from_records(self.params, records)?)
    }

    /// Every packet, decoded without running the engine.
    pub fn packets(&self) -> Result<Vec<RawPacket>, StoreError> {
        Ok(crate::codec::decompress_sequence(&self.to_stream()?)?)
    }

    fn check_index(&self, k: usize, max: usize) -> Result<usize, StoreError> {
        if k == 0 || k > max {
            return Err(StoreError::IndexOutOfRange { index: k, max });
        }
        Ok(k - 1)
    }

    /// Decodes 0-based packet `i` starting from its entry point. Returns the
    /// packet and the number of records read.
    fn fetch(&self, i: usize) -> Result<(RawPacket, usize), StoreError> {
        let interval = self.params.entry_interval() as usize;
        let entry = i / interval;
        let mut at = self.entries[entry];
        let mut prev: Option<RawPacket> = None;
        let mut reads = 0;
        for j in entry * interval..=i {
            let (rec, used) = DeltaRecord::parse(&self.memory[at..self.used], self.params.word_size)
                .map_err(|kind| CodecError::CorruptStream { index: j, kind })?;
            reads += 1;
            at += used;
            prev = Some(
                rec.decode(prev.as_ref(), self.params.word_size)
                    .map_err(|e| CodecError::CorruptRecord(corruption_of(e)).at(j))?,
            );
        }
        Ok((prev.expect("at least one record read"), reads))
    }

    /// Packet `k` (1-based) and the number of record reads it took: one for
    /// the entry point plus one per delta after it.
    pub fn random_access(&self, k: usize) -> Result<(RawPacket, usize), StoreError> {
        let i = self.check_index(k, self.count)?;
        self.fetch(i)
    }

    /// Builds the request removing packet `k`.
    pub fn prepare_removal(&self, k: usize) -> Result<UpdateRequest, StoreError> {
        let i = self.check_index(k, self.count)?;
        if self.count == 1 {
            return Err(StoreError::LastPacket);
        }
        let repatched = if i + 1 < self.count {
            let prev = match i {
                0 => None,
                _ => Some(self.fetch(i - 1)?.0),
            };
            let next = self.fetch(i + 1)?.0;
            Some(encode_at(prev.as_ref(), &next, i, &self.params))
        } else {
            None
        };
        Ok(UpdateRequest {
            kind: UpdateKind::Remove,
            index: k,
            repatched,
        })
    }

    /// Builds the request inserting `packet` so that it becomes packet `k`.
    pub fn prepare_insertion(&self, k: usize, packet: RawPacket) -> Result<UpdateRequest, StoreError> {
        let i = self.check_index(k, self.count + 1)?;
        let prev = match i {
            0 => None,
            _ => Some(self.fetch(i - 1)?.0),
        };
        let record = encode_at(prev.as_ref(), &packet, i, &self.params);
        let repatched = if i < self.count {
            let old = self.fetch(i)?.0;
            Some(encode_at(Some(&packet), &old, i + 1, &self.params))
        } else {
            None
        };
        Ok(UpdateRequest {
            kind: UpdateKind::Insert { packet, record },
            index: k,
            repatched,
        })
    }

    /// Queues `req` for the next sweep.
    pub fn submit(&mut self, req: UpdateRequest) -> Result<(), StoreError> {
        if self.pending.is_some() {
            return Err(StoreError::UpdatePending);
        }
        self.pending = Some(req);
        Ok(())
    }

    /// Runs one engine sweep, applying the pending update if there is one.
    ///
    /// The pending request is consumed whether or not it applies.
    pub fn sweep(&mut self, sink: &mut dyn TransmitSink) -> Result<SweepReport, StoreError> {
        let req = self.pending.take();
        let dry = self.pass(req.as_ref(), None)?;
        if dry.used > self.capacity() {
            return Err(StoreError::CapacityExceeded {
                required: dry.used,
                available: self.capacity(),
            });
        }
        let done = self
            .pass(req.as_ref(), Some(sink))
            .expect("committing pass failed after a clean dry run");
        debug_assert_eq!(done.report, dry.report);
        self.used = done.used;
        self.count = done.count;
        self.entries = done.entries;
        Ok(done.report)
    }

    pub fn sweep_with_update(&mut self, sink: &mut dyn TransmitSink, req: UpdateRequest) -> Result<SweepReport, StoreError> {
        self.submit(req)?;
        self.sweep(sink)
    }

    /// One pass of the engine. With `sink == None` nothing is written or
    /// emitted.
    fn pass(&mut self, req: Option<&UpdateRequest>, mut sink: Option<&mut dyn TransmitSink>) -> Result<PassOutcome, StoreError> {
        let w = self.params.word_size;
        let commit = sink.is_some();
        let splice = match req {
            Some(r) => {
                let max = if r.is_insert() { self.count + 1 } else { self.count };
                let i = self.check_index(r.index, max)?;
                if !r.is_insert() && self.count == 1 {
                    return Err(StoreError::LastPacket);
                }
                Some((r, i))
            }
            None => None,
        };
        let stale = |reason: &str| StoreError::StaleRepatch {
            index: req.map_or(0, |r| r.index),
            reason: reason.to_string(),
        };

        let mut eng = Engine {
            params: self.params,
            mem: &mut self.memory,
            commit,
            read: 0,
            read_end: self.used,
            write: 0,
            cache: VecDeque::new(),
            cache_bytes: 0,
            written: 0,
            entries: Vec::new(),
            report: SweepReport::default(),
        };
        // Last packet of the old and of the new sequence.
        let mut old_prev: Option<RawPacket> = None;
        let mut new_prev: Option<RawPacket> = None;
        let mut new_index = 0usize;
        let mut emit = |new_index: usize, p: &RawPacket, report: &mut SweepReport| {
            if let Some(s) = sink.as_deref_mut() {
                s.transmit(new_index + 1, p);
            }
            report.count += 1;
        };

        let insert_here = |i: usize| match splice {
            Some((r, at)) if r.is_insert() && at == i => Some(r),
            _ => None,
        };

        for i in 0..=self.count {
            if let Some(r) = insert_here(i) {
                let UpdateKind::Insert { packet, record } = &r.kind else { unreachable!() };
                if self.params.is_entry_point(new_index) && !record.is_literal() {
                    return Err(stale("inserted record must be an entry point"));
                }
                let decoded = record
                    .decode(new_prev.as_ref(), w)
                    .map_err(|e| stale(&format!("inserted record does not decode: {e}")))?;
                if &decoded != packet {
                    return Err(stale("inserted record encoded against the wrong predecessor"));
                }
                eng.produce(record.to_bytes())?;
                emit(new_index, packet, &mut eng.report);
                new_prev = Some(decoded);
                new_index += 1;
            }
            if i == self.count {
                break;
            }

            let (rec, raw) = eng.read_record(i)?;
            let packet = rec
                .decode(old_prev.as_ref(), w)
                .map_err(|e| CodecError::CorruptRecord(corruption_of(e)).at(i))?;
            if self.params.is_entry_point(i) && !rec.is_literal() {
                return Err(CodecError::CorruptStream {
                    index: i,
                    kind: Corruption::MissingEntryPoint,
                }
                .into());
            }

            let (removed, repatch) = match splice {
                Some((r, at)) if !r.is_insert() => (at == i, at + 1 == i),
                Some((r, at)) if r.is_insert() => (false, at == i),
                _ => (false, false),
            };
            if removed {
                old_prev = Some(packet);
                continue;
            }

            let out = if repatch {
                let r = splice.unwrap().0;
                let rp = r.repatched.as_ref().ok_or_else(|| stale("missing repatched record"))?;
                if self.params.is_entry_point(new_index) && !rp.is_literal() {
                    return Err(stale("repatched record must be an entry point"));
                }
                let decoded = rp
                    .decode(new_prev.as_ref(), w)
                    .map_err(|e| stale(&format!("repatched record does not decode: {e}")))?;
                if decoded != packet {
                    return Err(stale("repatched record encoded against the wrong predecessor"));
                }
                rp.to_bytes()
            } else if new_index != i && (rec.is_literal() || self.params.is_entry_point(new_index)) {
                // Shifted across an entry-point slot.
                encode_at(new_prev.as_ref(), &packet, new_index, &self.params).to_bytes()
            } else {
                raw
            };
            eng.produce(out)?;
            emit(new_index, &packet, &mut eng.report);
            new_prev = Some(packet.clone());
            old_prev = Some(packet);
            new_index += 1;
        }
        if let Some((r, at)) = splice {
            let trailing = if r.is_insert() { at == self.count } else { at + 1 == self.count };
            if trailing && r.repatched.is_some() {
                return Err(stale("unexpected repatched record after the last packet"));
            }
        }
        eng.finish();
        if splice.is_some() {
            eng.report.updates_applied = 1;
        }
        Ok(PassOutcome {
            used: eng.write,
            count: new_index,
            entries: eng.entries,
            report: eng.report,
        })
    }

    /// `FMA1` snapshot: magic, 8-byte big-endian capacity, `FMD1` stream.
    pub fn to_bytes(&self) -> Result<Vec<u8>, StoreError> {
        let mut out = Vec::with_capacity(12 + 14 + self.used);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&(self.capacity() as u64).to_be_bytes());
        out.extend_from_slice(&self.to_stream()?.to_bytes());
        Ok(out)
    }

    /// Restores a snapshot, checking that every record decodes.
    pub fn from_bytes(buf: &[u8]) -> Result<Self, StoreError> {
        if buf.len() < 12 || &buf[..4] != SNAPSHOT_MAGIC {
            return Err(StoreError::Snapshot("missing FMA1 header".into()));
        }
        let capacity = u64::from_be_bytes(buf[4..12].try_into().unwrap());
        let capacity = usize::try_from(capacity).map_err(|_| StoreError::Snapshot(format!("capacity {capacity} too large")))?;
        let stream = CompressedStream::from_bytes(&buf[12..])?;
        crate::codec::decompress_sequence(&stream)?;
        Self::from_stream(&stream, capacity)
    }
}

fn corruption_of(e: CodecError) -> Corruption {
    match e {
        CodecError::CorruptRecord(kind) | CodecError::CorruptStream { kind, .. } => kind,
        other => Corruption::BadHeader(other.to_string()),
    }
}

struct PassOutcome {
    used: usize,
    count: usize,
    entries: Vec<usize>,
    report: SweepReport,
}

/// Cursor state of one sweep.
struct Engine<'a> {
    params: CodecParams,
    mem: &'a mut [u8],
    /// Whether writes reach memory; false on the dry pass.
    commit: bool,
    read: usize,
    read_end: usize,
    write: usize,
    cache: VecDeque<Vec<u8>>,
    cache_bytes: usize,
    written: usize,
    entries: Vec<usize>,
    report: SweepReport,
}

impl Engine<'_> {
    fn read_record(&mut self, index: usize) -> Result<(DeltaRecord, Vec<u8>), StoreError> {
        // Both passes see the memory as it was before the sweep: nothing
        // unread is ever overwritten.
        let (rec, used) = DeltaRecord::parse(&self.mem[self.read..self.read_end], self.params.word_size)
            .map_err(|kind| CodecError::CorruptStream { index, kind })?;
        let raw = self.mem[self.read..self.read + used].to_vec();
        self.read += used;
        self.report.bytes_read += used;
        Ok((rec, raw))
    }

    fn produce(&mut self, rec: Vec<u8>) -> Result<(), StoreError> {
        self.cache_bytes += rec.len();
        self.cache.push_back(rec);
        self.report.peak_cache_bytes = self.report.peak_cache_bytes.max(self.cache_bytes);
        self.report.peak_cache_records = self.report.peak_cache_records.max(self.cache.len());
        if self.cache_bytes > ENGINE_CACHE_BYTES {
            return Err(StoreError::CacheOverflow {
                needed: self.cache_bytes,
                limit: ENGINE_CACHE_BYTES,
            });
        }
        self.flush(false);
        Ok(())
    }

    /// Writes cached records while doing so cannot clobber unread records.
    fn flush(&mut self, all_read: bool) {
        while let Some(front) = self.cache.front() {
            let n = front.len();
            let all_read = all_read || self.read == self.read_end;
            if !all_read && self.write + n > self.read {
                break;
            }
            let rec = self.cache.pop_front().unwrap();
            self.cache_bytes -= n;
            if self.commit {
                assert!(
                    all_read || self.write + n <= self.read,
                    "engine would overwrite unread records"
                );
                self.mem[self.write..self.write + n].copy_from_slice(&rec);
            }
            if self.params.is_entry_point(self.written) {
                self.entries.push(self.write);
            }
            self.write += n;
            self.written += 1;
            self.report.bytes_written += n;
        }
    }

    fn finish(&mut self) {
        self.flush(true);
        debug_assert!(self.cache.is_empty());
    }
}
