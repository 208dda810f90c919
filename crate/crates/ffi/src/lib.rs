//! C ABI for fmdelta.
//!
//! Every function returns an [`FmdStatus`]. On failure a description of the
//! error is available from [`fmd_last_error`] on the same thread. Handles are
//! opaque and must be released with their `*_free` function.
//!
//! An arena must not be used from inside its own sweep callback; such calls
//! fail with the busy status.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use fmdelta::pktgen::{generate, DatasetSpec, Mode};
use fmdelta::store::{PacketArena, StoreError, SweepReport};
use fmdelta::{compress_sequence, compressed_size, decompress_sequence, CodecError, CodecParams, CompressedStream, RawPacket, WordSize};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FmdStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument is outside its domain (word size, interval, count...).
    InvalidArgument = 2,
    /// Index outside the valid range.
    OutOfRange = 3,
    /// Malformed or corrupt input data.
    Corrupt = 4,
    /// Arena capacity or engine cache exceeded.
    Capacity = 5,
    /// Output buffer too small; the required size was stored.
    BufferTooSmall = 6,
    /// The arena is in the middle of a sweep.
    Busy = 7,
    /// An update request no longer matches the arena contents.
    Stale = 8,
    /// Internal failure.
    Internal = 9,
}

/// Dataset arrangement for `fmd_packets_generate`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FmdMode {
    #[default]
    Ordered = 0,
    Random = 1,
}

/// Outcome of one engine sweep.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FmdSweepReport {
    pub count: usize,
    pub bytes_read: usize,
    pub bytes_written: usize,
    pub updates_applied: usize,
    pub peak_cache_bytes: usize,
}

impl From<SweepReport> for FmdSweepReport {
    fn from(r: SweepReport) -> Self {
        FmdSweepReport {
            count: r.count,
            bytes_read: r.bytes_read,
            bytes_written: r.bytes_written,
            updates_applied: r.updates_applied,
            peak_cache_bytes: r.peak_cache_bytes,
        }
    }
}

/// Called once per emitted packet with its 1-based index. `data` is valid
/// only for the duration of the call.
pub type FmdTransmitFn = Option<unsafe extern "C" fn(user: *mut c_void, index: usize, data: *const u8, len: usize)>;

/// Ordered list of packets.
pub struct FmdPacketList(Vec<RawPacket>);

/// Compressed packet stream.
pub struct FmdStream(CompressedStream);

/// Simulated packet store.
pub struct FmdArena(RefCell<PacketArena>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fmd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

struct Fail(FmdStatus, String);

impl From<CodecError> for Fail {
    fn from(e: CodecError) -> Self {
        let status = if e.is_corruption() { FmdStatus::Corrupt } else { FmdStatus::InvalidArgument };
        Fail(status, e.to_string())
    }
}

impl From<StoreError> for Fail {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::CapacityExceeded { .. } | StoreError::CacheOverflow { .. } => FmdStatus::Capacity,
            StoreError::IndexOutOfRange { .. } | StoreError::LastPacket => FmdStatus::OutOfRange,
            StoreError::StaleRepatch { .. } => FmdStatus::Stale,
            StoreError::UpdatePending => FmdStatus::Busy,
            StoreError::Codec(c) if !c.is_corruption() => FmdStatus::InvalidArgument,
            _ => FmdStatus::Corrupt,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FmdStatus::NullArgument, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FmdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FmdStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FmdStatus::Internal
        }
    }
}

unsafe fn bytes<'a>(data: *const u8, len: usize) -> Result<&'a [u8], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null("data"));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn params(word_size: usize, entry_interval: u32, count: usize) -> Result<CodecParams, Fail> {
    let w = WordSize::new(word_size)?;
    Ok(match entry_interval {
        0 => CodecParams::single_entry(w, count),
        e => CodecParams::new(w, e)?,
    })
}

/// Writes `src` to `buf` when it fits; always stores the size in `written`.
unsafe fn copy_out(src: &[u8], buf: *mut u8, cap: usize, written: *mut usize) -> Result<(), Fail> {
    *out(written, "written")? = src.len();
    if src.len() > cap {
        return Err(Fail(FmdStatus::BufferTooSmall, format!("{} bytes needed, buffer holds {cap}", src.len())));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

// ---- packet lists ----

#[no_mangle]
pub unsafe extern "C" fn fmd_packets_new(list: *mut *mut FmdPacketList) -> FmdStatus {
    guard(|| {
        *out(list, "list")? = Box::into_raw(Box::new(FmdPacketList(Vec::new())));
        Ok(())
    })
}

/// Appends a copy of `len` bytes (1..=9216).
#[no_mangle]
pub unsafe extern "C" fn fmd_packets_push(list: *mut FmdPacketList, data: *const u8, len: usize) -> FmdStatus {
    guard(|| {
        let list = out(list, "list")?;
        let p = RawPacket::from_slice(bytes(data, len)?)?;
        list.0.push(p);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fmd_packets_len(list: *const FmdPacketList, len: *mut usize) -> FmdStatus {
    guard(|| {
        *out(len, "len")? = handle(list, "list")?.0.len();
        Ok(())
    })
}

/// Borrows packet `index` (0-based). The pointer is valid until the list is
/// modified or freed.
#[no_mangle]
pub unsafe extern "C" fn fmd_packets_get(list: *const FmdPacketList, index: usize, data: *mut *const u8, len: *mut usize) -> FmdStatus {
    guard(|| {
        let list = handle(list, "list")?;
        let p = list
            .0
            .get(index)
            .ok_or_else(|| Fail(FmdStatus::OutOfRange, format!("index {index} of {}", list.0.len())))?;
        *out(data, "data")? = p.as_bytes().as_ptr();
        *out(len, "len")? = p.len();
        Ok(())
    })
}

/// Synthetic CCM/BFD dataset; `count` must be even and at least 2, `mode`
/// one of the `FmdMode` values.
#[no_mangle]
pub unsafe extern "C" fn fmd_packets_generate(count: usize, seed: u64, mode: u32, list: *mut *mut FmdPacketList) -> FmdStatus {
    guard(|| {
        let list = out(list, "list")?;
        let mode = match mode {
            m if m == FmdMode::Ordered as u32 => Mode::Ordered,
            m if m == FmdMode::Random as u32 => Mode::Random,
            other => return Err(Fail(FmdStatus::InvalidArgument, format!("unknown mode {other}"))),
        };
        let packets = generate(&DatasetSpec::new(count, seed, mode)).map_err(|e| Fail(FmdStatus::InvalidArgument, e.to_string()))?;
        *list = Box::into_raw(Box::new(FmdPacketList(packets)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fmd_packets_free(list: *mut FmdPacketList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}

// ---- streams ----

/// Compresses a packet list. `entry_interval` 0 means a single entry point.
#[no_mangle]
pub unsafe extern "C" fn fmd_compress(list: *const FmdPacketList, word_size: usize, entry_interval: u32, stream: *mut *mut FmdStream) -> FmdStatus {
    guard(|| {
        let list = handle(list, "list")?;
        let stream = out(stream, "stream")?;
        let s = compress_sequence(&list.0, params(word_size, entry_interval, list.0.len())?)?;
        *stream = Box::into_raw(Box::new(FmdStream(s)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fmd_decompress(stream: *const FmdStream, list: *mut *mut FmdPacketList) -> FmdStatus {
    guard(|| {
        let s = handle(stream, "stream")?;
        let list = out(list, "list")?;
        *list = Box::into_raw(Box::new(FmdPacketList(decompress_sequence(&s.0)?)));
        Ok(())
    })
}

/// Total size of the stream's records, headers included.
#[no_mangle]
pub unsafe extern "C" fn fmd_stream_compressed_size(stream: *const FmdStream, size: *mut usize) -> FmdStatus {
    guard(|| {
        *out(size, "size")? = compressed_size(&handle(stream, "stream")?.0);
        Ok(())
    })
}

/// Serializes to the `FMD1` format. The required size is always stored in
/// `written`; if it exceeds `cap` nothing is copied and the call fails with
/// the buffer-too-small status.
#[no_mangle]
pub unsafe extern "C" fn fmd_stream_serialize(stream: *const FmdStream, buf: *mut u8, cap: usize, written: *mut usize) -> FmdStatus {
    guard(|| copy_out(&handle(stream, "stream")?.0.to_bytes(), buf, cap, written))
}

#[no_mangle]
pub unsafe extern "C" fn fmd_stream_parse(data: *const u8, len: usize, stream: *mut *mut FmdStream) -> FmdStatus {
    guard(|| {
        let stream = out(stream, "stream")?;
        let s = CompressedStream::from_bytes(bytes(data, len)?)?;
        *stream = Box::into_raw(Box::new(FmdStream(s)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fmd_stream_free(stream: *mut FmdStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}

// ---- arenas ----

#[no_mangle]
pub unsafe extern "C" fn fmd_arena_load(
    list: *const FmdPacketList,
    word_size: usize,
    entry_interval: u32,
    capacity: usize,
    arena: *mut *mut FmdArena,
) -> FmdStatus {
    guard(|| {
        let list = handle(list, "list")?;
        let arena = out(arena, "arena")?;
        let a = PacketArena::load(&list.0, params(word_size, entry_interval, list.0.len())?, capacity)?;
        *arena = Box::into_raw(Box::new(FmdArena(RefCell::new(a))));
        Ok(())
    })
}

/// Restores an `FMA1` snapshot.
#[no_mangle]
pub unsafe extern "C" fn fmd_arena_restore(data: *const u8, len: usize, arena: *mut *mut FmdArena) -> FmdStatus {
    guard(|| {
        let arena = out(arena, "arena")?;
        let a = PacketArena::from_bytes(bytes(data, len)?)?;
        *arena = Box::into_raw(Box::new(FmdArena(RefCell::new(a))));
        Ok(())
    })
}

fn busy() -> Fail {
    Fail(FmdStatus::Busy, "arena is in the middle of a sweep".into())
}

unsafe fn with_arena<R>(arena: *const FmdArena, f: impl FnOnce(&mut PacketArena) -> Result<R, Fail>) -> Result<R, Fail> {
    let cell = &handle(arena, "arena")?.0;
    let mut a = cell.try_borrow_mut().map_err(|_| busy())?;
    f(&mut a)
}

unsafe fn with_arena_ref<R>(arena: *const FmdArena, f: impl FnOnce(&PacketArena) -> Result<R, Fail>) -> Result<R, Fail> {
    let cell = &handle(arena, "arena")?.0;
    let a = cell.try_borrow().map_err(|_| busy())?;
    f(&a)
}

/// Serializes to the `FMA1` snapshot format (see `fmd_stream_serialize` for
/// the buffer protocol).
#[no_mangle]
pub unsafe extern "C" fn fmd_arena_snapshot(arena: *const FmdArena, buf: *mut u8, cap: usize, written: *mut usize) -> FmdStatus {
    guard(|| {
        let snap = with_arena_ref(arena, |a| Ok(a.to_bytes()?))?;
        copy_out(&snap, buf, cap, written)
    })
}

#[no_mangle]
pub unsafe extern "C" fn fmd_arena_count(arena: *const FmdArena, count: *mut usize) -> FmdStatus {
    guard(|| {
        let n = with_arena_ref(arena, |a| Ok(a.count()))?;
        *out(count, "count")? = n;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fmd_arena_used_bytes(arena: *const FmdArena, used: *mut usize) -> FmdStatus {
    guard(|| {
        let n = with_arena_ref(arena, |a| Ok(a.used_bytes()))?;
        *out(used, "used")? = n;
        Ok(())
    })
}

fn sink(cb: FmdTransmitFn, user: *mut c_void) -> impl FnMut(usize, &RawPacket) {
    move |index, p| {
        if let Some(cb) = cb {
            // SAFETY: the caller promised a valid callback for `user`.
            unsafe { cb(user, index, p.as_bytes().as_ptr(), p.len()) }
        }
    }
}

unsafe fn store_report(report: *mut FmdSweepReport, r: SweepReport) {
    if let Some(out) = report.as_mut() {
        *out = r.into();
    }
}

/// Runs one sweep, emitting every packet through `cb` (may be null).
/// `report` may be null.
#[no_mangle]
pub unsafe extern "C" fn fmd_arena_sweep(arena: *const FmdArena, cb: FmdTransmitFn, user: *mut c_void, report: *mut FmdSweepReport) -> FmdStatus {
    guard(|| {
        let r = with_arena(arena, |a| Ok(a.sweep(&mut sink(cb, user))?))?;
        store_report(report, r);
        Ok(())
    })
}

/// Removes packet `k` (1-based) in one update sweep.
#[no_mangle]
pub unsafe extern "C" fn fmd_arena_remove(
    arena: *const FmdArena,
    k: usize,
    cb: FmdTransmitFn,
    user: *mut c_void,
    report: *mut FmdSweepReport,
) -> FmdStatus {
    guard(|| {
        let r = with_arena(arena, |a| {
            let req = a.prepare_removal(k)?;
            Ok(a.sweep_with_update(&mut sink(cb, user), req)?)
        })?;
        store_report(report, r);
        Ok(())
    })
}

/// Inserts a packet so that it becomes packet `k` (1-based), in one update
/// sweep.
#[no_mangle]
pub unsafe extern "C" fn fmd_arena_insert(
    arena: *const FmdArena,
    k: usize,
    data: *const u8,
    len: usize,
    cb: FmdTransmitFn,
    user: *mut c_void,
    report: *mut FmdSweepReport,
) -> FmdStatus {
    guard(|| {
        let packet = RawPacket::from_slice(bytes(data, len)?)?;
        let r = with_arena(arena, |a| {
            let req = a.prepare_insertion(k, packet)?;
            Ok(a.sweep_with_update(&mut sink(cb, user), req)?)
        })?;
        store_report(report, r);
        Ok(())
    })
}

/// Copies packet `k` (1-based) into `buf` and stores the number of record
/// reads it took in `reads` (may be null).
#[no_mangle]
pub unsafe extern "C" fn fmd_arena_access(
    arena: *const FmdArena,
    k: usize,
    buf: *mut u8,
    cap: usize,
    written: *mut usize,
    reads: *mut usize,
) -> FmdStatus {
    guard(|| {
        let (p, n) = with_arena_ref(arena, |a| Ok(a.random_access(k)?))?;
        if let Some(r) = reads.as_mut() {
            *r = n;
        }
        copy_out(p.as_bytes(), buf, cap, written)
    })
}

#[no_mangle]
pub unsafe extern "C" fn fmd_arena_free(arena: *mut FmdArena) {
    if !arena.is_null() {
        drop(Box::from_raw(arena));
    }
}
