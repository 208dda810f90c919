//! Simulator scripts: one operation per line.
//!
//! ```text
//! sweep
//! remove <k>
//! insert <k> <hex packet>
//! access <k>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. `remove` and
//! `insert` run their own update sweep.

use std::io::{self, Write};

use thiserror::Error;

use super::{PacketArena, StoreError, SweepReport};
use crate::codec::RawPacket;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScriptOp {
    Sweep,
    Remove(usize),
    Insert(usize, RawPacket),
    Access(usize),
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: {source}")]
    Store {
        line: usize,
        #[source]
        source: StoreError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn parse_script(text: &str) -> Result<Vec<(usize, ScriptOp)>, ScriptError> {
    let mut ops = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let err = |reason: String| ScriptError::Parse { line, reason };
        let words: Vec<&str> = body.split_whitespace().collect();
        let index = |s: Option<&&str>| -> Result<usize, ScriptError> {
            let s = s.ok_or_else(|| err("missing index".into()))?;
            s.parse().map_err(|_| err(format!("bad index {s:?}")))
        };
        let op = match words[0] {
            "sweep" if words.len() == 1 => ScriptOp::Sweep,
            "remove" if words.len() == 2 => ScriptOp::Remove(index(words.get(1))?),
            "access" if words.len() == 2 => ScriptOp::Access(index(words.get(1))?),
            "insert" if words.len() == 3 => {
                let bytes = hex::decode(words[2]).map_err(|e| err(format!("bad hex packet: {e}")))?;
                let packet = RawPacket::new(bytes).map_err(|e| err(e.to_string()))?;
                ScriptOp::Insert(index(words.get(1))?, packet)
            }
            "sweep" | "remove" | "access" | "insert" => {
                return Err(err(format!("wrong number of arguments for {}", words[0])))
            }
            other => return Err(err(format!("unknown operation {other:?}"))),
        };
        ops.push((line, op));
    }
    Ok(ops)
}

/// Runs `ops` against `arena`, logging to `log`:
///
/// ```text
/// emit <sweep> <index> <hex>
/// report <sweep> count=.. bytes_read=.. bytes_written=.. updates_applied=.. peak_cache_bytes=..
/// access <k> reads=<n> <hex>
/// ```
///
/// Returns the report of every sweep in order.
pub fn run_script(arena: &mut PacketArena, ops: &[(usize, ScriptOp)], log: &mut dyn Write) -> Result<Vec<SweepReport>, ScriptError> {
    let mut reports = Vec::new();
    for (line, op) in ops {
        let line = *line;
        let store = |source| ScriptError::Store { line, source };
        let req = match op {
            ScriptOp::Access(k) => {
                let (p, reads) = arena.random_access(*k).map_err(store)?;
                writeln!(log, "access {k} reads={reads} {}", hex::encode(p.as_bytes()))?;
                continue;
            }
            ScriptOp::Sweep => None,
            ScriptOp::Remove(k) => Some(arena.prepare_removal(*k).map_err(store)?),
            ScriptOp::Insert(k, p) => Some(arena.prepare_insertion(*k, p.clone()).map_err(store)?),
        };
        if let Some(req) = req {
            arena.submit(req).map_err(store)?;
        }
        let sweep = reports.len() + 1;
        let mut io_err = None;
        let mut sink = |index: usize, p: &RawPacket| {
            if io_err.is_none() {
                if let Err(e) = writeln!(log, "emit {sweep} {index} {}", hex::encode(p.as_bytes())) {
                    io_err = Some(e);
                }
            }
        };
        let report = arena.sweep(&mut sink).map_err(store)?;
        if let Some(e) = io_err {
            return Err(e.into());
        }
        writeln!(
            log,
            "report {sweep} count={} bytes_read={} bytes_written={} updates_applied={} peak_cache_bytes={}",
            report.count, report.bytes_read, report.bytes_written, report.updates_applied, report.peak_cache_bytes
        )?;
        reports.push(report);
    }
    Ok(reports)
}
