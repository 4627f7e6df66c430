//! Schedule trace: scheduler draws plus every send, delivery, decision and
//! crash, exported as line-delimited `step,kind,src,dst,seq,payload-digest`
//! records. The trace hash is SHA-256 over the header line followed by the
//! canonical record stream, one `\n`-terminated line per record.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Debug, Write as _};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::types::ProcessId;

pub const TRACE_FORMAT: &str = "rasim-trace/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TraceMode {
    /// Nothing recorded; the trace hash is empty.
    Off,
    /// Records streamed into the hash only.
    #[default]
    Hash,
    /// Records kept in memory and hashed.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Init,
    Send,
    Inject,
    Deliver,
    SelfDeliver,
    Decide,
    Crash,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Init => "init",
            EventKind::Send => "send",
            EventKind::Inject => "inject",
            EventKind::Deliver => "deliver",
            EventKind::SelfDeliver => "self",
            EventKind::Decide => "decide",
            EventKind::Crash => "crash",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        Some(match s {
            "init" => EventKind::Init,
            "send" => EventKind::Send,
            "inject" => EventKind::Inject,
            "deliver" => EventKind::Deliver,
            "self" => EventKind::SelfDeliver,
            "decide" => EventKind::Decide,
            "crash" => EventKind::Crash,
            _ => return None,
        })
    }
}

/// One trace line. For `decide` the digest field holds the decided value;
/// for `init` it holds the input (or `-`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub kind: EventKind,
    pub src: ProcessId,
    pub dst: ProcessId,
    pub seq: u64,
    pub digest: String,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{}",
            self.step,
            self.kind.as_str(),
            self.src.0,
            self.dst.0,
            self.seq,
            self.digest
        )
    }
}

impl TraceRecord {
    pub fn parse(line: &str) -> Option<TraceRecord> {
        let mut it = line.split(',');
        let record = TraceRecord {
            step: it.next()?.parse().ok()?,
            kind: EventKind::parse(it.next()?)?,
            src: ProcessId(it.next()?.parse().ok()?),
            dst: ProcessId(it.next()?.parse().ok()?),
            seq: it.next()?.parse().ok()?,
            digest: it.next()?.to_string(),
        };
        if it.next().is_some() {
            return None;
        }
        Some(record)
    }
}

/// Digest of a payload: first 8 bytes of SHA-256 over its `Debug` rendering.
pub fn payload_digest<M: Debug>(msg: &M) -> u64 {
    let mut text = String::with_capacity(128);
    let _ = write!(text, "{msg:?}");
    let hash = Sha256::digest(text.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&hash[..8]);
    u64::from_be_bytes(bytes)
}

pub fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[derive(Clone)]
pub struct Trace {
    mode: TraceMode,
    header: String,
    hasher: Sha256,
    records: Vec<TraceRecord>,
    draws: Vec<(u64, ProcessId, ProcessId)>,
    line: String,
}

impl Debug for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trace")
            .field("mode", &self.mode)
            .field("header", &self.header)
            .field("records", &self.records.len())
            .finish()
    }
}

impl Trace {
    pub fn new(mode: TraceMode, header: String) -> Self {
        let mut hasher = Sha256::new();
        if mode != TraceMode::Off {
            hasher.update(header.as_bytes());
            hasher.update(b"\n");
        }
        Trace {
            mode,
            header,
            hasher,
            records: Vec::new(),
            draws: Vec::new(),
            line: String::with_capacity(64),
        }
    }

    pub fn mode(&self) -> TraceMode {
        self.mode
    }

    pub fn header(&self) -> &str {
        &self.header
    }

    pub fn enabled(&self) -> bool {
        self.mode != TraceMode::Off
    }

    pub fn record(
        &mut self,
        step: u64,
        kind: EventKind,
        src: ProcessId,
        dst: ProcessId,
        seq: u64,
        digest: &dyn fmt::Display,
    ) {
        if self.mode == TraceMode::Off {
            return;
        }
        self.line.clear();
        let _ = writeln!(
            self.line,
            "{},{},{},{},{},{}",
            step,
            kind.as_str(),
            src.0,
            dst.0,
            seq,
            digest
        );
        self.hasher.update(self.line.as_bytes());
        if self.mode == TraceMode::Full {
            if kind == EventKind::Deliver {
                self.draws.push((step, src, dst));
            }
            self.records.push(TraceRecord {
                step,
                kind,
                src,
                dst,
                seq,
                digest: self
                    .line
                    .trim_end()
                    .rsplit(',')
                    .next()
                    .unwrap_or("")
                    .to_string(),
            });
        }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// Scheduler draws `(step, src, dst)`; one per network delivery.
    pub fn draws(&self) -> &[(u64, ProcessId, ProcessId)] {
        &self.draws
    }

    /// Hex SHA-256 of the header and record stream so far; empty when off.
    pub fn hash(&self) -> String {
        if self.mode == TraceMode::Off {
            return String::new();
        }
        hex(&self.hasher.clone().finalize())
    }

    /// Canonical text export (header line, then one record per line).
    pub fn export(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }
}

/// Hash a previously exported trace; equals [`Trace::hash`] of the run that
/// produced it.
pub fn hash_export(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

/// Structural checks over a full trace: integrity, per-pair FIFO, one draw
/// per step, and (when `quiescent`) no message left undelivered.
pub fn check_integrity(records: &[TraceRecord], quiescent: bool) -> Result<(), String> {
    let mut sent: BTreeMap<(ProcessId, ProcessId, u64), &str> = BTreeMap::new();
    let mut delivered: BTreeSet<(ProcessId, ProcessId, u64)> = BTreeSet::new();
    let mut last_seq: BTreeMap<(ProcessId, ProcessId), u64> = BTreeMap::new();
    let mut last_step = 0u64;
    let mut deliveries = 0u64;
    for r in records {
        match r.kind {
            EventKind::Send | EventKind::Inject => {
                if sent.insert((r.src, r.dst, r.seq), &r.digest).is_some() {
                    return Err(format!("duplicate send record {r}"));
                }
            }
            EventKind::Deliver => {
                deliveries += 1;
                if r.step != last_step + 1 {
                    return Err(format!(
                        "delivery at step {} after step {}",
                        r.step, last_step
                    ));
                }
                last_step = r.step;
                let key = (r.src, r.dst, r.seq);
                match sent.get(&key) {
                    None => return Err(format!("delivered message never sent: {r}")),
                    Some(d) if *d != r.digest => {
                        return Err(format!("payload changed in flight: {r}"))
                    }
                    _ => {}
                }
                if !delivered.insert(key) {
                    return Err(format!("message delivered twice: {r}"));
                }
                if let Some(prev) = last_seq.insert((r.src, r.dst), r.seq) {
                    if prev >= r.seq {
                        return Err(format!("FIFO violated on {}->{}", r.src, r.dst));
                    }
                }
            }
            _ => {}
        }
    }
    if deliveries != last_step {
        return Err(format!(
            "{deliveries} deliveries but final step {last_step}"
        ));
    }
    if quiescent {
        let lost: Vec<_> = sent
            .keys()
            .filter(|k| k.0 != k.1 && !delivered.contains(k))
            .collect();
        if !lost.is_empty() {
            return Err(format!("{} sent messages never delivered", lost.len()));
        }
    }
    Ok(())
}
