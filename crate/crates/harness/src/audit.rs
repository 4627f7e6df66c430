//! Recompute decision-level monitors from an exported trace alone.

use std::collections::{BTreeMap, BTreeSet};

use rasim_core::trace::{check_integrity, EventKind, TraceRecord};
use rasim_core::{Bit, ProcessId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub n: usize,
    pub correct: BTreeSet<ProcessId>,
    pub inputs: Vec<Option<Bit>>,
    /// First decision of each process.
    pub decisions: Vec<Option<Bit>>,
    pub agreement: bool,
    pub strong_validity: bool,
    pub validity: bool,
    pub uniform_agreement: bool,
    pub double_decide: bool,
    /// Structural integrity of the delivery log.
    pub integrity: Result<(), String>,
}

fn header_field<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    header
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

fn bit(s: &str) -> Option<Bit> {
    match s {
        "0" => Some(Bit::Zero),
        "1" => Some(Bit::One),
        _ => None,
    }
}

pub fn audit_trace(text: &str) -> Result<Audit, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty trace")?;
    let n: usize = header_field(header, "n")
        .and_then(|v| v.parse().ok())
        .ok_or("header lacks n")?;
    let correct: BTreeSet<ProcessId> = header_field(header, "correct")
        .ok_or("header lacks correct set")?
        .split(':')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map(ProcessId)
                .map_err(|_| format!("bad id `{s}`"))
        })
        .collect::<Result<_, _>>()?;
    let records: Vec<TraceRecord> = lines
        .map(|l| TraceRecord::parse(l).ok_or_else(|| format!("bad trace line `{l}`")))
        .collect::<Result<_, _>>()?;
    let mut inputs = vec![None; n];
    let mut decisions: Vec<Option<Bit>> = vec![None; n];
    let mut decide_count: BTreeMap<ProcessId, u32> = BTreeMap::new();
    for r in &records {
        match r.kind {
            EventKind::Init => inputs[r.src.0] = bit(&r.digest),
            EventKind::Decide => {
                *decide_count.entry(r.src).or_default() += 1;
                if decisions[r.src.0].is_none() {
                    decisions[r.src.0] = bit(&r.digest);
                }
            }
            _ => {}
        }
    }
    let all: BTreeSet<ProcessId> = (0..n).map(ProcessId).collect();
    let proposed: BTreeSet<Bit> = inputs.iter().flatten().copied().collect();
    Ok(Audit {
        agreement: rasim_core::protocols::agreement(&decisions, &correct),
        strong_validity: rasim_core::protocols::strong_validity(&inputs, &decisions, &correct),
        validity: decisions.iter().flatten().all(|d| proposed.contains(d)),
        uniform_agreement: rasim_core::protocols::agreement(&decisions, &all),
        double_decide: decide_count.values().any(|c| *c > 1),
        integrity: check_integrity(&records, false),
        n,
        correct,
        inputs,
        decisions,
    })
}
