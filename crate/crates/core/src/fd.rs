//! Heartbeat failure detector.
//!
//! Each process broadcasts `Heartbeat(k)` when it enters local round `k`
//! and leaves the round after `n-f` round-`k` heartbeats. At the end of
//! round `k` it suspects `q` iff no heartbeat from `q` arrived during the
//! last `w` local rounds. `w = None` never expires.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{Context, Process};
use crate::types::ProcessId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Heartbeat {
    pub round: u64,
}

/// Extra rounds run past the window so that completeness can be observed.
pub const FD_SETTLE_ROUNDS: u64 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FdProcess {
    me: ProcessId,
    n: usize,
    f: usize,
    window: Option<u64>,
    total_rounds: u64,
    round: u64,
    count: usize,
    seen: BTreeSet<(ProcessId, u64)>,
    early: BTreeMap<u64, usize>,
    last_heard: Vec<Option<u64>>,
    suspected: BTreeSet<ProcessId>,
    history: Vec<BTreeSet<ProcessId>>,
    done: bool,
}

impl FdProcess {
    /// Runs `window + FD_SETTLE_ROUNDS` rounds (or `FD_SETTLE_ROUNDS` when
    /// the window is infinite).
    pub fn new(me: ProcessId, n: usize, f: usize, window: Option<u64>) -> Self {
        let total = window.unwrap_or(0) + FD_SETTLE_ROUNDS;
        Self::with_rounds(me, n, f, window, total)
    }

    pub fn with_rounds(me: ProcessId, n: usize, f: usize, window: Option<u64>, total: u64) -> Self {
        FdProcess {
            me,
            n,
            f,
            window,
            total_rounds: total,
            round: 1,
            count: 0,
            seen: BTreeSet::new(),
            early: BTreeMap::new(),
            last_heard: vec![None; n],
            suspected: BTreeSet::new(),
            history: Vec::new(),
            done: false,
        }
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn suspected(&self) -> &BTreeSet<ProcessId> {
        &self.suspected
    }

    /// Suspect set at the end of each completed local round (index k-1).
    pub fn history(&self) -> &[BTreeSet<ProcessId>] {
        &self.history
    }

    pub fn last_heard(&self, q: ProcessId) -> Option<u64> {
        self.last_heard[q.0]
    }

    fn suspects_at(&self, k: u64, q: ProcessId) -> bool {
        let Some(w) = self.window else { return false };
        if q == self.me || k < w {
            return false;
        }
        match self.last_heard[q.0] {
            None => true,
            Some(h) => h + w <= k,
        }
    }

    fn end_round(&mut self, ctx: &mut Context<'_, Heartbeat>) {
        while !self.done && self.count >= self.n - self.f {
            let k = self.round;
            self.suspected = (0..self.n)
                .map(ProcessId)
                .filter(|&q| self.suspects_at(k, q))
                .collect();
            self.history.push(self.suspected.clone());
            if k >= self.total_rounds {
                self.done = true;
                return;
            }
            self.round += 1;
            self.count = self.early.remove(&self.round).unwrap_or(0);
            ctx.broadcast(Heartbeat { round: self.round });
        }
    }
}

impl Process for FdProcess {
    type Msg = Heartbeat;

    fn init(&mut self, ctx: &mut Context<'_, Heartbeat>) {
        ctx.broadcast(Heartbeat { round: 1 });
    }

    fn deliver(&mut self, from: ProcessId, msg: Heartbeat, ctx: &mut Context<'_, Heartbeat>) {
        if self.done || from.0 >= self.n || !self.seen.insert((from, msg.round)) {
            return;
        }
        self.last_heard[from.0] = Some(self.round);
        if msg.round == self.round {
            self.count += 1;
        } else if msg.round > self.round && msg.round <= self.total_rounds {
            *self.early.entry(msg.round).or_default() += 1;
        }
        self.end_round(ctx);
    }

    fn finished(&self) -> bool {
        self.done
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SignatureRegistry;

    fn feed(p: &mut FdProcess, from: usize, round: u64) {
        let mut out = Vec::new();
        let mut dec = Vec::new();
        let mut reg = SignatureRegistry::new();
        let mut ctx = Context::new(p.me, p.n, p.f, 0, &mut out, &mut dec, &mut reg);
        p.deliver(ProcessId(from), Heartbeat { round }, &mut ctx);
    }

    #[test]
    fn silent_peer_suspected_after_window() {
        // n=3, f=1: rounds advance on self + p1; p2 never speaks.
        let mut p = FdProcess::with_rounds(ProcessId(0), 3, 1, Some(2), 5);
        for k in 1..=5 {
            feed(&mut p, 0, k);
            feed(&mut p, 1, k);
        }
        let h = p.history();
        assert_eq!(h.len(), 5);
        assert!(!h[0].contains(&ProcessId(2)));
        for s in &h[1..] {
            assert!(s.contains(&ProcessId(2)));
            assert!(!s.contains(&ProcessId(1)));
        }
    }

    #[test]
    fn infinite_window_never_suspects() {
        let mut p = FdProcess::with_rounds(ProcessId(0), 3, 1, None, 4);
        for k in 1..=4 {
            feed(&mut p, 0, k);
            feed(&mut p, 1, k);
        }
        assert!(p.history().iter().all(BTreeSet::is_empty));
    }

    #[test]
    fn heartbeat_clears_suspicion() {
        let mut p = FdProcess::with_rounds(ProcessId(0), 3, 1, Some(1), 3);
        feed(&mut p, 0, 1);
        feed(&mut p, 1, 1);
        assert!(p.history()[0].contains(&ProcessId(2)));
        feed(&mut p, 2, 1);
        feed(&mut p, 0, 2);
        feed(&mut p, 1, 2);
        assert!(!p.history()[1].contains(&ProcessId(2)));
    }
}
