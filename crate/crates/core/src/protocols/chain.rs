//! Signature-chain consensus for `n >= f + 2`, running `f+1` phases of `R`
//! rounds. Every message carries the sender's whole accepted map; a value
//! is accepted in phase `k` once it carries `k` distinct signatures and its
//! origin's slot is still empty. Decides the majority of the accepted map
//! after exactly `R(f+1)` rounds.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::crypto::{SignedValue, Signer};
use crate::engine::{Context, Process};
use crate::types::{majority, Bit, ProcessId};

/// `(V, phase, round)`; `values` is the sender's accepted map, by origin.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainMsg {
    pub values: Vec<SignedValue>,
    pub phase: u32,
    pub round: u32,
}

/// One acceptance event, kept for the relay-mechanism monitor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Acceptance {
    pub origin: ProcessId,
    pub phase: u32,
    /// Chain as received, before the acceptor signed it.
    pub received: SignedValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChainProcess {
    me: ProcessId,
    n: usize,
    f: usize,
    rounds: u32,
    input: Bit,
    phase: u32,
    round: u32,
    valid: usize,
    accepted: BTreeMap<ProcessId, SignedValue>,
    seen: BTreeSet<(ProcessId, u32, u32)>,
    early: BTreeMap<(u32, u32), usize>,
    heard: Vec<BTreeSet<ProcessId>>,
    acceptances: Vec<Acceptance>,
    rounds_completed: u64,
    decision: Option<Bit>,
}

/// Majority of the accepted values; ties resolve to zero.
pub fn majority_value(v: &BTreeMap<ProcessId, SignedValue>) -> Bit {
    majority(v.values().map(|sv| &sv.value))
}

impl ChainProcess {
    pub fn new(me: ProcessId, n: usize, f: usize, rounds: u32, input: Bit) -> Self {
        assert!(rounds >= 1, "at least one round per phase");
        ChainProcess {
            me,
            n,
            f,
            rounds,
            input,
            phase: 1,
            round: 1,
            valid: 0,
            accepted: BTreeMap::new(),
            seen: BTreeSet::new(),
            early: BTreeMap::new(),
            heard: vec![BTreeSet::new(); f + 1],
            acceptances: Vec::new(),
            rounds_completed: 0,
            decision: None,
        }
    }

    pub fn input(&self) -> Bit {
        self.input
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn rounds_per_phase(&self) -> u32 {
        self.rounds
    }

    pub fn phases(&self) -> u32 {
        self.f as u32 + 1
    }

    pub fn accepted(&self) -> &BTreeMap<ProcessId, SignedValue> {
        &self.accepted
    }

    pub fn acceptances(&self) -> &[Acceptance] {
        &self.acceptances
    }

    pub fn rounds_completed(&self) -> u64 {
        self.rounds_completed
    }

    pub fn decision(&self) -> Option<Bit> {
        self.decision
    }

    /// Senders (other than self) from which a message arrived while this
    /// process was in each phase.
    pub fn heard(&self) -> &[BTreeSet<ProcessId>] {
        &self.heard
    }

    /// Whether this process heard from every other member of `correct`
    /// during `phase` (1-based).
    pub fn heard_all(&self, phase: u32, correct: &BTreeSet<ProcessId>) -> bool {
        let h = &self.heard[(phase - 1) as usize];
        correct.iter().all(|q| *q == self.me || h.contains(q))
    }

    fn message(&self) -> ChainMsg {
        ChainMsg {
            values: self.accepted.values().cloned().collect(),
            phase: self.phase,
            round: self.round,
        }
    }

    /// Accept every value in `values` carrying at least `phase` distinct
    /// verified signatures whose origin slot is still empty.
    pub fn try_accept(&mut self, values: &[SignedValue], signer: &mut impl Signer) {
        let phase = self.phase as usize;
        for sv in values {
            let Some(origin) = sv.origin() else { continue };
            if origin.0 >= self.n
                || self.accepted.contains_key(&origin)
                || sv.signature_count() < phase
                || !signer.verify(sv)
            {
                continue;
            }
            if let Ok(mine) = signer.sign(sv) {
                self.acceptances.push(Acceptance {
                    origin,
                    phase: self.phase,
                    received: sv.clone(),
                });
                self.accepted.insert(origin, mine);
            }
        }
    }

    fn advance(&mut self, ctx: &mut Context<'_, ChainMsg>) {
        while self.decision.is_none() && self.valid >= self.n - self.f {
            self.rounds_completed += 1;
            if self.round < self.rounds {
                self.round += 1;
            } else if self.phase < self.phases() {
                self.phase += 1;
                self.round = 1;
            } else {
                let v = majority_value(&self.accepted);
                self.decision = Some(v);
                ctx.decide(v);
                return;
            }
            self.valid = self.early.remove(&(self.phase, self.round)).unwrap_or(0);
            ctx.broadcast(self.message());
        }
    }
}

impl Process for ChainProcess {
    type Msg = ChainMsg;

    fn init(&mut self, ctx: &mut Context<'_, ChainMsg>) {
        let own = ctx.sign_value(self.input);
        self.accepted.insert(self.me, own);
        ctx.broadcast(self.message());
    }

    fn deliver(&mut self, from: ProcessId, msg: ChainMsg, ctx: &mut Context<'_, ChainMsg>) {
        if self.decision.is_some() {
            return;
        }
        if from != self.me {
            self.heard[(self.phase - 1) as usize].insert(from);
        }
        if !self.seen.insert((from, msg.phase, msg.round)) {
            return;
        }
        self.try_accept(&msg.values, ctx);
        let here = (self.phase, self.round);
        let tag = (msg.phase, msg.round);
        if tag == here {
            self.valid += 1;
        } else if tag > here && msg.phase <= self.phases() && msg.round <= self.rounds {
            *self.early.entry(tag).or_default() += 1;
        }
        self.advance(ctx);
    }

    fn finished(&self) -> bool {
        self.decision.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{RegistrySigner, SignatureRegistry};

    fn p(i: usize) -> ProcessId {
        ProcessId(i)
    }

    #[test]
    fn phase_one_accepts_single_signature_and_resigns() {
        let mut reg = SignatureRegistry::new();
        let sv = RegistrySigner::new(p(2), &mut reg).sign_value(Bit::One);
        let mut c = ChainProcess::new(p(0), 3, 1, 2, Bit::Zero);
        c.try_accept(&[sv], &mut RegistrySigner::new(p(0), &mut reg));
        assert_eq!(c.accepted()[&p(2)].chain, vec![p(2), p(0)]);
    }

    #[test]
    fn phase_two_rejects_single_signature() {
        let mut reg = SignatureRegistry::new();
        let sv = RegistrySigner::new(p(2), &mut reg).sign_value(Bit::One);
        let mut c = ChainProcess::new(p(0), 3, 1, 2, Bit::Zero);
        c.phase = 2;
        c.try_accept(&[sv], &mut RegistrySigner::new(p(0), &mut reg));
        assert!(c.accepted().is_empty());
    }

    #[test]
    fn second_value_from_same_origin_rejected() {
        let mut reg = SignatureRegistry::new();
        let a = RegistrySigner::new(p(2), &mut reg).sign_value(Bit::One);
        let b = RegistrySigner::new(p(2), &mut reg).sign_value(Bit::Zero);
        let mut c = ChainProcess::new(p(0), 3, 1, 2, Bit::Zero);
        c.try_accept(&[a], &mut RegistrySigner::new(p(0), &mut reg));
        c.try_accept(&[b], &mut RegistrySigner::new(p(0), &mut reg));
        assert_eq!(c.accepted()[&p(2)].value, Bit::One);
        assert_eq!(c.acceptances().len(), 1);
    }

    #[test]
    fn unverifiable_chain_skipped() {
        let mut reg = SignatureRegistry::new();
        let forged = SignedValue {
            value: Bit::Zero,
            chain: vec![p(1)],
        };
        let mut c = ChainProcess::new(p(0), 3, 1, 2, Bit::Zero);
        c.try_accept(&[forged], &mut RegistrySigner::new(p(0), &mut reg));
        assert!(c.accepted().is_empty());
    }

    #[test]
    fn majority_value_ties_to_zero() {
        let mut reg = SignatureRegistry::new();
        let mut m = BTreeMap::new();
        m.insert(
            p(0),
            RegistrySigner::new(p(0), &mut reg).sign_value(Bit::Zero),
        );
        m.insert(
            p(1),
            RegistrySigner::new(p(1), &mut reg).sign_value(Bit::One),
        );
        assert_eq!(majority_value(&m), Bit::Zero);
        m.insert(
            p(2),
            RegistrySigner::new(p(2), &mut reg).sign_value(Bit::One),
        );
        assert_eq!(majority_value(&m), Bit::One);
    }
}
