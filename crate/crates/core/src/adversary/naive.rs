//! The naive history-exchange protocol and the attack that breaks it.
//!
//! Round 0 sends the signed input; rounds `1..=R` resend every signed input
//! known so far; each round waits for `n-f` valid messages of that round.
//! After round `R` a process decides the lowest input it knows. The attack
//! keeps the faulty processes silent towards correct ones until the final
//! round, then lets them speak to a single target.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::crypto::{SignedValue, Signer};
use crate::engine::{Adversary, AdversaryContext, Context, Process};
use crate::protocols::chain::{ChainMsg, ChainProcess};
use crate::types::{Bit, ProcessId};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NaiveMsg {
    pub round: u32,
    /// Signed inputs known to the sender, one per origin.
    pub history: Vec<SignedValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NaiveProcess {
    me: ProcessId,
    n: usize,
    f: usize,
    rounds: u32,
    input: Bit,
    round: u32,
    count: usize,
    seen: BTreeSet<(ProcessId, u32)>,
    early: BTreeMap<u32, Vec<(ProcessId, NaiveMsg)>>,
    known: BTreeMap<ProcessId, SignedValue>,
    final_round_senders: Vec<ProcessId>,
    decision: Option<Bit>,
}

impl NaiveProcess {
    pub fn new(me: ProcessId, n: usize, f: usize, rounds: u32, input: Bit) -> Self {
        NaiveProcess {
            me,
            n,
            f,
            rounds,
            input,
            round: 0,
            count: 0,
            seen: BTreeSet::new(),
            early: BTreeMap::new(),
            known: BTreeMap::new(),
            final_round_senders: Vec::new(),
            decision: None,
        }
    }

    pub fn input(&self) -> Bit {
        self.input
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn decision(&self) -> Option<Bit> {
        self.decision
    }

    pub fn known(&self) -> &BTreeMap<ProcessId, SignedValue> {
        &self.known
    }

    /// Senders whose round-`R` messages were counted, in order.
    pub fn final_round_senders(&self) -> &[ProcessId] {
        &self.final_round_senders
    }

    fn message(&self) -> NaiveMsg {
        NaiveMsg {
            round: self.round,
            history: self.known.values().cloned().collect(),
        }
    }

    fn valid(msg: &NaiveMsg, verifier: &impl Signer) -> bool {
        msg.history
            .iter()
            .all(|sv| sv.chain.len() == 1 && verifier.verify(sv))
    }

    fn count(&mut self, from: ProcessId, msg: NaiveMsg, ctx: &mut Context<'_, NaiveMsg>) {
        if self.decision.is_some() {
            return;
        }
        for sv in msg.history {
            if let Some(o) = sv.origin() {
                self.known.entry(o).or_insert(sv);
            }
        }
        if self.round == self.rounds {
            self.final_round_senders.push(from);
        }
        self.count += 1;
        if self.count < self.n - self.f {
            return;
        }
        if self.round == self.rounds {
            let v = self
                .known
                .values()
                .map(|sv| sv.value)
                .min()
                .unwrap_or(self.input);
            self.decision = Some(v);
            ctx.decide(v);
            return;
        }
        self.round += 1;
        self.count = 0;
        ctx.broadcast(self.message());
        if let Some(buffered) = self.early.remove(&self.round) {
            for (q, m) in buffered {
                self.count(q, m, ctx);
            }
        }
    }
}

impl Process for NaiveProcess {
    type Msg = NaiveMsg;

    fn init(&mut self, ctx: &mut Context<'_, NaiveMsg>) {
        let own = ctx.sign_value(self.input);
        self.known.insert(self.me, own);
        ctx.broadcast(self.message());
    }

    fn deliver(&mut self, from: ProcessId, msg: NaiveMsg, ctx: &mut Context<'_, NaiveMsg>) {
        if self.decision.is_some()
            || msg.round < self.round
            || msg.round > self.rounds
            || !Self::valid(&msg, &*ctx)
            || !self.seen.insert((from, msg.round))
        {
            return;
        }
        if msg.round > self.round {
            self.early.entry(msg.round).or_default().push((from, msg));
            return;
        }
        self.count(from, msg, ctx);
    }

    fn finished(&self) -> bool {
        self.decision.is_some()
    }
}

/// Protocols whose last round can be recognised from a message.
pub trait FinalRound: Process {
    fn is_final_round_message(&self, msg: &Self::Msg) -> bool;
}

impl FinalRound for NaiveProcess {
    fn is_final_round_message(&self, msg: &NaiveMsg) -> bool {
        msg.round == self.rounds
    }
}

impl FinalRound for ChainProcess {
    fn is_final_round_message(&self, msg: &ChainMsg) -> bool {
        msg.phase == self.phases() && msg.round == self.rounds_per_phase()
    }
}

/// Each controlled process runs an honest shadow with input 0. Traffic among
/// controlled processes is routed internally; traffic to correct processes
/// is withheld except final-round messages to `target`.
#[derive(Debug, Clone)]
pub struct NaiveAttack<P: FinalRound> {
    target: ProcessId,
    shadows: BTreeMap<ProcessId, P>,
    internal: VecDeque<(ProcessId, ProcessId, P::Msg)>,
    /// Messages sent to the target.
    pub released: u64,
    /// Messages suppressed towards correct processes.
    pub withheld: u64,
}

impl<P: FinalRound> NaiveAttack<P> {
    pub fn new(target: ProcessId, shadows: BTreeMap<ProcessId, P>) -> Self {
        NaiveAttack {
            target,
            shadows,
            internal: VecDeque::new(),
            released: 0,
            withheld: 0,
        }
    }

    pub fn target(&self) -> ProcessId {
        self.target
    }

    pub fn shadow(&self, id: ProcessId) -> Option<&P> {
        self.shadows.get(&id)
    }

    fn route(
        &mut self,
        src: ProcessId,
        out: Vec<(ProcessId, P::Msg)>,
        ctx: &mut AdversaryContext<'_, P::Msg>,
    ) {
        for (dst, msg) in out {
            if self.shadows.contains_key(&dst) {
                self.internal.push_back((src, dst, msg));
            } else if dst == self.target && self.shadows[&src].is_final_round_message(&msg) {
                if ctx.inject(src, dst, msg).is_ok() {
                    self.released += 1;
                }
            } else {
                self.withheld += 1;
            }
        }
    }

    fn pump(&mut self, ctx: &mut AdversaryContext<'_, P::Msg>) {
        while let Some((src, dst, msg)) = self.internal.pop_front() {
            let shadow = self.shadows.get_mut(&dst).expect("shadow");
            if let Ok(((), out)) = ctx.run_as(dst, |c| shadow.deliver(src, msg, c)) {
                self.route(dst, out, ctx);
            }
        }
    }
}

impl<P: FinalRound> Adversary<P::Msg> for NaiveAttack<P> {
    fn on_start(&mut self, ctx: &mut AdversaryContext<'_, P::Msg>) {
        let ids: Vec<ProcessId> = self.shadows.keys().copied().collect();
        for id in ids {
            let shadow = self.shadows.get_mut(&id).expect("shadow");
            if let Ok(((), out)) = ctx.run_as(id, |c| shadow.init(c)) {
                self.route(id, out, ctx);
            }
        }
        self.pump(ctx);
    }

    fn on_deliver(
        &mut self,
        to: ProcessId,
        from: ProcessId,
        msg: P::Msg,
        ctx: &mut AdversaryContext<'_, P::Msg>,
    ) {
        let Some(shadow) = self.shadows.get_mut(&to) else {
            return;
        };
        if let Ok(((), out)) = ctx.run_as(to, |c| shadow.deliver(from, msg, c)) {
            self.route(to, out, ctx);
        }
        self.pump(ctx);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SignatureRegistry;

    #[test]
    fn decides_minimum_known_value() {
        let mut reg = SignatureRegistry::new();
        let mut out = Vec::new();
        let mut dec = Vec::new();
        let mut p = NaiveProcess::new(ProcessId(0), 3, 1, 0, Bit::One);
        let zero = crate::crypto::RegistrySigner::new(ProcessId(2), &mut reg).sign_value(Bit::Zero);
        let mut ctx = Context::new(ProcessId(0), 3, 1, 0, &mut out, &mut dec, &mut reg);
        p.init(&mut ctx);
        p.deliver(
            ProcessId(2),
            NaiveMsg {
                round: 0,
                history: vec![zero],
            },
            &mut ctx,
        );
        // own message not yet counted: one of two
        assert_eq!(p.decision(), None);
        let own = p.known()[&ProcessId(0)].clone();
        p.deliver(
            ProcessId(0),
            NaiveMsg {
                round: 0,
                history: vec![own],
            },
            &mut ctx,
        );
        assert_eq!(p.decision(), Some(Bit::Zero));
        assert_eq!(p.final_round_senders(), &[ProcessId(2), ProcessId(0)]);
    }

    #[test]
    fn forged_history_is_invalid() {
        let mut reg = SignatureRegistry::new();
        let mut out = Vec::new();
        let mut dec = Vec::new();
        let mut p = NaiveProcess::new(ProcessId(0), 3, 1, 0, Bit::One);
        let mut ctx = Context::new(ProcessId(0), 3, 1, 0, &mut out, &mut dec, &mut reg);
        p.init(&mut ctx);
        let forged = SignedValue {
            value: Bit::Zero,
            chain: vec![ProcessId(1)],
        };
        p.deliver(
            ProcessId(2),
            NaiveMsg {
                round: 0,
                history: vec![forged],
            },
            &mut ctx,
        );
        assert!(!p.known().contains_key(&ProcessId(1)));
    }
}
