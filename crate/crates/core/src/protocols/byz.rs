//! Byzantine consensus for `n = 3f + 1`: an unbounded loop of graded
//! rounds, each built from two reliable broadcasts (Init, then Echo with
//! its justification). Decides on the first Commit and keeps running.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::brb::{BrbKind, BrbLayer, BrbMessage};
use crate::crypto::Signer;
use crate::engine::{Context, Process};
use crate::protocols::RoundOutcome;
use crate::types::{majority, Bit, ProcessId};

/// Domain tag of the signed Init statement `[tag, round, value]`.
pub const INIT_TAG: u64 = 0x1417;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignedInit {
    pub origin: ProcessId,
    pub round: u64,
    pub value: Bit,
}

impl SignedInit {
    pub fn statement(&self) -> [u64; 3] {
        init_statement(self.round, self.value)
    }
}

pub fn init_statement(round: u64, value: Bit) -> [u64; 3] {
    [INIT_TAG, round, value.as_u8() as u64]
}

/// Phase-2 claim: a proposal plus the `n-f` Inits that justify it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EchoClaim {
    pub round: u64,
    pub proposal: Bit,
    pub justification: Vec<SignedInit>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ByzPayload {
    Init(SignedInit),
    Echo(EchoClaim),
}

pub type ByzMsg = BrbMessage<ByzPayload>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Init,
    Echo,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByzProcess {
    me: ProcessId,
    n: usize,
    f: usize,
    input: Bit,
    est: Bit,
    round: u64,
    phase: Phase,
    decided: Option<Bit>,
    decided_round: Option<u64>,
    frozen: bool,
    brb: BrbLayer<ByzPayload>,
    inits: BTreeMap<u64, Vec<SignedInit>>,
    echoes: BTreeMap<u64, Vec<(ProcessId, EchoClaim)>>,
    outcomes: Vec<RoundOutcome>,
    est_history: Vec<Bit>,
    rejected_echoes: u64,
}

impl ByzProcess {
    pub fn new(me: ProcessId, n: usize, f: usize, input: Bit) -> Self {
        ByzProcess {
            me,
            n,
            f,
            input,
            est: input,
            round: 0,
            phase: Phase::Init,
            decided: None,
            decided_round: None,
            frozen: false,
            brb: BrbLayer::new(me, n, f),
            inits: BTreeMap::new(),
            echoes: BTreeMap::new(),
            outcomes: Vec::new(),
            est_history: Vec::new(),
            rejected_echoes: 0,
        }
    }

    pub fn input(&self) -> Bit {
        self.input
    }

    pub fn est(&self) -> Bit {
        self.est
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn decision(&self) -> Option<Bit> {
        self.decided
    }

    pub fn decided_round(&self) -> Option<u64> {
        self.decided_round
    }

    /// Outcome of each completed round, indexed by round.
    pub fn outcomes(&self) -> &[RoundOutcome] {
        &self.outcomes
    }

    /// Estimate at the start of each round entered, indexed by round.
    pub fn est_history(&self) -> &[Bit] {
        &self.est_history
    }

    pub fn brb(&self) -> &BrbLayer<ByzPayload> {
        &self.brb
    }

    pub fn rejected_echoes(&self) -> u64 {
        self.rejected_echoes
    }

    fn quorum(&self) -> usize {
        self.n - self.f
    }

    /// An Echo is valid iff its justification holds exactly `n-f` Inits for
    /// the Echo's round from distinct origins, each signed by its origin and
    /// not contradicting an Init this process delivered, and the majority of
    /// those Inits equals the proposal.
    pub fn validate_echo(&self, claim: &EchoClaim, verifier: &impl Signer) -> bool {
        let h = &claim.justification;
        if h.len() != self.quorum() {
            return false;
        }
        let mut origins = BTreeSet::new();
        for si in h {
            if si.round != claim.round || si.origin.0 >= self.n || !origins.insert(si.origin) {
                return false;
            }
            if !verifier.verify_statement(si.origin, &si.statement()) {
                return false;
            }
            if let Some(mine) = self
                .inits
                .get(&claim.round)
                .and_then(|v| v.iter().find(|x| x.origin == si.origin))
            {
                if mine.value != si.value {
                    return false;
                }
            }
        }
        majority(h.iter().map(|si| &si.value)) == claim.proposal
    }

    fn start_round(&mut self, ctx: &mut Context<'_, ByzMsg>) {
        self.est_history.push(self.est);
        self.phase = Phase::Init;
        ctx.sign_statement(&init_statement(self.round, self.est));
        let si = SignedInit {
            origin: self.me,
            round: self.round,
            value: self.est,
        };
        let m = self
            .brb
            .broadcast(self.round, BrbKind::Init, ByzPayload::Init(si));
        ctx.broadcast(m);
    }

    fn on_delivered(
        &mut self,
        key: crate::brb::BrbKey,
        payload: ByzPayload,
        ctx: &Context<'_, ByzMsg>,
    ) {
        match (key.kind, payload) {
            (BrbKind::Init, ByzPayload::Init(si)) => {
                if si.origin != key.sender
                    || si.round != key.round
                    || !ctx.verify_statement(si.origin, &si.statement())
                {
                    return;
                }
                let list = self.inits.entry(si.round).or_default();
                if !list.iter().any(|x| x.origin == si.origin) {
                    list.push(si);
                }
            }
            (BrbKind::Echo, ByzPayload::Echo(claim)) => {
                if claim.round != key.round {
                    return;
                }
                self.echoes
                    .entry(claim.round)
                    .or_default()
                    .push((key.sender, claim));
            }
            _ => {}
        }
    }

    fn progress(&mut self, ctx: &mut Context<'_, ByzMsg>) {
        while !self.frozen {
            match self.phase {
                Phase::Init => {
                    let q = self.quorum();
                    let Some(h) = self.inits.get(&self.round).filter(|h| h.len() >= q) else {
                        return;
                    };
                    let h: Vec<SignedInit> = h[..q].to_vec();
                    let proposal = majority(h.iter().map(|si| &si.value));
                    let claim = EchoClaim {
                        round: self.round,
                        proposal,
                        justification: h,
                    };
                    let m = self
                        .brb
                        .broadcast(self.round, BrbKind::Echo, ByzPayload::Echo(claim));
                    ctx.broadcast(m);
                    self.phase = Phase::Echo;
                }
                Phase::Echo => {
                    let q = self.quorum();
                    let Some(list) = self.echoes.get(&self.round) else {
                        return;
                    };
                    let mut accepted: Vec<Bit> = Vec::with_capacity(q);
                    let mut rejected = 0;
                    for (_, claim) in list {
                        if accepted.len() == q {
                            break;
                        }
                        if self.validate_echo(claim, &*ctx) {
                            accepted.push(claim.proposal);
                        } else {
                            rejected += 1;
                        }
                    }
                    if accepted.len() < q {
                        return;
                    }
                    self.rejected_echoes += rejected;
                    let commit_threshold = 2 * self.f + 1;
                    let ones = accepted.iter().filter(|b| **b == Bit::One).count();
                    let zeros = accepted.len() - ones;
                    let outcome = if ones >= commit_threshold {
                        RoundOutcome::commit(Bit::One)
                    } else if zeros >= commit_threshold {
                        RoundOutcome::commit(Bit::Zero)
                    } else {
                        RoundOutcome::adopt(majority(&accepted))
                    };
                    self.outcomes.push(outcome);
                    if outcome.grade == crate::protocols::Grade::Commit && self.decided.is_none() {
                        self.decided = Some(outcome.value);
                        self.decided_round = Some(self.round);
                        ctx.decide(outcome.value);
                    }
                    self.est = outcome.value;
                    self.round += 1;
                    self.start_round(ctx);
                }
            }
        }
    }
}

impl Process for ByzProcess {
    type Msg = ByzMsg;

    fn init(&mut self, ctx: &mut Context<'_, ByzMsg>) {
        self.start_round(ctx);
    }

    fn deliver(&mut self, from: ProcessId, msg: ByzMsg, ctx: &mut Context<'_, ByzMsg>) {
        let out = self.brb.on_message(from, msg);
        for m in out.broadcasts {
            ctx.broadcast(m);
        }
        for (key, payload) in out.delivered {
            self.on_delivered(key, payload, ctx);
        }
        self.progress(ctx);
    }

    fn finished(&self) -> bool {
        self.decided.is_some()
    }

    fn freeze(&mut self) {
        self.frozen = true;
    }
}
