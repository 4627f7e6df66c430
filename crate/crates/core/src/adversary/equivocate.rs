//! Equivocating Byzantine strategies: tell one half of the correct
//! processes 0 and the other half 1.

use std::collections::{BTreeMap, BTreeSet};

use crate::adversary::equivocation_groups;
use crate::brb::{BrbKey, BrbKind, BrbLayer, BrbMessage, BrbStage};
use crate::crypto::{SignedValue, Signer};
use crate::engine::{Adversary, AdversaryContext};
use crate::protocols::byz::{init_statement, ByzMsg, ByzPayload, EchoClaim, SignedInit};
use crate::protocols::chain::ChainMsg;
use crate::types::{majority, Bit, ProcessId};

#[derive(Debug, Clone)]
struct ByzAgent {
    brb: BrbLayer<ByzPayload>,
    inits: BTreeMap<u64, Vec<SignedInit>>,
    started: BTreeSet<u64>,
    echoed: BTreeSet<u64>,
}

/// Against the reliable-broadcast protocol: every round, the controlled
/// process starts its Init instance with value 0 towards one group and 1
/// towards the other (Send, Echo and Ready all split), then tries to build
/// two Echo claims justified by opposite majorities. It relays other
/// processes' broadcasts honestly so the run stays live.
#[derive(Debug, Clone)]
pub struct ByzEquivocator {
    agents: BTreeMap<ProcessId, ByzAgent>,
    groups: Vec<(ProcessId, u8)>,
    n: usize,
    f: usize,
    /// Echo claims sent, by round: 1 if a single claim went to everyone,
    /// 2 if two conflicting claims were split.
    pub echo_claims: BTreeMap<u64, usize>,
}

impl ByzEquivocator {
    pub fn new(
        n: usize,
        f: usize,
        controlled: &BTreeSet<ProcessId>,
        correct: &BTreeSet<ProcessId>,
    ) -> Self {
        ByzEquivocator {
            agents: controlled
                .iter()
                .map(|&b| {
                    (
                        b,
                        ByzAgent {
                            brb: BrbLayer::new(b, n, f),
                            inits: BTreeMap::new(),
                            started: BTreeSet::new(),
                            echoed: BTreeSet::new(),
                        },
                    )
                })
                .collect(),
            groups: equivocation_groups(correct.iter().copied()),
            n,
            f,
            echo_claims: BTreeMap::new(),
        }
    }

    fn send_split(
        &self,
        b: ProcessId,
        mk: impl Fn(Bit) -> ByzMsg,
        ctx: &mut AdversaryContext<'_, ByzMsg>,
    ) {
        for &(q, g) in &self.groups {
            let _ = ctx.inject(b, q, mk(Bit::from(g == 1)));
        }
    }

    fn start_round(&mut self, b: ProcessId, r: u64, ctx: &mut AdversaryContext<'_, ByzMsg>) {
        let agent = self.agents.get_mut(&b).expect("controlled");
        if !agent.started.insert(r) {
            return;
        }
        if let Ok(mut s) = ctx.signer(b) {
            s.sign_statement(&init_statement(r, Bit::Zero));
            s.sign_statement(&init_statement(r, Bit::One));
        }
        let key = BrbKey {
            sender: b,
            round: r,
            kind: BrbKind::Init,
        };
        let payload = |v: Bit| {
            ByzPayload::Init(SignedInit {
                origin: b,
                round: r,
                value: v,
            })
        };
        for stage in [BrbStage::Send, BrbStage::Echo, BrbStage::Ready] {
            self.send_split(
                b,
                |v| BrbMessage {
                    stage: stage.clone(),
                    key,
                    payload: payload(v),
                },
                ctx,
            );
        }
    }

    /// Pick `n-f` Inits of round `r` whose majority is `v`: own Init with
    /// value `v` plus delivered correct Inits, preferring value `v`.
    fn justify(&self, b: ProcessId, r: u64, v: Bit) -> Option<Vec<SignedInit>> {
        let agent = &self.agents[&b];
        let q = self.n - self.f;
        let mut others: Vec<SignedInit> = agent
            .inits
            .get(&r)
            .map(|l| l.iter().filter(|si| si.origin != b).copied().collect())
            .unwrap_or_default();
        if others.len() + 1 < q {
            return None;
        }
        others.sort_by_key(|si| (si.value != v, si.origin));
        let mut h = vec![SignedInit {
            origin: b,
            round: r,
            value: v,
        }];
        h.extend(others.into_iter().take(q - 1));
        h.sort_by_key(|si| si.origin);
        (majority(h.iter().map(|si| &si.value)) == v).then_some(h)
    }

    fn try_echo(&mut self, b: ProcessId, r: u64, ctx: &mut AdversaryContext<'_, ByzMsg>) {
        if self.agents[&b].echoed.contains(&r) {
            return;
        }
        let h0 = self.justify(b, r, Bit::Zero);
        let h1 = self.justify(b, r, Bit::One);
        let claim = |v: Bit, h: Vec<SignedInit>| {
            ByzPayload::Echo(EchoClaim {
                round: r,
                proposal: v,
                justification: h,
            })
        };
        let key = BrbKey {
            sender: b,
            round: r,
            kind: BrbKind::Echo,
        };
        let claims: Vec<(Bit, Vec<SignedInit>)> = match (h0, h1) {
            (None, None) => return,
            (Some(h), None) => vec![(Bit::Zero, h)],
            (None, Some(h)) => vec![(Bit::One, h)],
            (Some(a), Some(c)) => vec![(Bit::Zero, a), (Bit::One, c)],
        };
        self.agents
            .get_mut(&b)
            .expect("controlled")
            .echoed
            .insert(r);
        self.echo_claims.insert(r, claims.len());
        if claims.len() == 1 {
            let (v, h) = claims.into_iter().next().expect("one claim");
            let payload = claim(v, h);
            for &(q, _) in &self.groups {
                let _ = ctx.inject(
                    b,
                    q,
                    BrbMessage {
                        stage: BrbStage::Send,
                        key,
                        payload: payload.clone(),
                    },
                );
            }
        } else {
            let mut it = claims.into_iter();
            let (_, h0) = it.next().expect("zero claim");
            let (_, h1) = it.next().expect("one claim");
            let (p0, p1) = (claim(Bit::Zero, h0), claim(Bit::One, h1));
            self.send_split(
                b,
                |v| BrbMessage {
                    stage: BrbStage::Send,
                    key,
                    payload: if v == Bit::Zero {
                        p0.clone()
                    } else {
                        p1.clone()
                    },
                },
                ctx,
            );
        }
    }

    /// Feed one message to the honest relay of `b`, handling its own
    /// rebroadcasts locally.
    fn relay(
        &mut self,
        b: ProcessId,
        from: ProcessId,
        msg: ByzMsg,
        ctx: &mut AdversaryContext<'_, ByzMsg>,
    ) {
        let mut work = vec![(from, msg)];
        while let Some((src, m)) = work.pop() {
            let agent = self.agents.get_mut(&b).expect("controlled");
            let out = agent.brb.on_message(src, m);
            for (key, payload) in out.delivered {
                if let (BrbKind::Init, ByzPayload::Init(si)) = (key.kind, payload) {
                    if si.origin == key.sender
                        && si.round == key.round
                        && ctx.verify_statement(si.origin, &si.statement())
                    {
                        let l = agent.inits.entry(si.round).or_default();
                        if !l.iter().any(|x| x.origin == si.origin) {
                            l.push(si);
                        }
                    }
                }
            }
            for m in out.broadcasts {
                // Own instances are driven by the split logic instead.
                if m.key.sender == b {
                    continue;
                }
                for q in 0..self.n {
                    let q = ProcessId(q);
                    if q == b {
                        work.push((b, m.clone()));
                    } else {
                        let _ = ctx.inject(b, q, m.clone());
                    }
                }
            }
        }
    }
}

impl Adversary<ByzMsg> for ByzEquivocator {
    fn on_start(&mut self, ctx: &mut AdversaryContext<'_, ByzMsg>) {
        let ids: Vec<ProcessId> = self.agents.keys().copied().collect();
        for b in ids {
            self.start_round(b, 0, ctx);
        }
    }

    fn on_deliver(
        &mut self,
        to: ProcessId,
        from: ProcessId,
        msg: ByzMsg,
        ctx: &mut AdversaryContext<'_, ByzMsg>,
    ) {
        if !self.agents.contains_key(&to) {
            return;
        }
        let r = msg.key.round;
        if ctx.correct().contains(&from) {
            self.start_round(to, r, ctx);
        }
        self.relay(to, from, msg, ctx);
        self.try_echo(to, r, ctx);
    }
}

/// Against the signature-chain protocol: each controlled process signs both
/// values, sends its 0 to one group and its 1 to the other, and answers
/// every round message with the same split value so that the receiver can
/// count it.
#[derive(Debug, Clone)]
pub struct ChainEquivocator {
    values: BTreeMap<ProcessId, [Option<SignedValue>; 2]>,
    groups: BTreeMap<ProcessId, u8>,
    answered: BTreeSet<(ProcessId, ProcessId, u32, u32)>,
}

impl ChainEquivocator {
    pub fn new(controlled: &BTreeSet<ProcessId>, correct: &BTreeSet<ProcessId>) -> Self {
        ChainEquivocator {
            values: controlled.iter().map(|&b| (b, [None, None])).collect(),
            groups: equivocation_groups(correct.iter().copied())
                .into_iter()
                .collect(),
            answered: BTreeSet::new(),
        }
    }

    fn reply(
        &mut self,
        b: ProcessId,
        q: ProcessId,
        phase: u32,
        round: u32,
        ctx: &mut AdversaryContext<'_, ChainMsg>,
    ) {
        let Some(&g) = self.groups.get(&q) else {
            return;
        };
        if !self.answered.insert((b, q, phase, round)) {
            return;
        }
        let Some(sv) = self.values[&b][g as usize].clone() else {
            return;
        };
        let _ = ctx.inject(
            b,
            q,
            ChainMsg {
                values: vec![sv],
                phase,
                round,
            },
        );
    }
}

impl Adversary<ChainMsg> for ChainEquivocator {
    fn on_start(&mut self, ctx: &mut AdversaryContext<'_, ChainMsg>) {
        let ids: Vec<ProcessId> = self.values.keys().copied().collect();
        for b in &ids {
            if let Ok(mut s) = ctx.signer(*b) {
                let zero = s.sign_value(Bit::Zero);
                let one = s.sign_value(Bit::One);
                self.values.insert(*b, [Some(zero), Some(one)]);
            }
        }
        let targets: Vec<ProcessId> = self.groups.keys().copied().collect();
        for b in ids {
            for &q in &targets {
                self.reply(b, q, 1, 1, ctx);
            }
        }
    }

    fn on_deliver(
        &mut self,
        to: ProcessId,
        from: ProcessId,
        msg: ChainMsg,
        ctx: &mut AdversaryContext<'_, ChainMsg>,
    ) {
        if self.values.contains_key(&to) {
            self.reply(to, from, msg.phase, msg.round, ctx);
        }
    }
}
