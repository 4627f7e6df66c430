//! Crash-tolerant consensus for `n = 2f + 1`: the same round loop as the
//! Byzantine protocol, with a point-to-point graded round. When phase 2
//! yields no value, a process adopts the value of the first Init it
//! received from another process in that round.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{Context, Process};
use crate::protocols::{Grade, RoundOutcome};
use crate::types::{Bit, ProcessId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CrashMsg {
    Init {
        round: u64,
        value: Bit,
    },
    /// `None` is the empty proposal.
    Echo {
        round: u64,
        proposal: Option<Bit>,
    },
}

/// Which return rule produced a round's outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    Commit,
    AdoptEcho,
    FirstSeen,
}

/// Which Init the first-seen fallback uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FirstSeen {
    /// First Init from another process.
    #[default]
    External,
    /// First Init received in arrival order, own Init included.
    Received,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CrashRoundRecord {
    pub round: u64,
    pub input: Bit,
    pub proposal: Option<Option<Bit>>,
    pub outcome: Option<RoundOutcome>,
    pub rule: Option<Rule>,
    pub first_seen_sender: Option<ProcessId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Phase {
    Init,
    Echo,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CrashProcess {
    me: ProcessId,
    n: usize,
    f: usize,
    input: Bit,
    est: Bit,
    round: u64,
    phase: Phase,
    decided: Option<Bit>,
    max_rounds: Option<u64>,
    frozen: bool,
    inits: BTreeMap<u64, Vec<(ProcessId, Bit)>>,
    echoes: BTreeMap<u64, Vec<(ProcessId, Option<Bit>)>>,
    fsv: FirstSeen,
    first_init: BTreeMap<u64, (ProcessId, Bit)>,
    first_external: BTreeMap<u64, (ProcessId, Bit)>,
    records: Vec<CrashRoundRecord>,
}

impl CrashProcess {
    pub fn new(me: ProcessId, n: usize, f: usize, input: Bit) -> Self {
        CrashProcess {
            me,
            n,
            f,
            input,
            est: input,
            round: 0,
            phase: Phase::Init,
            decided: None,
            max_rounds: None,
            frozen: false,
            inits: BTreeMap::new(),
            echoes: BTreeMap::new(),
            fsv: FirstSeen::External,
            first_init: BTreeMap::new(),
            first_external: BTreeMap::new(),
            records: Vec::new(),
        }
    }

    /// Stop after `rounds` rounds; `finished()` then reports completion.
    pub fn with_max_rounds(mut self, rounds: u64) -> Self {
        self.max_rounds = Some(rounds);
        self
    }

    pub fn with_first_seen(mut self, rule: FirstSeen) -> Self {
        self.fsv = rule;
        self
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

    pub fn records(&self) -> &[CrashRoundRecord] {
        &self.records
    }

    /// Rounds whose outcome has been returned.
    pub fn completed_rounds(&self) -> u64 {
        self.records.iter().filter(|r| r.outcome.is_some()).count() as u64
    }

    fn quorum(&self) -> usize {
        self.n - self.f
    }

    fn start_round(&mut self, ctx: &mut Context<'_, CrashMsg>) {
        if self.max_rounds.is_some_and(|m| self.round >= m) {
            self.phase = Phase::Stopped;
            return;
        }
        self.records.push(CrashRoundRecord {
            round: self.round,
            input: self.est,
            proposal: None,
            outcome: None,
            rule: None,
            first_seen_sender: None,
        });
        self.phase = Phase::Init;
        ctx.broadcast(CrashMsg::Init {
            round: self.round,
            value: self.est,
        });
    }

    fn progress(&mut self, ctx: &mut Context<'_, CrashMsg>) {
        while !self.frozen {
            let q = self.quorum();
            match self.phase {
                Phase::Stopped => return,
                Phase::Init => {
                    let Some(got) = self.inits.get(&self.round).filter(|v| v.len() >= q) else {
                        return;
                    };
                    let ones = got[..q].iter().filter(|(_, b)| *b == Bit::One).count();
                    let zeros = q - ones;
                    let proposal = if ones > self.f {
                        Some(Bit::One)
                    } else if zeros > self.f {
                        Some(Bit::Zero)
                    } else {
                        None
                    };
                    self.records.last_mut().expect("round record").proposal = Some(proposal);
                    self.phase = Phase::Echo;
                    ctx.broadcast(CrashMsg::Echo {
                        round: self.round,
                        proposal,
                    });
                }
                Phase::Echo => {
                    let Some(got) = self.echoes.get(&self.round).filter(|v| v.len() >= q) else {
                        return;
                    };
                    let got = &got[..q];
                    let count = |v: Bit| got.iter().filter(|(_, x)| *x == Some(v)).count();
                    let (c0, c1) = (count(Bit::Zero), count(Bit::One));
                    let (outcome, rule, sender) = if c1 > self.f {
                        (RoundOutcome::commit(Bit::One), Rule::Commit, None)
                    } else if c0 > self.f {
                        (RoundOutcome::commit(Bit::Zero), Rule::Commit, None)
                    } else if c1 >= 1 {
                        (RoundOutcome::adopt(Bit::One), Rule::AdoptEcho, None)
                    } else if c0 >= 1 {
                        (RoundOutcome::adopt(Bit::Zero), Rule::AdoptEcho, None)
                    } else {
                        let first = match self.fsv {
                            FirstSeen::Received => &self.first_init,
                            FirstSeen::External => &self.first_external,
                        };
                        match first.get(&self.round) {
                            Some(&(s, v)) => (RoundOutcome::adopt(v), Rule::FirstSeen, Some(s)),
                            None => (
                                RoundOutcome::adopt(self.est),
                                Rule::FirstSeen,
                                Some(self.me),
                            ),
                        }
                    };
                    let rec = self.records.last_mut().expect("round record");
                    rec.outcome = Some(outcome);
                    rec.rule = Some(rule);
                    rec.first_seen_sender = sender;
                    if outcome.grade == Grade::Commit && self.decided.is_none() {
                        self.decided = Some(outcome.value);
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

impl Process for CrashProcess {
    type Msg = CrashMsg;

    fn init(&mut self, ctx: &mut Context<'_, CrashMsg>) {
        self.start_round(ctx);
    }

    fn deliver(&mut self, from: ProcessId, msg: CrashMsg, ctx: &mut Context<'_, CrashMsg>) {
        match msg {
            CrashMsg::Init { round, value } => {
                let list = self.inits.entry(round).or_default();
                if list.iter().any(|(s, _)| *s == from) {
                    return;
                }
                list.push((from, value));
                self.first_init.entry(round).or_insert((from, value));
                if from != self.me {
                    self.first_external.entry(round).or_insert((from, value));
                }
            }
            CrashMsg::Echo { round, proposal } => {
                let list = self.echoes.entry(round).or_default();
                if list.iter().any(|(s, _)| *s == from) {
                    return;
                }
                list.push((from, proposal));
            }
        }
        self.progress(ctx);
    }

    fn finished(&self) -> bool {
        match self.max_rounds {
            Some(m) => self.completed_rounds() >= m,
            None => self.decided.is_some(),
        }
    }

    fn freeze(&mut self) {
        self.frozen = true;
    }
}
