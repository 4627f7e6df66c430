//! Exhaustive enumeration of every scheduler choice sequence (and
//! optionally every crash point) for one round of the crash-tolerant
//! protocol on a tiny instance.

use std::collections::HashMap;
use std::fmt;

use rasim_core::protocols::crash::{CrashMsg, CrashProcess, CrashRoundRecord};
use rasim_core::{Bit, Host, NoAdversary, ProcessId, SystemConfig, Trace, TraceMode, World};
use serde::{Deserialize, Serialize};

use crate::trial::{crash_round_checks, CrashRoundChecks};

/// Largest admissible number of choices at one state.
pub const MAX_BRANCHING: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreConfig {
    pub n: usize,
    pub f: usize,
    pub inputs: Vec<Bit>,
    /// Longest admissible schedule, in choices.
    pub depth_cap: usize,
    /// Abort after this many distinct states.
    pub max_states: u64,
    /// Also branch on crashing each of the last `f` processes at every
    /// step boundary (at most `f` crashes).
    pub crash_points: bool,
}

impl ExploreConfig {
    pub fn failure_free(inputs: Vec<Bit>, depth_cap: usize) -> Self {
        ExploreConfig {
            n: inputs.len(),
            f: (inputs.len().saturating_sub(1)) / 2,
            inputs,
            depth_cap,
            max_states: 5_000_000,
            crash_points: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    Deliver(usize, usize),
    Crash(usize),
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Deliver(s, d) => write!(f, "deliver {s}->{d}"),
            Choice::Crash(p) => write!(f, "crash {p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum ExploreVerdict {
    /// Every leaf satisfied every predicate.
    Holds,
    Counterexample {
        property: String,
        schedule: Vec<Choice>,
    },
    /// A state-space guard tripped; no verdict.
    Aborted { reason: String, states: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhaustiveReport {
    pub inputs: Vec<Bit>,
    pub crash_points: bool,
    /// Complete schedules enumerated (decimal; may exceed 64 bits).
    pub schedules: String,
    /// Distinct states visited.
    pub states: u64,
    pub max_depth: usize,
    pub verdict: ExploreVerdict,
}

impl ExhaustiveReport {
    pub fn holds(&self) -> bool {
        self.verdict == ExploreVerdict::Holds
    }
}

type Key = (Vec<(Option<CrashProcess>, bool)>, Vec<Vec<CrashMsg>>);

struct Explorer<'a> {
    cfg: &'a ExploreConfig,
    memo: HashMap<Key, u128>,
    states: u64,
    max_depth: usize,
    path: Vec<Choice>,
}

enum Stop {
    Bad(String),
    Abort(String),
}

fn key(w: &World<CrashProcess>) -> Key {
    let n = w.n();
    let procs = w
        .slots()
        .iter()
        .map(|s| (s.process.clone(), s.crashed))
        .collect();
    let mut queues = Vec::with_capacity(n * n);
    for s in 0..n {
        for d in 0..n {
            queues.push(
                w.queue(ProcessId(s), ProcessId(d))
                    .iter()
                    .map(|e| e.payload)
                    .collect(),
            );
        }
    }
    (procs, queues)
}

fn records(w: &World<CrashProcess>) -> Vec<&[CrashRoundRecord]> {
    w.slots()
        .iter()
        .filter_map(|s| s.process.as_ref().map(|p| p.records()))
        .collect()
}

fn first_failure(c: &CrashRoundChecks) -> Option<&'static str> {
    if !c.integrity {
        Some("round-integrity")
    } else if !c.strong_validity {
        Some("round-strong-validity")
    } else if !c.echo_uniqueness {
        Some("echo-uniqueness")
    } else if !c.consistency {
        Some("round-consistency")
    } else {
        None
    }
}

impl Explorer<'_> {
    fn crash_budget(&self, w: &World<CrashProcess>) -> Vec<usize> {
        if !self.cfg.crash_points {
            return Vec::new();
        }
        let crashed = w.slots().iter().filter(|s| s.crashed).count();
        if crashed >= self.cfg.f {
            return Vec::new();
        }
        (self.cfg.n - self.cfg.f..self.cfg.n)
            .filter(|&p| !w.slot(ProcessId(p)).crashed)
            .collect()
    }

    fn leaf(w: &World<CrashProcess>) -> bool {
        w.slots().iter().filter(|s| !s.crashed).all(|s| {
            s.process
                .as_ref()
                .is_some_and(|p| p.completed_rounds() >= 1)
        })
    }

    fn visit(&mut self, w: &World<CrashProcess>) -> Result<u128, Stop> {
        self.max_depth = self.max_depth.max(self.path.len());
        if Self::leaf(w) {
            let c = crash_round_checks(&records(w));
            return match first_failure(&c) {
                Some(p) => Err(Stop::Bad(p.into())),
                None => Ok(1),
            };
        }
        let k = key(w);
        if let Some(&count) = self.memo.get(&k) {
            return Ok(count);
        }
        self.states += 1;
        if self.states > self.cfg.max_states {
            return Err(Stop::Abort(format!(
                "state limit {} exceeded",
                self.cfg.max_states
            )));
        }
        let pairs = w.pending_pairs();
        let crashes = self.crash_budget(w);
        if pairs.is_empty() {
            return Err(Stop::Bad("termination".into()));
        }
        if pairs.len() + crashes.len() > MAX_BRANCHING {
            return Err(Stop::Abort(format!(
                "branching {} exceeds {MAX_BRANCHING}",
                pairs.len() + crashes.len()
            )));
        }
        if self.path.len() >= self.cfg.depth_cap {
            return Err(Stop::Abort(format!(
                "depth cap {} reached before the round completed",
                self.cfg.depth_cap
            )));
        }
        let mut total: u128 = 0;
        for (s, d) in pairs {
            let mut next = w.clone();
            next.deliver_pair((s, d), &mut NoAdversary);
            self.path.push(Choice::Deliver(s.0, d.0));
            total += self.visit(&next)?;
            self.path.pop();
        }
        for p in crashes {
            let mut next = w.clone();
            next.crash(ProcessId(p));
            self.path.push(Choice::Crash(p));
            total += self.visit(&next)?;
            self.path.pop();
        }
        self.memo.insert(k, total);
        Ok(total)
    }
}

/// Enumerate every schedule of one round and check the graded-round
/// predicates on every leaf.
pub fn explore(cfg: &ExploreConfig) -> ExhaustiveReport {
    let mut report = ExhaustiveReport {
        inputs: cfg.inputs.clone(),
        crash_points: cfg.crash_points,
        schedules: "0".into(),
        states: 0,
        max_depth: 0,
        verdict: ExploreVerdict::Holds,
    };
    if cfg.inputs.len() != cfg.n || cfg.n < 2 * cfg.f + 1 {
        report.verdict = ExploreVerdict::Aborted {
            reason: format!("need n = 2f+1 inputs, got n={} f={}", cfg.n, cfg.f),
            states: 0,
        };
        return report;
    }
    let system = if cfg.crash_points && cfg.f > 0 {
        SystemConfig::with_last_faulty(cfg.n, cfg.f, 0)
    } else {
        SystemConfig::all_correct(cfg.n, cfg.f, 0)
    };
    let hosts = (0..cfg.n)
        .map(|i| {
            let id = ProcessId(i);
            let p = CrashProcess::new(id, cfg.n, cfg.f, cfg.inputs[i]).with_max_rounds(1);
            if system.is_correct(id) {
                Host::correct(p, Some(cfg.inputs[i]))
            } else {
                Host::hosted(p, Some(cfg.inputs[i]), None)
            }
        })
        .collect();
    let base = World::new(&system, hosts, Trace::new(TraceMode::Off, String::new()))
        .expect("explorer instance");
    let mut ex = Explorer {
        cfg,
        memo: HashMap::new(),
        states: 0,
        max_depth: 0,
        path: Vec::new(),
    };
    // Root choices: start normally, or with a faulty process crashed
    // before it sends anything.
    let mut roots = vec![(None, base.clone())];
    if cfg.crash_points {
        for p in cfg.n - cfg.f..cfg.n {
            let mut w = base.clone();
            w.crash(ProcessId(p));
            roots.push((Some(p), w));
        }
    }
    let mut total: u128 = 0;
    for (crashed, mut w) in roots {
        w.start(&mut NoAdversary);
        if let Some(p) = crashed {
            ex.path.push(Choice::Crash(p));
        }
        match ex.visit(&w) {
            Ok(c) => total += c,
            Err(Stop::Bad(property)) => {
                report.verdict = ExploreVerdict::Counterexample {
                    property,
                    schedule: ex.path.clone(),
                };
                break;
            }
            Err(Stop::Abort(reason)) => {
                report.verdict = ExploreVerdict::Aborted {
                    reason,
                    states: ex.states,
                };
                break;
            }
        }
        ex.path.clear();
    }
    report.schedules = total.to_string();
    report.states = ex.states;
    report.max_depth = ex.max_depth;
    report
}

/// Every assignment of binary inputs to `n` processes.
pub fn all_inputs(n: usize) -> Vec<Vec<Bit>> {
    (0..1u32 << n)
        .map(|m| (0..n).map(|i| Bit::from(m >> i & 1 == 1)).collect())
        .collect()
}
