//! One seeded trial per protocol, with the runtime monitors evaluated on
//! its final state.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng as _, SeedableRng};
use rasim_core::adversary::{
    AdversarySpec, ByzEquivocator, ChainEquivocator, CrashPoint, NaiveAttack, NaiveProcess, Silent,
};
use rasim_core::brb::{check_brb, BrbView};
use rasim_core::fd::FdProcess;
use rasim_core::protocols::byz::{ByzMsg, ByzProcess};
use rasim_core::protocols::chain::{ChainMsg, ChainProcess};
use rasim_core::protocols::crash::{CrashProcess, CrashRoundRecord, Rule};
use rasim_core::protocols::{agreement, strong_validity, Grade, RoundOutcome};
use rasim_core::{
    Adversary, Bit, Engine, Host, NoAdversary, Process, ProcessId, Rng, RunOutcome, RunReport,
    SystemConfig, Trace,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, InputSpec, Protocol};
use crate::stats::trial_seed;

pub const AGREEMENT: &str = "agreement";
pub const STRONG_VALIDITY: &str = "strong-validity";
pub const WEAK_VALIDITY: &str = "weak-validity";
pub const VALIDITY: &str = "validity";
pub const UNIFORM_AGREEMENT: &str = "uniform-agreement";
pub const DOUBLE_DECIDE: &str = "double-decide";
pub const ROUND_CONSISTENCY: &str = "round-consistency";
pub const ROUND_INTEGRITY: &str = "round-integrity";
pub const ROUND_STRONG_VALIDITY: &str = "round-strong-validity";
pub const ECHO_UNIQUENESS: &str = "echo-uniqueness";
pub const ABSORPTION: &str = "absorption";
pub const FSV_CHANNEL: &str = "fsv-channel";
pub const DRAIN_INCOMPLETE: &str = "drain-incomplete";
pub const EXACT_TERMINATION: &str = "exact-termination";
pub const CONDITIONAL_AGREEMENT: &str = "conditional-agreement";
pub const RELAY_MECHANISM: &str = "relay-mechanism";
pub const FALSE_SUSPICION: &str = "false-suspicion";
pub const COMPLETENESS: &str = "completeness";
pub const ATTACK_MISMATCH: &str = "attack-condition-mismatch";

/// Outcome of one trial. Monitor entries are `true` when the monitor fired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub index: u64,
    pub seed: u64,
    pub outcome: RunOutcome,
    pub steps: u64,
    pub terminated: bool,
    pub inputs: Vec<Option<Bit>>,
    pub decisions: Vec<Option<Bit>>,
    /// Any primary safety monitor fired.
    pub violation: bool,
    pub monitors: BTreeMap<String, bool>,
    /// Rounds until every correct process decided (byz3f1, crash) or
    /// local rounds run (chain).
    pub rounds: Option<u64>,
    /// Per phase: every correct process heard every other correct process.
    pub connectivity: Vec<bool>,
    /// Naive attack: the target counted a faulty final-round message.
    pub attack_condition: Option<bool>,
    pub crash_steps: Vec<Option<u64>>,
    pub trace_hash: String,
}

impl TrialReport {
    pub fn fired(&self, monitor: &str) -> bool {
        self.monitors.get(monitor).copied().unwrap_or(false)
    }
}

/// Per-trial choices that are not scheduler draws.
#[derive(Debug, Clone)]
pub struct Setup {
    pub index: u64,
    pub seed: u64,
    pub system: SystemConfig,
    pub inputs: Vec<Bit>,
    pub crash_at: Vec<Option<u64>>,
}

pub fn setup(cfg: &ExperimentConfig, index: u64) -> Setup {
    let seed = trial_seed(cfg.seed, index);
    // Stream 1 of the trial seed; the scheduler owns stream 0.
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let n = cfg.n;
    let inputs: Vec<Bit> = match &cfg.inputs {
        InputSpec::All(b) => vec![*b; n],
        InputSpec::List(v) => v.clone(),
        InputSpec::Alternating => (0..n).map(|i| Bit::from(i % 2 == 1)).collect(),
        InputSpec::Random => (0..n).map(|_| Bit::from(rng.random::<bool>())).collect(),
    };
    let faulty = cfg.faulty();
    let crash_at = (0..n)
        .map(|i| {
            if !faulty.contains(&ProcessId(i)) {
                return None;
            }
            match cfg.adversary {
                AdversarySpec::Crash(CrashPoint::At(k)) => Some(k),
                AdversarySpec::Crash(CrashPoint::Random) => {
                    Some(rng.random_range(0..=cfg.crash_window))
                }
                _ => None,
            }
        })
        .collect();
    let system = if faulty.is_empty() {
        SystemConfig::all_correct(n, cfg.f, seed)
    } else {
        SystemConfig::with_last_faulty(n, cfg.f, seed)
    }
    .with_max_steps(cfg.max_steps);
    Setup {
        index,
        seed,
        system,
        inputs,
        crash_at,
    }
}

fn hosts<P>(cfg: &ExperimentConfig, s: &Setup, mk: impl Fn(ProcessId, Bit) -> P) -> Vec<Host<P>> {
    (0..cfg.n)
        .map(|i| {
            let id = ProcessId(i);
            let input = s.inputs[i];
            if s.system.is_correct(id) {
                return Host::correct(mk(id, input), Some(input));
            }
            match cfg.adversary {
                AdversarySpec::Mimic => Host::hosted(mk(id, input), Some(input), None),
                AdversarySpec::Crash(_) => Host::hosted(mk(id, input), Some(input), s.crash_at[i]),
                _ => Host::controlled(),
            }
        })
        .collect()
}

fn controlled(cfg: &ExperimentConfig, s: &Setup) -> BTreeSet<ProcessId> {
    match cfg.adversary {
        AdversarySpec::Silent | AdversarySpec::Equivocator | AdversarySpec::NaiveAttack { .. } => {
            s.system.faulty()
        }
        _ => BTreeSet::new(),
    }
}

fn base_report(s: &Setup, rep: &RunReport, inputs: Vec<Option<Bit>>) -> TrialReport {
    TrialReport {
        index: s.index,
        seed: s.seed,
        outcome: rep.outcome,
        steps: rep.steps,
        terminated: rep.terminated(),
        inputs,
        decisions: rep.decisions.clone(),
        violation: false,
        monitors: BTreeMap::new(),
        rounds: None,
        connectivity: Vec::new(),
        attack_condition: None,
        crash_steps: s.crash_at.clone(),
        trace_hash: rep.trace_hash.clone(),
    }
}

fn set(m: &mut BTreeMap<String, bool>, name: &str, fired: bool) {
    m.insert(name.to_string(), fired);
}

/// Run trial `index` of `cfg`. The config must already be valid.
pub fn run_trial(cfg: &ExperimentConfig, index: u64) -> TrialReport {
    run_trial_traced(cfg, index).0
}

/// As [`run_trial`], also returning the trace of the run.
pub fn run_trial_traced(cfg: &ExperimentConfig, index: u64) -> (TrialReport, Trace) {
    let s = setup(cfg, index);
    let (mut t, trace) = match cfg.protocol {
        Protocol::Byz3f1 => run_byz(cfg, &s),
        Protocol::Chain => run_chain(cfg, &s),
        Protocol::Crash => run_crash(cfg, &s),
        Protocol::Naive => run_naive(cfg, &s),
        Protocol::Fd => run_fd(cfg, &s),
    };
    // Covers any post-run drain as well.
    t.trace_hash = trace.hash();
    (t, trace)
}

fn engine<P: Process + 'static>(
    cfg: &ExperimentConfig,
    s: &Setup,
    hosts: Vec<Host<P>>,
    adversary: Box<dyn Adversary<P::Msg>>,
) -> Engine<P> {
    Engine::new(
        &s.system,
        cfg.scheduler.clone(),
        hosts,
        adversary,
        cfg.trace,
    )
    .expect("validated configuration")
}

fn inputs_of<P>(e: &Engine<P>) -> Vec<Option<Bit>>
where
    P: Process,
{
    e.world().slots().iter().map(|sl| sl.input).collect()
}

// ---- n = 3f+1 -------------------------------------------------------------

fn run_byz(cfg: &ExperimentConfig, s: &Setup) -> (TrialReport, Trace) {
    let (n, f) = (cfg.n, cfg.f);
    let adv: Box<dyn Adversary<ByzMsg>> = match cfg.adversary {
        AdversarySpec::Equivocator => Box::new(ByzEquivocator::new(
            n,
            f,
            &controlled(cfg, s),
            &s.system.correct,
        )),
        AdversarySpec::Silent => Box::new(Silent),
        _ => Box::new(NoAdversary),
    };
    let mut e = engine(
        cfg,
        s,
        hosts(cfg, s, |id, b| ByzProcess::new(id, n, f, b)),
        adv,
    );
    let rep = e.run();
    let correct = s.system.correct.clone();
    let inputs = inputs_of(&e);
    let mut t = base_report(s, &rep, inputs.clone());
    let m = &mut t.monitors;
    let procs: Vec<&ByzProcess> = correct
        .iter()
        .map(|p| e.world().process(*p).expect("correct host"))
        .collect();

    let agree = !agreement(&rep.decisions, &correct);
    let valid = !strong_validity(&inputs, &rep.decisions, &correct);
    set(m, AGREEMENT, agree);
    set(m, STRONG_VALIDITY, valid);
    set(
        m,
        DOUBLE_DECIDE,
        rep.double_decides.iter().any(|p| correct.contains(p)),
    );
    set(
        m,
        ROUND_CONSISTENCY,
        !rounds_consistent(procs.iter().map(|p| p.outcomes())),
    );
    set(
        m,
        ABSORPTION,
        !absorbing(procs.iter().map(|p| p.est_history())),
    );
    t.rounds = procs
        .iter()
        .map(|p| p.decided_round().map(|r| r + 1))
        .collect::<Option<Vec<_>>>()
        .and_then(|v| v.into_iter().max());

    // Reliable-broadcast properties over the drained run.
    let drained = e.drain(cfg.drain_cap);
    set(&mut t.monitors, DRAIN_INCOMPLETE, !drained);
    let views: Vec<BrbView<'_, _>> = correct
        .iter()
        .map(|p| {
            let brb = e.world().process(*p).expect("correct host").brb();
            BrbView {
                process: *p,
                broadcasts: brb.own_broadcasts(),
                deliveries: brb.delivery_log(),
            }
        })
        .collect();
    let verdict = check_brb(&views);
    for name in [
        "brb-validity",
        "brb-no-duplication",
        "brb-integrity",
        "brb-consistency",
        "brb-totality",
    ] {
        set(&mut t.monitors, name, verdict.failures().contains(&name));
    }
    t.violation = agree || valid;
    let trace = e.into_world().trace().clone();
    (t, trace)
}

/// In each round, a Commit by any process forces every outcome's value.
pub fn rounds_consistent<'a>(outcomes: impl Iterator<Item = &'a [RoundOutcome]> + Clone) -> bool {
    let depth = outcomes.clone().map(|o| o.len()).max().unwrap_or(0);
    (0..depth).all(|r| {
        let round: Vec<RoundOutcome> = outcomes.clone().filter_map(|o| o.get(r).copied()).collect();
        match round.iter().find(|o| o.grade == Grade::Commit) {
            Some(c) => round.iter().all(|o| o.value == c.value),
            None => true,
        }
    })
}

/// Once every process holds the same estimate at the start of a round, no
/// later round start holds a different one.
pub fn absorbing<'a>(histories: impl Iterator<Item = &'a [Bit]> + Clone) -> bool {
    let common = histories.clone().map(|h| h.len()).min().unwrap_or(0);
    for r in 0..common {
        let first = histories.clone().next().map(|h| h[r]);
        let Some(v) = first else { return true };
        if histories.clone().all(|h| h[r] == v) {
            return histories.clone().all(|h| h[r..].iter().all(|b| *b == v));
        }
    }
    true
}

// ---- signature chain --------------------------------------------------------

fn run_chain(cfg: &ExperimentConfig, s: &Setup) -> (TrialReport, Trace) {
    let (n, f) = (cfg.n, cfg.f);
    let rounds = cfg.rounds.expect("validated: R present");
    let ctl = controlled(cfg, s);
    let adv: Box<dyn Adversary<ChainMsg>> = match cfg.adversary {
        AdversarySpec::Equivocator => Box::new(ChainEquivocator::new(&ctl, &s.system.correct)),
        AdversarySpec::NaiveAttack { target } => {
            let shadows = ctl
                .iter()
                .map(|&b| (b, ChainProcess::new(b, n, f, rounds, Bit::Zero)))
                .collect();
            Box::new(NaiveAttack::new(target, shadows))
        }
        AdversarySpec::Silent => Box::new(Silent),
        _ => Box::new(NoAdversary),
    };
    let mut e = engine(
        cfg,
        s,
        hosts(cfg, s, |id, b| ChainProcess::new(id, n, f, rounds, b)),
        adv,
    );
    let rep = e.run();
    let correct = s.system.correct.clone();
    let inputs = inputs_of(&e);
    let mut t = base_report(s, &rep, inputs.clone());
    let procs: Vec<(ProcessId, &ChainProcess)> = correct
        .iter()
        .map(|p| (*p, e.world().process(*p).expect("correct host")))
        .collect();
    let phases = f as u32 + 1;
    let m = &mut t.monitors;

    let agree = !agreement(&rep.decisions, &correct);
    set(m, AGREEMENT, agree);
    let mut violation = agree;
    if n > 2 * f {
        let v = !strong_validity(&inputs, &rep.decisions, &correct);
        set(m, STRONG_VALIDITY, v);
        violation |= v;
    }
    if correct.len() == n {
        let v = !strong_validity(&inputs, &rep.decisions, &correct);
        set(m, WEAK_VALIDITY, v);
        violation |= v;
    }
    set(
        m,
        DOUBLE_DECIDE,
        rep.double_decides.iter().any(|p| correct.contains(p)),
    );
    let expected = rounds as u64 * phases as u64;
    set(
        m,
        EXACT_TERMINATION,
        !procs
            .iter()
            .all(|(_, p)| p.decision().is_some() && p.rounds_completed() == expected),
    );

    t.connectivity = (1..=phases)
        .map(|ph| {
            procs
                .iter()
                .all(|(_, p)| p.heard().len() >= ph as usize && p.heard_all(ph, &correct))
        })
        .collect();
    let all_connected = rep.terminated() && t.connectivity.iter().all(|c| *c);
    let maps_equal = procs.windows(2).all(|w| {
        w[0].1
            .accepted()
            .iter()
            .map(|(o, sv)| (o, sv.value))
            .eq(w[1].1.accepted().iter().map(|(o, sv)| (o, sv.value)))
    });
    set(m, CONDITIONAL_AGREEMENT, all_connected && !maps_equal);
    set(
        m,
        RELAY_MECHANISM,
        !procs.iter().all(|(me, p)| {
            p.acceptances()
                .iter()
                .filter(|a| a.phase == phases)
                .all(|a| {
                    let signers: BTreeSet<ProcessId> = a.received.chain.iter().copied().collect();
                    signers.len() == a.received.chain.len()
                        && signers.len() >= phases as usize
                        && signers.iter().any(|q| q != me && correct.contains(q))
                })
        }),
    );
    t.rounds = procs.iter().map(|(_, p)| p.rounds_completed()).max();
    t.violation = violation;
    let trace = e.into_world().trace().clone();
    (t, trace)
}

// ---- crash faults -----------------------------------------------------------

fn run_crash(cfg: &ExperimentConfig, s: &Setup) -> (TrialReport, Trace) {
    let (n, f) = (cfg.n, cfg.f);
    let adv: Box<dyn Adversary<_>> = match cfg.adversary {
        AdversarySpec::Silent => Box::new(Silent),
        _ => Box::new(NoAdversary),
    };
    let mut e = engine(
        cfg,
        s,
        hosts(cfg, s, |id, b| CrashProcess::new(id, n, f, b)),
        adv,
    );
    let rep = e.run();
    let correct = s.system.correct.clone();
    let inputs = inputs_of(&e);
    let mut t = base_report(s, &rep, inputs.clone());
    let all: BTreeSet<ProcessId> = (0..n).map(ProcessId).collect();
    let hosted: Vec<(ProcessId, &CrashProcess)> = all
        .iter()
        .filter_map(|p| e.world().process(*p).map(|c| (*p, c)))
        .collect();

    let proposed: BTreeSet<Bit> = inputs.iter().flatten().copied().collect();
    let validity = rep
        .decisions
        .iter()
        .flatten()
        .any(|d| !proposed.contains(d));
    let uniform = !agreement(&rep.decisions, &all);
    let records: Vec<&[CrashRoundRecord]> = hosted.iter().map(|(_, p)| p.records()).collect();
    let m = &mut t.monitors;
    set(m, VALIDITY, validity);
    set(m, UNIFORM_AGREEMENT, uniform);
    set(m, DOUBLE_DECIDE, !rep.double_decides.is_empty());
    let checks = crash_round_checks(&records);
    set(m, ROUND_INTEGRITY, !checks.integrity);
    set(m, ROUND_STRONG_VALIDITY, !checks.strong_validity);
    set(m, ECHO_UNIQUENESS, !checks.echo_uniqueness);
    set(m, ROUND_CONSISTENCY, !checks.consistency);
    set(m, ABSORPTION, !crash_absorbing(&records, correct.len()));
    let correct_records: Vec<&[CrashRoundRecord]> = hosted
        .iter()
        .filter(|(p, _)| correct.contains(p))
        .map(|(_, c)| c.records())
        .collect();
    set(m, FSV_CHANNEL, !fsv_channel(&correct_records));
    t.rounds = hosted
        .iter()
        .filter(|(p, _)| correct.contains(p))
        .map(|(_, c)| {
            c.records()
                .iter()
                .position(|r| r.outcome.is_some_and(|o| o.grade == Grade::Commit))
                .map(|i| i as u64 + 1)
        })
        .collect::<Option<Vec<_>>>()
        .and_then(|v| v.into_iter().max());
    t.violation = validity || uniform;
    let trace = e.into_world().trace().clone();
    (t, trace)
}

/// Per-round safety of the crash-tolerant graded round, over every process
/// that ran the round (crashed ones included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashRoundChecks {
    /// Returned values were round inputs.
    pub integrity: bool,
    /// Unanimous round inputs force Commit of that value.
    pub strong_validity: bool,
    /// Non-empty Echo proposals agree.
    pub echo_uniqueness: bool,
    /// A Commit forces every returned value.
    pub consistency: bool,
}

impl CrashRoundChecks {
    pub fn all(&self) -> bool {
        self.integrity && self.strong_validity && self.echo_uniqueness && self.consistency
    }
}

pub fn crash_round_checks(records: &[&[CrashRoundRecord]]) -> CrashRoundChecks {
    let mut c = CrashRoundChecks {
        integrity: true,
        strong_validity: true,
        echo_uniqueness: true,
        consistency: true,
    };
    let depth = records.iter().map(|r| r.len()).max().unwrap_or(0);
    for r in 0..depth {
        let round: Vec<&CrashRoundRecord> = records.iter().filter_map(|x| x.get(r)).collect();
        let ins: BTreeSet<Bit> = round.iter().map(|x| x.input).collect();
        let outs: Vec<RoundOutcome> = round.iter().filter_map(|x| x.outcome).collect();
        if outs.iter().any(|o| !ins.contains(&o.value)) {
            c.integrity = false;
        }
        if ins.len() == 1 {
            let v = *ins.iter().next().expect("one input");
            if outs.iter().any(|o| *o != RoundOutcome::commit(v)) {
                c.strong_validity = false;
            }
        }
        let props: BTreeSet<Bit> = round.iter().filter_map(|x| x.proposal.flatten()).collect();
        if props.len() > 1 {
            c.echo_uniqueness = false;
        }
        if let Some(cm) = outs.iter().find(|o| o.grade == Grade::Commit) {
            if outs.iter().any(|o| o.value != cm.value) {
                c.consistency = false;
            }
        }
    }
    c
}

/// Once every process that entered a round (all correct ones among them)
/// holds the same estimate, every later round input is that value. A
/// process that crashed earlier sends nothing in the round, so it does not
/// count.
pub fn crash_absorbing(records: &[&[CrashRoundRecord]], correct: usize) -> bool {
    let depth = records.iter().map(|r| r.len()).max().unwrap_or(0);
    for r in 0..depth {
        let entered: Vec<Bit> = records
            .iter()
            .filter_map(|x| x.get(r))
            .map(|x| x.input)
            .collect();
        if entered.len() < correct {
            continue;
        }
        let v = entered[0];
        if entered.iter().all(|b| *b == v) {
            return records
                .iter()
                .all(|x| x.iter().skip(r).all(|y| y.input == v));
        }
    }
    true
}

/// Rounds where every correct process fell back to the first-seen rule
/// with the same first sender end with equal estimates.
fn fsv_channel(records: &[&[CrashRoundRecord]]) -> bool {
    let depth = records.iter().map(|r| r.len()).min().unwrap_or(0);
    (0..depth).all(|r| {
        let round: Vec<&CrashRoundRecord> = records.iter().map(|x| &x[r]).collect();
        let fallback = round.iter().all(|x| x.rule == Some(Rule::FirstSeen));
        let senders: BTreeSet<Option<ProcessId>> =
            round.iter().map(|x| x.first_seen_sender).collect();
        if !fallback || senders.len() != 1 {
            return true;
        }
        let values: BTreeSet<Bit> = round
            .iter()
            .filter_map(|x| x.outcome.map(|o| o.value))
            .collect();
        values.len() <= 1
    })
}

// ---- naive baseline -----------------------------------------------------------

fn run_naive(cfg: &ExperimentConfig, s: &Setup) -> (TrialReport, Trace) {
    let (n, f) = (cfg.n, cfg.f);
    let rounds = cfg.rounds.expect("validated: R present");
    let ctl = controlled(cfg, s);
    let adv: Box<dyn Adversary<_>> = match cfg.adversary {
        AdversarySpec::NaiveAttack { target } => {
            let shadows = ctl
                .iter()
                .map(|&b| (b, NaiveProcess::new(b, n, f, rounds, Bit::Zero)))
                .collect();
            Box::new(NaiveAttack::new(target, shadows))
        }
        AdversarySpec::Silent => Box::new(Silent),
        _ => Box::new(NoAdversary),
    };
    let mut e = engine(
        cfg,
        s,
        hosts(cfg, s, |id, b| NaiveProcess::new(id, n, f, rounds, b)),
        adv,
    );
    let rep = e.run();
    let correct = s.system.correct.clone();
    let inputs = inputs_of(&e);
    let mut t = base_report(s, &rep, inputs.clone());
    let agree = !agreement(&rep.decisions, &correct);
    let valid = !strong_validity(&inputs, &rep.decisions, &correct);
    set(&mut t.monitors, AGREEMENT, agree);
    set(&mut t.monitors, STRONG_VALIDITY, valid);
    if let AdversarySpec::NaiveAttack { target } = cfg.adversary {
        let p: &NaiveProcess = e.world().process(target).expect("target is correct");
        let cond = p.final_round_senders().iter().any(|q| ctl.contains(q));
        t.attack_condition = Some(cond);
        // With every correct input 1 the attack succeeds exactly when the
        // target counted a faulty final-round message.
        let ones = correct.iter().all(|q| inputs[q.0] == Some(Bit::One));
        if ones && rep.terminated() {
            set(&mut t.monitors, ATTACK_MISMATCH, cond != agree);
        }
    }
    t.rounds = Some(rounds as u64 + 1);
    t.violation = agree || valid;
    let trace = e.into_world().trace().clone();
    (t, trace)
}

// ---- failure detector -----------------------------------------------------------

fn run_fd(cfg: &ExperimentConfig, s: &Setup) -> (TrialReport, Trace) {
    let (n, f) = (cfg.n, cfg.f);
    let window = cfg.rounds.map(u64::from);
    let adv: Box<dyn Adversary<_>> = match cfg.adversary {
        AdversarySpec::Silent => Box::new(Silent),
        _ => Box::new(NoAdversary),
    };
    let mut e = engine(
        cfg,
        s,
        hosts(cfg, s, |id, _| FdProcess::new(id, n, f, window)),
        adv,
    );
    let rep = e.run();
    let correct = s.system.correct.clone();
    let mut t = base_report(s, &rep, vec![None; n]);
    let procs: Vec<&FdProcess> = correct
        .iter()
        .map(|p| e.world().process(*p).expect("correct host"))
        .collect();
    let false_susp = procs.iter().any(|p| {
        p.history()
            .iter()
            .any(|h| h.iter().any(|q| correct.contains(q)))
    });
    set(&mut t.monitors, FALSE_SUSPICION, false_susp);
    if let Some(w) = window {
        // Processes silent from the start must be suspected in every round
        // from w on; later crashes must be suspected at the end.
        let silent_from_start: Vec<ProcessId> = (0..n)
            .map(ProcessId)
            .filter(|q| {
                !correct.contains(q)
                    && (matches!(cfg.adversary, AdversarySpec::Silent)
                        || s.crash_at[q.0] == Some(0))
            })
            .collect();
        let crashed_later: Vec<ProcessId> = (0..n)
            .map(ProcessId)
            .filter(|q| !correct.contains(q) && e.world().slot(*q).crashed)
            .collect();
        let complete = rep.terminated()
            && procs.iter().all(|p| {
                let h = p.history();
                silent_from_start.iter().all(|q| {
                    h.iter()
                        .enumerate()
                        .filter(|(i, _)| *i as u64 + 1 >= w)
                        .all(|(_, set)| set.contains(q))
                }) && crashed_later
                    .iter()
                    .all(|q| h.last().is_some_and(|set| set.contains(q)))
            });
        set(&mut t.monitors, COMPLETENESS, !complete);
    }
    t.violation = false_susp;
    let trace = e.into_world().trace().clone();
    (t, trace)
}
