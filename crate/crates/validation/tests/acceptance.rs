//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release -p rasim-validation --test acceptance`;
//! pass criterion numbers as arguments to run a subset.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rasim_core::adversary::{AdversarySpec, CrashPoint};
use rasim_core::{Bit, ProcessId, SchedulerPolicy, TraceMode};
use rasim_harness::explore::all_inputs;
use rasim_harness::stats::Verdict;
use rasim_harness::trial::{
    AGREEMENT, COMPLETENESS, DRAIN_INCOMPLETE, EXACT_TERMINATION, FALSE_SUSPICION, STRONG_VALIDITY,
    UNIFORM_AGREEMENT, VALIDITY, WEAK_VALIDITY,
};
use rasim_harness::{
    explore, run_sweep, run_trial_traced, ExperimentConfig, ExploreConfig, InputSpec, Protocol,
    SweepReport,
};

const SAFETY_TRIALS: u64 = 1_000;
const STAT_TRIALS: u64 = 10_000;
const BYZ_HORIZON: u64 = 100_000;
const CRASH_HORIZON: u64 = 100_000;

struct Outcome {
    lines: Vec<(String, bool)>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { lines: Vec::new() }
    }

    fn check(&mut self, id: &str, what: &str, pass: bool, detail: impl AsRef<str>) {
        println!(
            "criterion {id}: {} - {what} [{}]",
            if pass { "PASS" } else { "FAIL" },
            detail.as_ref()
        );
        self.lines.push((id.to_string(), pass));
    }

    fn info(&self, id: &str, detail: impl AsRef<str>) {
        println!("criterion {id}: INFO - {}", detail.as_ref());
    }
}

fn sweep(cfg: &ExperimentConfig) -> SweepReport {
    run_sweep(cfg).expect("acceptance configuration is valid")
}

fn mon(r: &SweepReport, name: &str) -> u64 {
    r.monitors.get(name).copied().unwrap_or(0)
}

fn cfg(protocol: Protocol, n: usize, f: usize) -> ExperimentConfig {
    ExperimentConfig {
        protocol,
        n,
        f,
        inputs: InputSpec::Random,
        scheduler: SchedulerPolicy::Uniform,
        ..Default::default()
    }
}

fn byz_configs() -> Vec<ExperimentConfig> {
    [
        AdversarySpec::Silent,
        AdversarySpec::Mimic,
        AdversarySpec::Crash(CrashPoint::Random),
        AdversarySpec::Equivocator,
    ]
    .into_iter()
    .enumerate()
    .map(|(i, adversary)| ExperimentConfig {
        adversary,
        trials: SAFETY_TRIALS,
        seed: 0x1000 + i as u64,
        max_steps: BYZ_HORIZON,
        ..cfg(Protocol::Byz3f1, 4, 1)
    })
    .collect()
}

fn chain_ladder(adversary: AdversarySpec, inputs: InputSpec, seed: u64) -> Vec<SweepReport> {
    [4, 8, 16, 32]
        .into_iter()
        .map(|r| {
            sweep(&ExperimentConfig {
                rounds: Some(r),
                adversary,
                inputs: inputs.clone(),
                trials: STAT_TRIALS,
                seed: seed + r as u64,
                ..cfg(Protocol::Chain, 3, 1)
            })
        })
        .collect()
}

fn rates(reports: &[SweepReport]) -> String {
    reports
        .iter()
        .map(|r| {
            format!(
                "R={}: {}/{} [{:.4},{:.4}]",
                r.config.rounds_text(),
                r.violations.count,
                r.trials,
                r.violations.ci_lo,
                r.violations.ci_hi
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

struct Suite {
    byz: Option<Vec<SweepReport>>,
    naive_chain_32: Option<SweepReport>,
}

fn c1_c2_c8(s: &mut Suite, out: &mut Outcome, which: &[u32]) {
    let reports = s
        .byz
        .get_or_insert_with(|| byz_configs().iter().map(sweep).collect());
    if which.contains(&1) {
        let detail: Vec<String> = reports
            .iter()
            .map(|r| {
                format!(
                    "{}: agreement {} strong-validity {}",
                    r.config.adversary,
                    mon(r, AGREEMENT),
                    mon(r, STRONG_VALIDITY)
                )
            })
            .collect();
        let pass = reports.iter().all(|r| {
            r.trials == SAFETY_TRIALS && mon(r, AGREEMENT) == 0 && mon(r, STRONG_VALIDITY) == 0
        });
        out.check(
            "1",
            "n=3f+1 deterministic safety, zero firings",
            pass,
            detail.join("; "),
        );
    }
    if which.contains(&2) {
        let pass = reports.iter().all(|r| r.terminated == r.trials);
        let detail: Vec<String> = reports
            .iter()
            .map(|r| format!("{}: {}/{}", r.config.adversary, r.terminated, r.trials))
            .collect();
        out.check(
            "2",
            "n=3f+1 termination within 10^5 steps in every trial",
            pass,
            detail.join("; "),
        );
        for r in reports.iter() {
            out.info(
                "2",
                format!(
                    "{} rounds-to-decision histogram {:?}",
                    r.config.adversary, r.rounds
                ),
            );
        }
    }
    if which.contains(&8) {
        let names = [
            "brb-validity",
            "brb-no-duplication",
            "brb-integrity",
            "brb-consistency",
            "brb-totality",
            DRAIN_INCOMPLETE,
        ];
        let mut fired = BTreeMap::new();
        for r in reports.iter() {
            for n in names {
                *fired.entry(n).or_insert(0u64) += mon(r, n);
            }
        }
        let checked = reports
            .iter()
            .all(|r| names.iter().all(|n| r.monitors.contains_key(*n)));
        let pass = checked && fired.values().all(|c| *c == 0);
        out.check(
            "8",
            "reliable-broadcast properties hold on every trial of criteria 1-2",
            pass,
            format!("{fired:?}"),
        );
    }
}

fn c3(out: &mut Outcome) {
    let reports: Vec<SweepReport> = [2, 4, 8]
        .into_iter()
        .map(|r| {
            sweep(&ExperimentConfig {
                rounds: Some(r),
                adversary: AdversarySpec::Mimic,
                trials: STAT_TRIALS,
                seed: 0x3000 + r as u64,
                ..cfg(Protocol::Chain, 3, 1)
            })
        })
        .collect();
    let mut detail = Vec::new();
    let mut pass = true;
    let mut observed = Vec::new();
    for r in &reports {
        let conn = r.connectivity.expect("chain reports connectivity");
        let b = r.bound.as_ref().expect("bound comparison");
        let bound = b.bound.unwrap_or(f64::NAN);
        let rr = r.config.rounds.unwrap();
        let expected = 6.0 * (5.0f64 / 6.0).powi(2 * rr as i32);
        pass &= b.verdict == Verdict::Pass && (bound - expected).abs() < 1e-12;
        observed.push(conn.rate);
        detail.push(format!(
            "R={rr}: {}/{} = {:.5} vs bound {:.5}",
            conn.count, conn.total, conn.rate, bound
        ));
    }
    let decreasing = strictly_decreasing(&observed);
    out.check(
        "3",
        "per-phase connectivity failure <= 6(5/6)^{2R} + 3 sigma and strictly decreasing",
        pass && decreasing,
        format!("{}; decreasing={decreasing}", detail.join("; ")),
    );
}

fn c4_c6(s: &mut Suite, out: &mut Outcome, which: &[u32]) {
    let naive = chain_ladder(
        AdversarySpec::NaiveAttack {
            target: ProcessId(0),
        },
        InputSpec::All(Bit::One),
        0x4100,
    );
    s.naive_chain_32 = naive.last().cloned();
    if !which.contains(&4) {
        return;
    }
    let equiv = chain_ladder(AdversarySpec::Equivocator, InputSpec::Random, 0x4200);
    for (name, ladder) in [("naive-attack", &naive), ("equivocator", &equiv)] {
        let v: Vec<f64> = ladder.iter().map(|r| r.violations.rate).collect();
        let last_zero = ladder.last().is_some_and(|r| r.violations.count == 0);
        out.check(
            "4",
            &format!("n=2f+1 {name}: violations non-increasing in R, zero at R=32"),
            non_increasing(&v) && last_zero,
            rates(ladder),
        );
    }
    for (name, ladder) in [("naive-attack", &naive), ("equivocator", &equiv)] {
        let exact = ladder.iter().all(|r| {
            let two_r = 2 * r.config.rounds.unwrap() as u64;
            r.terminated == r.trials
                && mon(r, EXACT_TERMINATION) == 0
                && r.rounds.keys().all(|k| *k == two_r)
        });
        out.check(
            "4",
            &format!("n=2f+1 {name}: every trial runs exactly 2R local rounds"),
            exact,
            ladder
                .iter()
                .map(|r| format!("R={}: {:?}", r.config.rounds_text(), r.rounds))
                .collect::<Vec<_>>()
                .join("; "),
        );
    }
    for r in &equiv {
        out.info(
            "4",
            format!(
                "equivocator R={}: conditional-agreement fired {} of {}",
                r.config.rounds_text(),
                mon(r, "conditional-agreement"),
                r.trials
            ),
        );
    }
    let ones = sweep(&ExperimentConfig {
        rounds: Some(32),
        adversary: AdversarySpec::Equivocator,
        inputs: InputSpec::All(Bit::One),
        trials: SAFETY_TRIALS,
        seed: 0x4300,
        ..cfg(Protocol::Chain, 3, 1)
    });
    out.info(
        "4",
        format!(
            "equivocator with unanimous correct inputs, R=32: {} violations of {}",
            ones.violations.count, ones.trials
        ),
    );
}

fn c5(out: &mut Outcome) {
    let mut pass = true;
    let mut detail = Vec::new();
    for v in [Bit::Zero, Bit::One] {
        let r = sweep(&ExperimentConfig {
            rounds: Some(4),
            adversary: AdversarySpec::None,
            inputs: InputSpec::All(v),
            trials: SAFETY_TRIALS,
            seed: 0x5000 + v.as_u8() as u64,
            per_trial: true,
            ..cfg(Protocol::Chain, 4, 2)
        });
        let all_v = r
            .per_trial
            .iter()
            .all(|t| t.decisions.iter().all(|d| *d == Some(v)));
        pass &= all_v && mon(&r, WEAK_VALIDITY) == 0 && r.terminated == r.trials;
        detail.push(format!(
            "v={v}: {}/{} decided v everywhere, weak-validity fired {}",
            r.per_trial
                .iter()
                .filter(|t| t.decisions.iter().all(|d| *d == Some(v)))
                .count(),
            r.trials,
            mon(&r, WEAK_VALIDITY)
        ));
    }
    out.check(
        "5a",
        "n=f+2 all-correct unanimous input decides it",
        pass,
        detail.join("; "),
    );
    let r = sweep(&ExperimentConfig {
        rounds: Some(32),
        adversary: AdversarySpec::Equivocator,
        inputs: InputSpec::All(Bit::One),
        trials: STAT_TRIALS,
        seed: 0x5100,
        ..cfg(Protocol::Chain, 4, 2)
    });
    out.check(
        "5b",
        "n=f+2 two equivocators, R=32: zero agreement violations",
        mon(&r, AGREEMENT) == 0,
        format!(
            "agreement fired {} of {} [{:.4},{:.4}]; conditional-agreement fired {}",
            mon(&r, AGREEMENT),
            r.trials,
            r.violations.ci_lo,
            r.violations.ci_hi,
            mon(&r, "conditional-agreement")
        ),
    );
}

fn c6(s: &mut Suite, out: &mut Outcome) {
    let r = sweep(&ExperimentConfig {
        rounds: Some(2),
        adversary: AdversarySpec::NaiveAttack {
            target: ProcessId(0),
        },
        inputs: InputSpec::All(Bit::One),
        trials: STAT_TRIALS,
        seed: 0x6000,
        ..cfg(Protocol::Naive, 3, 1)
    });
    let a = r.attack.clone().expect("attack summary");
    out.check(
        "6",
        "naive protocol under attack: violation rate > 0 with Wilson CI excluding 0",
        r.violations.count > 0 && r.violations.ci_lo > 0.0,
        format!(
            "{}/{} [{:.4},{:.4}]; condition met {}, violations with/without condition {}/{}",
            r.violations.count,
            r.trials,
            r.violations.ci_lo,
            r.violations.ci_hi,
            a.condition,
            a.violations_with_condition,
            a.violations_without_condition
        ),
    );
    let chain = s.naive_chain_32.clone().unwrap_or_else(|| {
        sweep(&ExperimentConfig {
            rounds: Some(32),
            adversary: AdversarySpec::NaiveAttack {
                target: ProcessId(0),
            },
            inputs: InputSpec::All(Bit::One),
            trials: STAT_TRIALS,
            seed: 0x4100 + 32,
            ..cfg(Protocol::Chain, 3, 1)
        })
    });
    out.check(
        "6",
        "same attack against the chain protocol, R=32: zero violations",
        chain.violations.count == 0,
        format!("{}/{}", chain.violations.count, chain.trials),
    );
}

fn c7(out: &mut Outcome) {
    let mut pass = true;
    let mut detail = Vec::new();
    for inputs in all_inputs(3) {
        let r = explore(&ExploreConfig::failure_free(inputs, 64));
        pass &= r.holds();
        let tag: String = r.inputs.iter().map(|b| b.to_string()).collect();
        detail.push(format!("{tag}: {} schedules {:?}", r.schedules, r.verdict));
    }
    out.check(
        "7a",
        "every schedule of one failure-free round satisfies integrity, strong validity, echo uniqueness, consistency",
        pass,
        detail.join("; "),
    );
    let mut crash_pass = true;
    let mut crash_detail = Vec::new();
    for inputs in all_inputs(3) {
        let mut c = ExploreConfig::failure_free(inputs, 64);
        c.crash_points = true;
        let r = explore(&c);
        crash_pass &= r.holds();
        crash_detail.push(r.schedules.clone());
    }
    out.info(
        "7a",
        format!(
            "with a crash of p2 at every step boundary: holds={crash_pass}, schedules {}",
            crash_detail.join(",")
        ),
    );
    let r = sweep(&ExperimentConfig {
        adversary: AdversarySpec::Crash(CrashPoint::Random),
        trials: SAFETY_TRIALS,
        seed: 0x7000,
        max_steps: CRASH_HORIZON,
        ..cfg(Protocol::Crash, 3, 1)
    });
    out.check(
        "7b",
        "crash at a uniform step: zero validity / uniform-agreement firings",
        mon(&r, VALIDITY) == 0 && mon(&r, UNIFORM_AGREEMENT) == 0,
        format!(
            "validity {} uniform-agreement {}",
            mon(&r, VALIDITY),
            mon(&r, UNIFORM_AGREEMENT)
        ),
    );
    out.check(
        "7b",
        "crash at a uniform step: every trial terminates within the horizon",
        r.terminated == r.trials,
        format!(
            "{}/{} terminated within {} steps; rounds {:?}",
            r.terminated, r.trials, CRASH_HORIZON, r.rounds
        ),
    );
}

fn c9(out: &mut Outcome) {
    let mut complete = true;
    let mut detail = Vec::new();
    for w in [2, 8, 32] {
        let r = sweep(&ExperimentConfig {
            rounds: Some(w),
            adversary: AdversarySpec::Crash(CrashPoint::At(0)),
            trials: STAT_TRIALS,
            seed: 0x9000 + w as u64,
            ..cfg(Protocol::Fd, 4, 1)
        });
        complete &= r.monitors.contains_key(COMPLETENESS)
            && mon(&r, COMPLETENESS) == 0
            && r.terminated == r.trials;
        detail.push(format!(
            "w={w}: completeness fired {}, false suspicion {}",
            mon(&r, COMPLETENESS),
            mon(&r, FALSE_SUSPICION)
        ));
    }
    out.check(
        "9",
        "crash at step 0: strong completeness on every run",
        complete,
        detail.join("; "),
    );
    let ladder: Vec<SweepReport> = [2, 8, 32]
        .into_iter()
        .map(|w| {
            sweep(&ExperimentConfig {
                rounds: Some(w),
                adversary: AdversarySpec::None,
                trials: STAT_TRIALS,
                seed: 0x9100 + w as u64,
                ..cfg(Protocol::Fd, 4, 1)
            })
        })
        .collect();
    let v: Vec<f64> = ladder.iter().map(|r| r.violations.rate).collect();
    out.check(
        "9",
        "false-suspicion rate strictly decreasing over w in {2,8,32}",
        strictly_decreasing(&v),
        rates(&ladder),
    );
}

fn c10(out: &mut Outcome) {
    let mut configs: Vec<ExperimentConfig> = byz_configs();
    configs.push(ExperimentConfig {
        rounds: Some(8),
        adversary: AdversarySpec::Equivocator,
        ..cfg(Protocol::Chain, 3, 1)
    });
    configs.push(ExperimentConfig {
        rounds: Some(2),
        adversary: AdversarySpec::NaiveAttack {
            target: ProcessId(0),
        },
        inputs: InputSpec::All(Bit::One),
        ..cfg(Protocol::Naive, 3, 1)
    });
    configs.push(ExperimentConfig {
        adversary: AdversarySpec::Crash(CrashPoint::Random),
        max_steps: CRASH_HORIZON,
        ..cfg(Protocol::Crash, 3, 1)
    });
    configs.push(ExperimentConfig {
        rounds: Some(8),
        adversary: AdversarySpec::None,
        ..cfg(Protocol::Fd, 4, 1)
    });
    let mut pass = true;
    let mut detail = Vec::new();
    for mut c in configs {
        c.trials = 200;
        c.per_trial = true;
        let a = sweep(&c);
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .expect("thread pool")
            .install(|| sweep(&c));
        let same_bytes = a.to_json() == b.to_json();
        let hashes_nonempty = a.per_trial.iter().all(|t| !t.trace_hash.is_empty());
        let mut full = c.clone();
        full.trace = TraceMode::Full;
        let (ta, xa) = run_trial_traced(&full, 7);
        let (tb, xb) = run_trial_traced(&full, 7);
        let same_trace = xa.export() == xb.export()
            && ta.trace_hash == tb.trace_hash
            && ta.trace_hash == rasim_core::trace::hash_export(&xa.export())
            && ta.trace_hash == a.per_trial[7].trace_hash;
        pass &= same_bytes && hashes_nonempty && same_trace;
        detail.push(format!(
            "{} {}: report bytes equal={same_bytes}, trace equal={same_trace}",
            c.protocol, c.adversary
        ));
    }
    out.check(
        "10",
        "same seed reproduces identical trace hashes and report bytes",
        pass,
        detail.join("; "),
    );
}

fn main() -> ExitCode {
    let args: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let which: Vec<u32> = if args.is_empty() {
        (1..=10).collect()
    } else {
        args
    };
    let mut out = Outcome::new();
    let mut suite = Suite {
        byz: None,
        naive_chain_32: None,
    };
    let t0 = Instant::now();
    if which.iter().any(|c| [1, 2, 8].contains(c)) {
        c1_c2_c8(&mut suite, &mut out, &which);
    }
    if which.contains(&3) {
        c3(&mut out);
    }
    if which.contains(&4) || which.contains(&6) {
        c4_c6(&mut suite, &mut out, &which);
    }
    if which.contains(&5) {
        c5(&mut out);
    }
    if which.contains(&6) {
        c6(&mut suite, &mut out);
    }
    if which.contains(&7) {
        c7(&mut out);
    }
    if which.contains(&9) {
        c9(&mut out);
    }
    if which.contains(&10) {
        c10(&mut out);
    }
    let failed: Vec<&str> = out
        .lines
        .iter()
        .filter(|(_, p)| !*p)
        .map(|(id, _)| id.as_str())
        .collect();
    println!(
        "acceptance: {} checks, {} failed {:?} in {:.1}s",
        out.lines.len(),
        failed.len(),
        failed,
        t0.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
