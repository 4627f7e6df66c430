use std::collections::BTreeSet;

use rand::SeedableRng;
use rasim_core::adversary::ChainEquivocator;
use rasim_core::fd::FdProcess;
use rasim_core::protocols::byz::ByzProcess;
use rasim_core::protocols::chain::ChainProcess;
use rasim_core::protocols::crash::{CrashProcess, FirstSeen, Rule};
use rasim_core::{
    Bit, Engine, Host, NoAdversary, ProcessId, Rng, RunOutcome, Scheduler, SchedulerPolicy,
    SystemConfig, TraceMode,
};

fn pid(i: usize) -> ProcessId {
    ProcessId(i)
}

fn pairs(list: &[(usize, usize)]) -> Vec<(ProcessId, ProcessId)> {
    list.iter().map(|&(a, b)| (pid(a), pid(b))).collect()
}

/// Binomial count within 3 standard deviations of its mean.
fn within_3_sigma(count: u64, draws: u64, p: f64) -> bool {
    let mean = draws as f64 * p;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= 3.0 * sd
}

#[test]
fn uniform_draw_frequencies_within_three_sigma() {
    let pending = pairs(&[(0, 1), (0, 2), (1, 0), (2, 1), (3, 0)]);
    let mut s = Scheduler::new(SchedulerPolicy::Uniform, 4);
    let mut rng = Rng::seed_from_u64(11);
    let draws = 50_000u64;
    let mut counts = vec![0u64; pending.len()];
    for _ in 0..draws {
        counts[s.draw(&pending, &mut rng)] += 1;
    }
    for c in counts {
        assert!(within_3_sigma(c, draws, 0.2), "count {c}");
    }
}

#[test]
fn weighted_draw_frequencies_match_floor_mixture() {
    let n = 3;
    let eps = 0.05;
    let pending = pairs(&[(0, 1), (1, 2), (2, 0), (2, 1)]);
    // Independent reconstruction: eps + (1 - k eps) * w / sum(w), w = 1 + p n + q.
    let w: Vec<f64> = pending
        .iter()
        .map(|(p, q)| 1.0 + (p.0 * n + q.0) as f64)
        .collect();
    let total: f64 = w.iter().sum();
    let k = pending.len() as f64;
    let expected: Vec<f64> = w
        .iter()
        .map(|x| eps + (1.0 - k * eps) * x / total)
        .collect();

    let mut s = Scheduler::new(SchedulerPolicy::WeightedMin { eps: Some(eps) }, n);
    let mut rng = Rng::seed_from_u64(5);
    let draws = 50_000u64;
    let mut counts = vec![0u64; pending.len()];
    for _ in 0..draws {
        counts[s.draw(&pending, &mut rng)] += 1;
    }
    for (c, p) in counts.iter().zip(&expected) {
        assert!(within_3_sigma(*c, draws, *p), "count {c} expected p {p}");
        assert!(*p >= eps);
    }
}

fn byz_engine(seed: u64, mode: TraceMode) -> Engine<ByzProcess> {
    let cfg = SystemConfig::all_correct(4, 1, seed).with_max_steps(100_000);
    let inputs = [Bit::One, Bit::Zero, Bit::One, Bit::Zero];
    let hosts = (0..4)
        .map(|i| Host::correct(ByzProcess::new(pid(i), 4, 1, inputs[i]), Some(inputs[i])))
        .collect();
    Engine::new(
        &cfg,
        SchedulerPolicy::Uniform,
        hosts,
        Box::new(NoAdversary),
        mode,
    )
    .unwrap()
}

#[test]
fn same_seed_same_run() {
    let mut a = byz_engine(42, TraceMode::Full);
    let mut b = byz_engine(42, TraceMode::Full);
    let ra = a.run();
    let rb = b.run();
    assert_eq!(ra, rb);
    assert_eq!(a.world().trace().export(), b.world().trace().export());
    let mut c = byz_engine(43, TraceMode::Hash);
    assert_ne!(c.run().trace_hash, ra.trace_hash);
}

fn chain_engine(
    seed: u64,
    rounds: u32,
    policy: SchedulerPolicy,
    inputs: [Bit; 3],
    equivocate: bool,
) -> Engine<ChainProcess> {
    let cfg = SystemConfig::with_last_faulty(3, 1, seed).with_max_steps(1_000_000);
    let mut hosts: Vec<Host<ChainProcess>> = (0..2)
        .map(|i| {
            Host::correct(
                ChainProcess::new(pid(i), 3, 1, rounds, inputs[i]),
                Some(inputs[i]),
            )
        })
        .collect();
    if equivocate {
        hosts.push(Host::controlled());
        let ctl: BTreeSet<_> = [pid(2)].into();
        let adv = ChainEquivocator::new(&ctl, &cfg.correct);
        Engine::new(&cfg, policy, hosts, Box::new(adv), TraceMode::Off).unwrap()
    } else {
        hosts.push(Host::hosted(
            ChainProcess::new(pid(2), 3, 1, rounds, inputs[2]),
            Some(inputs[2]),
            None,
        ));
        Engine::new(&cfg, policy, hosts, Box::new(NoAdversary), TraceMode::Off).unwrap()
    }
}

#[test]
fn chain_equivocation_splits_the_faulty_slot() {
    // Correct processes accept the first value seen from each origin, so an
    // origin that signs 0 for one and 1 for the other leaves them with
    // different maps even though every pair communicates.
    let correct: BTreeSet<_> = [pid(0), pid(1)].into();
    let mut disagreements = 0;
    for seed in 0..40 {
        let mut e = chain_engine(
            seed,
            8,
            SchedulerPolicy::Uniform,
            [Bit::One, Bit::Zero, Bit::Zero],
            true,
        );
        let rep = e.run();
        assert_eq!(rep.outcome, RunOutcome::Finished);
        let p0 = e.world().process(pid(0)).unwrap();
        let p1 = e.world().process(pid(1)).unwrap();
        if rep.decisions[0] != rep.decisions[1] {
            disagreements += 1;
            assert!((1..=2).all(|ph| p0.heard_all(ph, &correct) && p1.heard_all(ph, &correct)));
            for o in [pid(0), pid(1)] {
                assert_eq!(p0.accepted()[&o].value, p1.accepted()[&o].value);
            }
            assert_ne!(p0.accepted()[&pid(2)].value, p1.accepted()[&pid(2)].value);
        }
    }
    assert!(disagreements > 0);
}

#[test]
fn partition_scheduler_breaks_connectivity() {
    let correct: BTreeSet<_> = [pid(0), pid(1)].into();
    let policy = SchedulerPolicy::AdversarialPartition {
        groups: vec![vec![pid(0)], vec![pid(1)]],
    };
    for seed in 0..30 {
        let mut e = chain_engine(
            seed,
            2,
            policy.clone(),
            [Bit::One, Bit::Zero, Bit::One],
            false,
        );
        e.run();
        let p0 = e.world().process(pid(0)).unwrap();
        assert!(!p0.heard_all(1, &correct), "seed {seed}");
    }
}

#[test]
fn sync_adapter_connects_every_phase() {
    let correct: BTreeSet<_> = [pid(0), pid(1)].into();
    for seed in 0..30 {
        let mut e = chain_engine(
            seed,
            2,
            SchedulerPolicy::SyncAdapter,
            [Bit::One, Bit::Zero, Bit::One],
            false,
        );
        let rep = e.run();
        assert!(rep.terminated());
        for p in [pid(0), pid(1)] {
            let proc_ = e.world().process(p).unwrap();
            assert!(
                (1..=2).all(|ph| proc_.heard_all(ph, &correct)),
                "seed {seed}"
            );
        }
        assert_eq!(rep.decisions[0], rep.decisions[1]);
    }
}

#[test]
fn sync_adapter_heartbeats_never_falsely_suspect() {
    for seed in 0..30 {
        let cfg = SystemConfig::all_correct(4, 1, seed).with_max_steps(100_000);
        let hosts = (0..4)
            .map(|i| Host::correct(FdProcess::new(pid(i), 4, 1, Some(2)), None))
            .collect();
        let mut e = Engine::new(
            &cfg,
            SchedulerPolicy::SyncAdapter,
            hosts,
            Box::new(NoAdversary),
            TraceMode::Off,
        )
        .unwrap();
        assert!(e.run().terminated());
        for i in 0..4 {
            let p = e.world().process(pid(i)).unwrap();
            assert!(p.history().iter().all(|s| s.is_empty()), "seed {seed}");
        }
    }
}

#[test]
fn two_survivors_with_split_estimates_never_decide() {
    // p2 crashes before sending anything. Each survivor then sees exactly its
    // own Init and the other's, both Echo the empty proposal, and the
    // first-seen fallback keeps (Received) or swaps (External) the two
    // estimates: they stay split in every round.
    for rule in [FirstSeen::External, FirstSeen::Received] {
        for seed in 0..10 {
            let cfg = SystemConfig::with_last_faulty(3, 1, seed).with_max_steps(20_000);
            let inputs = [Bit::One, Bit::Zero, Bit::One];
            let hosts = (0..3)
                .map(|i| {
                    let p = CrashProcess::new(pid(i), 3, 1, inputs[i]).with_first_seen(rule);
                    if i == 2 {
                        Host::hosted(p, Some(inputs[i]), Some(0))
                    } else {
                        Host::correct(p, Some(inputs[i]))
                    }
                })
                .collect();
            let mut e = Engine::new(
                &cfg,
                SchedulerPolicy::Uniform,
                hosts,
                Box::new(NoAdversary),
                TraceMode::Off,
            )
            .unwrap();
            let rep = e.run();
            assert_eq!(rep.outcome, RunOutcome::Horizon);
            assert!(rep.decisions.iter().all(|d| d.is_none()));
            let r0 = e.world().process(pid(0)).unwrap().records();
            let r1 = e.world().process(pid(1)).unwrap().records();
            let both = r0.len().min(r1.len());
            assert!(both > 100);
            for (a, b) in r0.iter().zip(r1).take(both) {
                assert_ne!(a.input, b.input);
                if a.outcome.is_some() && b.outcome.is_some() {
                    assert_eq!(a.rule, Some(Rule::FirstSeen));
                    assert_eq!(b.rule, Some(Rule::FirstSeen));
                }
            }
        }
    }
}
