use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rasim_core::brb::{check_brb, BrbView};
use rasim_core::crypto::RegistrySigner;
use rasim_core::fd::FdProcess;
use rasim_core::protocols::byz::ByzProcess;
use rasim_core::protocols::chain::ChainProcess;
use rasim_core::protocols::crash::CrashProcess;
use rasim_core::trace::check_integrity;
use rasim_core::{
    Bit, Engine, Host, NoAdversary, ProcessId, Rng, Scheduler, SchedulerPolicy, SignatureRegistry,
    SignedValue, Signer, SystemConfig, TraceMode,
};

fn bits(mask: u8, n: usize) -> Vec<Bit> {
    (0..n)
        .map(|i| {
            if mask >> i & 1 == 1 {
                Bit::One
            } else {
                Bit::Zero
            }
        })
        .collect()
}

fn policy() -> impl Strategy<Value = SchedulerPolicy> {
    prop_oneof![
        Just(SchedulerPolicy::Uniform),
        Just(SchedulerPolicy::WeightedMin { eps: None }),
        Just(SchedulerPolicy::SyncAdapter),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn crash_trace_is_fifo_and_complete(seed in any::<u64>(), mask in 0u8..8, crash in 0u64..60, pol in policy()) {
        let inputs = bits(mask, 3);
        let cfg = SystemConfig::with_last_faulty(3, 1, seed).with_max_steps(3_000);
        let hosts = (0..3)
            .map(|i| {
                let p = CrashProcess::new(ProcessId(i), 3, 1, inputs[i]).with_max_rounds(3);
                if i == 2 {
                    Host::hosted(p, Some(inputs[i]), Some(crash))
                } else {
                    Host::correct(p, Some(inputs[i]))
                }
            })
            .collect();
        let mut e = Engine::new(&cfg, pol, hosts, Box::new(NoAdversary), TraceMode::Full).unwrap();
        e.run();
        let quiescent = e.drain(100_000);
        prop_assert!(quiescent);
        prop_assert_eq!(check_integrity(e.world().trace().records(), true), Ok(()));
    }

    #[test]
    fn byz_brb_properties_hold(seed in any::<u64>(), mask in 0u8..16) {
        let inputs = bits(mask, 4);
        let cfg = SystemConfig::all_correct(4, 1, seed).with_max_steps(100_000);
        let hosts = (0..4)
            .map(|i| Host::correct(ByzProcess::new(ProcessId(i), 4, 1, inputs[i]), Some(inputs[i])))
            .collect();
        let mut e = Engine::new(&cfg, SchedulerPolicy::Uniform, hosts, Box::new(NoAdversary), TraceMode::Off).unwrap();
        prop_assert!(e.run().terminated());
        prop_assert!(e.drain(1_000_000));
        let views: Vec<_> = (0..4)
            .map(|i| {
                let brb = e.world().process(ProcessId(i)).unwrap().brb();
                BrbView { process: ProcessId(i), broadcasts: brb.own_broadcasts(), deliveries: brb.delivery_log() }
            })
            .collect();
        let v = check_brb(&views);
        prop_assert!(v.all(), "{:?}", v.failures());
        for view in &views {
            let keys: BTreeSet<_> = view.deliveries.iter().map(|(k, _)| k).collect();
            prop_assert_eq!(keys.len(), view.deliveries.len());
        }
    }

    #[test]
    fn draw_returns_a_pending_pair(seed in any::<u64>(), set in prop::collection::btree_set((0usize..4, 0usize..4), 1..12), pol in policy()) {
        let pending: Vec<_> = set.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (ProcessId(a), ProcessId(b))).collect();
        prop_assume!(!pending.is_empty());
        let mut s = Scheduler::new(pol.clone(), 4);
        let mut rng = Rng::seed_from_u64(seed);
        for _ in 0..20 {
            prop_assert!(s.draw(&pending, &mut rng) < pending.len());
        }
        let d = s.distribution(&pending);
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let floor = pol.floor(4).unwrap();
        prop_assert!(d.iter().all(|p| *p + 1e-12 >= floor));
    }

    #[test]
    fn accepted_entries_are_never_overwritten(
        batches in prop::collection::vec(prop::collection::vec((any::<bool>(), prop::collection::vec(0usize..3, 1..4), any::<bool>()), 1..6), 1..6)
    ) {
        let me = ProcessId(0);
        let mut reg = SignatureRegistry::new();
        let mut p = ChainProcess::new(me, 3, 1, 2, Bit::One);
        let mut seen: BTreeMap<ProcessId, SignedValue> = BTreeMap::new();
        for batch in batches {
            let mut values = Vec::new();
            for (bit, signers, forge) in batch {
                let value = if bit { Bit::One } else { Bit::Zero };
                let mut chain: Vec<ProcessId> = Vec::new();
                for s in signers.into_iter().map(|s| ProcessId(s + 1).min(ProcessId(2))) {
                    if !chain.contains(&s) {
                        chain.push(s);
                    }
                }
                let sv = if forge {
                    SignedValue { value, chain }
                } else {
                    let mut sv = RegistrySigner::new(chain[0], &mut reg).sign_value(value);
                    for s in &chain[1..] {
                        sv = RegistrySigner::new(*s, &mut reg).sign(&sv).unwrap();
                    }
                    sv
                };
                values.push(sv);
            }
            let mut signer = RegistrySigner::new(me, &mut reg);
            p.try_accept(&values, &mut signer);
            for (o, sv) in &seen {
                prop_assert_eq!(p.accepted().get(o), Some(sv));
            }
            for (o, sv) in p.accepted() {
                prop_assert!(signer.verify(sv));
                prop_assert_eq!(sv.origin(), Some(*o));
                prop_assert_eq!(sv.chain.last(), Some(&me));
            }
            prop_assert_eq!(p.acceptances().len(), p.accepted().len());
            seen = p.accepted().clone();
        }
    }

    #[test]
    fn crashed_process_stays_suspected(seed in any::<u64>(), w in 1u64..6) {
        let cfg = SystemConfig::with_last_faulty(4, 1, seed).with_max_steps(200_000);
        let hosts = (0..4)
            .map(|i| {
                let p = FdProcess::new(ProcessId(i), 4, 1, Some(w));
                if i == 3 { Host::hosted(p, None, Some(0)) } else { Host::correct(p, None) }
            })
            .collect();
        let mut e = Engine::new(&cfg, SchedulerPolicy::Uniform, hosts, Box::new(NoAdversary), TraceMode::Off).unwrap();
        prop_assert!(e.run().terminated());
        for i in 0..3 {
            let h = e.world().process(ProcessId(i)).unwrap().history();
            let first = h.iter().position(|s| s.contains(&ProcessId(3)));
            prop_assert!(first.is_some());
            prop_assert!(h[first.unwrap()..].iter().all(|s| s.contains(&ProcessId(3))));
            prop_assert!(h.iter().all(|s| !s.contains(&ProcessId(i))));
        }
    }
}
