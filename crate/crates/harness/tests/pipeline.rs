use rasim_core::adversary::{AdversarySpec, CrashPoint};
use rasim_core::{Bit, ProcessId, TraceMode};
use rasim_harness::audit::audit_trace;
use rasim_harness::sweep::CONNECTIVITY_FORMULA;
use rasim_harness::trial::{
    AGREEMENT, ECHO_UNIQUENESS, ROUND_CONSISTENCY, ROUND_INTEGRITY, ROUND_STRONG_VALIDITY,
    STRONG_VALIDITY, UNIFORM_AGREEMENT, VALIDITY,
};
use rasim_harness::{
    run_sweep, run_trial_traced, trial_seed, verify_bound, ExperimentConfig, InputSpec, Protocol,
    SweepReport, Verdict,
};
use sha2::{Digest, Sha256};

fn base(protocol: Protocol, n: usize, f: usize) -> ExperimentConfig {
    ExperimentConfig {
        protocol,
        n,
        f,
        trials: 40,
        trace: TraceMode::Full,
        ..Default::default()
    }
}

#[test]
fn trace_audit_agrees_with_runtime_monitors() {
    let configs = [
        ExperimentConfig {
            adversary: AdversarySpec::Equivocator,
            ..base(Protocol::Byz3f1, 4, 1)
        },
        ExperimentConfig {
            adversary: AdversarySpec::Equivocator,
            rounds: Some(4),
            ..base(Protocol::Chain, 3, 1)
        },
        ExperimentConfig {
            adversary: AdversarySpec::NaiveAttack {
                target: ProcessId(0),
            },
            inputs: InputSpec::All(Bit::One),
            rounds: Some(2),
            ..base(Protocol::Naive, 3, 1)
        },
        ExperimentConfig {
            adversary: AdversarySpec::Crash(CrashPoint::Random),
            max_steps: 20_000,
            ..base(Protocol::Crash, 3, 1)
        },
    ];
    let mut disagreements_seen = 0;
    for cfg in &configs {
        cfg.validate().unwrap();
        for i in 0..cfg.trials {
            let (t, trace) = run_trial_traced(cfg, i);
            let a = audit_trace(&trace.export()).unwrap();
            assert_eq!(a.integrity, Ok(()));
            assert_eq!(a.decisions, t.decisions, "{} trial {i}", cfg.protocol);
            assert!(!a.double_decide);
            if let Some(fired) = t.monitors.get(AGREEMENT) {
                assert_eq!(a.agreement, !fired);
                disagreements_seen += u32::from(*fired);
            }
            if let Some(fired) = t.monitors.get(STRONG_VALIDITY) {
                assert_eq!(a.strong_validity, !fired);
            }
            if let Some(fired) = t.monitors.get(VALIDITY) {
                assert_eq!(a.validity, !fired);
            }
            if let Some(fired) = t.monitors.get(UNIFORM_AGREEMENT) {
                assert_eq!(a.uniform_agreement, !fired);
            }
        }
    }
    // The chain equivocator and the naive attack both produce some.
    assert!(disagreements_seen > 0);
}

#[test]
fn failure_free_crash_sweep_never_fires_round_monitors() {
    let cfg = ExperimentConfig {
        adversary: AdversarySpec::None,
        trials: 300,
        trace: TraceMode::Hash,
        ..base(Protocol::Crash, 3, 1)
    };
    let r = run_sweep(&cfg).unwrap();
    assert_eq!(r.terminated, r.trials);
    for m in [
        ROUND_INTEGRITY,
        ROUND_STRONG_VALIDITY,
        ECHO_UNIQUENESS,
        ROUND_CONSISTENCY,
    ] {
        assert_eq!(r.monitors.get(m), Some(&0), "{m}");
    }
}

#[test]
fn report_round_trips_and_rechecks_its_bound() {
    let cfg = ExperimentConfig {
        adversary: AdversarySpec::Mimic,
        rounds: Some(8),
        trials: 200,
        trace: TraceMode::Hash,
        ..base(Protocol::Chain, 3, 1)
    };
    let r = run_sweep(&cfg).unwrap();
    let back: SweepReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
    let b = verify_bound(&back, CONNECTIVITY_FORMULA);
    assert_eq!(Some(&b), r.bound.as_ref());
    // 6 (5/6)^16 at C = 1/6, R = 8, n - f = 2.
    let expected = 6.0 * (5.0f64 / 6.0).powi(16);
    assert!((b.bound.unwrap() - expected).abs() < 1e-12);
    assert!((b.c.unwrap() - 1.0 / 6.0).abs() < 1e-15);
    assert_eq!(b.verdict, Verdict::Pass);
}

#[test]
fn trial_seeds_follow_the_published_derivation() {
    for (base, idx) in [(0u64, 0u64), (7, 3), (u64::MAX, 12345)] {
        let mut h = Sha256::new();
        h.update(base.to_le_bytes());
        h.update(idx.to_le_bytes());
        let d = h.finalize();
        let want = u64::from_le_bytes(d[..8].try_into().unwrap());
        assert_eq!(trial_seed(base, idx), want);
    }
}

#[test]
fn sweep_hash_chains_trial_hashes_in_order() {
    let cfg = ExperimentConfig {
        trials: 25,
        per_trial: true,
        trace: TraceMode::Hash,
        ..base(Protocol::Byz3f1, 4, 1)
    };
    let r = run_sweep(&cfg).unwrap();
    let mut h = Sha256::new();
    for t in &r.per_trial {
        h.update(t.trace_hash.as_bytes());
        h.update(b"\n");
    }
    let want: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(r.sweep_hash, want);
}
