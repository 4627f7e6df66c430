//! Parallel seeded sweeps and their aggregate report.

use std::collections::BTreeMap;

use rasim_core::{SchedulerPolicy, RNG_ID};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, ExperimentConfig, Protocol};
use crate::stats::{
    bound_check, connectivity_bound, rate, wilson, Verdict, CI_METHOD, SEED_DERIVATION, Z95,
};
use crate::trial::{run_trial, TrialReport};

pub const REPORT_FORMAT: &str = "rasim-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub format: String,
    pub ci_method: String,
    pub z: f64,
    pub rng: String,
    pub seed_derivation: String,
    pub bound_rule: String,
}

impl Default for ReportHeader {
    fn default() -> Self {
        ReportHeader {
            format: REPORT_FORMAT.into(),
            ci_method: CI_METHOD.into(),
            z: Z95,
            rng: RNG_ID.into(),
            seed_derivation: SEED_DERIVATION.into(),
            bound_rule: "pass iff rate <= bound + 3*sqrt(b(1-b)/N), b = min(bound,1)".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub count: u64,
    pub total: u64,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Estimate {
    pub fn new(count: u64, total: u64) -> Self {
        let (ci_lo, ci_hi) = wilson(count, total, Z95);
        Estimate {
            count,
            total,
            rate: rate(count, total),
            ci_lo,
            ci_hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    pub formula: String,
    /// Per-step pair floor used in the formula.
    pub c: Option<f64>,
    pub bound: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    /// Trials where the target counted a faulty final-round message.
    pub condition: u64,
    pub violations_with_condition: u64,
    pub violations_without_condition: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub header: ReportHeader,
    pub config: ExperimentConfig,
    pub trials: u64,
    pub terminated: u64,
    pub violations: Estimate,
    /// Trials on which each monitor fired.
    pub monitors: BTreeMap<String, u64>,
    /// Rounds to decision (or local rounds run) to number of trials.
    pub rounds: BTreeMap<u64, u64>,
    pub max_steps_observed: u64,
    /// Per-phase connectivity failures over all phases of all trials.
    pub connectivity: Option<Estimate>,
    pub bound: Option<BoundComparison>,
    pub attack: Option<AttackSummary>,
    /// SHA-256 over the trial trace hashes in index order.
    pub sweep_hash: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_trial: Vec<TrialReport>,
}

/// Run `cfg.trials` independent trials and aggregate them.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport, ConfigError> {
    cfg.validate()?;
    let trials: Vec<TrialReport> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i))
        .collect();
    Ok(aggregate(cfg, trials))
}

pub fn aggregate(cfg: &ExperimentConfig, trials: Vec<TrialReport>) -> SweepReport {
    let n = trials.len() as u64;
    let mut monitors: BTreeMap<String, u64> = BTreeMap::new();
    let mut rounds = BTreeMap::new();
    let mut hasher = Sha256::new();
    let (mut phases, mut phase_failures) = (0u64, 0u64);
    let mut attack = AttackSummary {
        condition: 0,
        violations_with_condition: 0,
        violations_without_condition: 0,
    };
    let mut any_attack = false;
    for t in &trials {
        for (name, fired) in &t.monitors {
            *monitors.entry(name.clone()).or_default() += u64::from(*fired);
        }
        if let Some(r) = t.rounds {
            *rounds.entry(r).or_default() += 1;
        }
        phases += t.connectivity.len() as u64;
        phase_failures += t.connectivity.iter().filter(|c| !**c).count() as u64;
        if let Some(c) = t.attack_condition {
            any_attack = true;
            if c {
                attack.condition += 1;
                attack.violations_with_condition += u64::from(t.violation);
            } else {
                attack.violations_without_condition += u64::from(t.violation);
            }
        }
        hasher.update(t.trace_hash.as_bytes());
        hasher.update(b"\n");
    }
    let violations = trials.iter().filter(|t| t.violation).count() as u64;
    let connectivity = (cfg.protocol == Protocol::Chain && phases > 0)
        .then(|| Estimate::new(phase_failures, phases));
    let mut report = SweepReport {
        header: ReportHeader::default(),
        config: cfg.clone(),
        trials: n,
        terminated: trials.iter().filter(|t| t.terminated).count() as u64,
        violations: Estimate::new(violations, n),
        monitors,
        rounds,
        max_steps_observed: trials.iter().map(|t| t.steps).max().unwrap_or(0),
        connectivity,
        bound: None,
        attack: any_attack.then_some(attack),
        sweep_hash: rasim_core::trace::hex(&hasher.finalize()),
        per_trial: Vec::new(),
    };
    report.bound = Some(verify_bound(&report, CONNECTIVITY_FORMULA));
    if cfg.per_trial {
        report.per_trial = trials;
    }
    report
}

pub const CONNECTIVITY_FORMULA: &str = "connectivity";

/// Compare the observed per-phase connectivity-failure rate to
/// `n(n-1)(1-C)^{R(n-f)}`.
pub fn verify_bound(report: &SweepReport, formula: &str) -> BoundComparison {
    let cfg = &report.config;
    let inapplicable = |c| BoundComparison {
        formula: formula.to_string(),
        c,
        bound: None,
        verdict: Verdict::Inapplicable,
    };
    if formula != CONNECTIVITY_FORMULA {
        return inapplicable(None);
    }
    let (Some(conn), Some(r)) = (report.connectivity, cfg.rounds) else {
        return inapplicable(None);
    };
    let c = match &cfg.scheduler {
        // The synchronous adapter is not a random draw per step.
        SchedulerPolicy::SyncAdapter | SchedulerPolicy::AdversarialPartition { .. } => None,
        p => p.floor(cfg.n),
    };
    let Some(c) = c else {
        return inapplicable(None);
    };
    let bound = connectivity_bound(cfg.n, cfg.f, r, c);
    BoundComparison {
        formula: formula.to_string(),
        c: Some(c),
        bound: Some(bound),
        verdict: bound_check(conn.count, conn.total, bound),
    }
}

pub const CSV_HEADER: &str =
    "protocol,n,f,R,trials,violations,violation_rate,ci_lo,ci_hi,bound,verdict";

impl SweepReport {
    /// Canonical JSON bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One CSV row (no header). The verdict is the bound verdict when one
    /// applies, else `pass` iff no violation was observed.
    pub fn csv_row(&self) -> String {
        let c = &self.config;
        let (bound, verdict) = match &self.bound {
            Some(BoundComparison {
                bound: Some(b),
                verdict,
                ..
            }) => (format!("{b:.6e}"), verdict.as_str()),
            _ => (
                String::new(),
                if self.violations.count == 0 {
                    "pass"
                } else {
                    "fail"
                },
            ),
        };
        format!(
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{}",
            c.protocol,
            c.n,
            c.f,
            c.rounds_text(),
            self.trials,
            self.violations.count,
            self.violations.rate,
            self.violations.ci_lo,
            self.violations.ci_hi,
            bound,
            verdict
        )
    }
}

pub fn csv(reports: &[SweepReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}
