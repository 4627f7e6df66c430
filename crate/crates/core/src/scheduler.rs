//! Pair-drawing policies.
//!
//! Every policy sees only the set of pending pairs and a random source. The
//! payloads and queue depths are never visible here, so the number of
//! messages waiting on a link cannot bias the draw.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::types::ProcessId;
use crate::Rng;

pub type Pair = (ProcessId, ProcessId);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchedulerPolicy {
    /// Uniform over pending pairs.
    #[default]
    Uniform,
    /// Fixed per-pair weights mixed with a uniform floor `eps`.
    /// `eps = None` uses `1/(2n(n-1))`.
    WeightedMin { eps: Option<f64> },
    /// Synchronous adapter: a fresh uniform permutation of the pending links
    /// is drawn, then each link's head is delivered in that order.
    SyncAdapter,
    /// Model-violating baseline. Never delivers between two correct
    /// processes in different groups while any other pair is pending.
    AdversarialPartition { groups: Vec<Vec<ProcessId>> },
}

impl SchedulerPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerPolicy::Uniform => "uniform",
            SchedulerPolicy::WeightedMin { .. } => "weighted",
            SchedulerPolicy::SyncAdapter => "sync",
            SchedulerPolicy::AdversarialPartition { .. } => "partition",
        }
    }

    /// Whether the policy satisfies the per-pair probability floor.
    pub fn model_conforming(&self) -> bool {
        !matches!(self, SchedulerPolicy::AdversarialPartition { .. })
    }

    /// Guaranteed lower bound on the probability that a given pending pair
    /// is drawn at a step, for an `n`-process system.
    pub fn floor(&self, n: usize) -> Option<f64> {
        let pairs = (n * n.saturating_sub(1)) as f64;
        if pairs == 0.0 {
            return None;
        }
        match self {
            SchedulerPolicy::Uniform => Some(1.0 / pairs),
            SchedulerPolicy::WeightedMin { eps } => Some(eps.unwrap_or(1.0 / (2.0 * pairs))),
            SchedulerPolicy::SyncAdapter => Some(1.0 / (n * n) as f64),
            SchedulerPolicy::AdversarialPartition { .. } => None,
        }
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerPolicy::WeightedMin { eps: Some(e) } => write!(f, "weighted(eps={e})"),
            SchedulerPolicy::AdversarialPartition { groups } => {
                write!(f, "partition(")?;
                for (i, g) in groups.iter().enumerate() {
                    if i > 0 {
                        write!(f, "|")?;
                    }
                    let ids: Vec<String> = g.iter().map(|p| p.0.to_string()).collect();
                    write!(f, "{}", ids.join(","))?;
                }
                write!(f, ")")
            }
            other => f.write_str(other.name()),
        }
    }
}

/// Base weight of a pair under `WeightedMin`; deliberately non-uniform.
fn base_weight(n: usize, (p, q): Pair) -> f64 {
    1.0 + (p.0 * n + q.0) as f64
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    policy: SchedulerPolicy,
    n: usize,
    group_of: Vec<Option<usize>>,
    batch: VecDeque<Pair>,
}

impl Scheduler {
    pub fn new(policy: SchedulerPolicy, n: usize) -> Self {
        let mut group_of = vec![None; n];
        if let SchedulerPolicy::AdversarialPartition { groups } = &policy {
            for (g, members) in groups.iter().enumerate() {
                for p in members {
                    if p.0 < n {
                        group_of[p.0] = Some(g);
                    }
                }
            }
        }
        Scheduler {
            policy,
            n,
            group_of,
            batch: VecDeque::new(),
        }
    }

    pub fn policy(&self) -> &SchedulerPolicy {
        &self.policy
    }

    /// Draw one of `pending`, which must be nonempty, sorted and duplicate
    /// free. Returns an index into `pending`.
    pub fn draw(&mut self, pending: &[Pair], rng: &mut Rng) -> usize {
        assert!(!pending.is_empty(), "draw from an empty pending set");
        match &self.policy {
            SchedulerPolicy::Uniform => rng.random_range(0..pending.len()),
            SchedulerPolicy::WeightedMin { eps } => {
                let k = pending.len() as f64;
                let pairs = (self.n * (self.n - 1)).max(1) as f64;
                let eps = eps.unwrap_or(1.0 / (2.0 * pairs)).clamp(0.0, 1.0 / k);
                let total: f64 = pending.iter().map(|&pr| base_weight(self.n, pr)).sum();
                let mut u: f64 = rng.random::<f64>();
                for (i, &pr) in pending.iter().enumerate() {
                    let p = eps + (1.0 - k * eps) * base_weight(self.n, pr) / total;
                    if u < p {
                        return i;
                    }
                    u -= p;
                }
                pending.len() - 1
            }
            SchedulerPolicy::SyncAdapter => loop {
                match self.batch.pop_front() {
                    Some(pair) => {
                        if let Ok(i) = pending.binary_search(&pair) {
                            return i;
                        }
                    }
                    None => {
                        let mut links = pending.to_vec();
                        links.shuffle(rng);
                        self.batch = links.into();
                    }
                }
            },
            SchedulerPolicy::AdversarialPartition { .. } => {
                let allowed: Vec<usize> = (0..pending.len())
                    .filter(|&i| !self.cross_group(pending[i]))
                    .collect();
                if allowed.is_empty() {
                    rng.random_range(0..pending.len())
                } else {
                    allowed[rng.random_range(0..allowed.len())]
                }
            }
        }
    }

    fn cross_group(&self, (p, q): Pair) -> bool {
        match (self.group_of[p.0], self.group_of[q.0]) {
            (Some(a), Some(b)) => a != b,
            _ => false,
        }
    }

    /// Probability that each pending pair is drawn next, ignoring any
    /// in-progress synchronous batch.
    pub fn distribution(&self, pending: &[Pair]) -> Vec<f64> {
        let k = pending.len();
        if k == 0 {
            return Vec::new();
        }
        match &self.policy {
            SchedulerPolicy::Uniform | SchedulerPolicy::SyncAdapter => vec![1.0 / k as f64; k],
            SchedulerPolicy::WeightedMin { eps } => {
                let kf = k as f64;
                let pairs = (self.n * (self.n - 1)).max(1) as f64;
                let eps = eps.unwrap_or(1.0 / (2.0 * pairs)).clamp(0.0, 1.0 / kf);
                let total: f64 = pending.iter().map(|&pr| base_weight(self.n, pr)).sum();
                pending
                    .iter()
                    .map(|&pr| eps + (1.0 - kf * eps) * base_weight(self.n, pr) / total)
                    .collect()
            }
            SchedulerPolicy::AdversarialPartition { .. } => {
                let allowed: Vec<bool> = pending.iter().map(|&pr| !self.cross_group(pr)).collect();
                let m = allowed.iter().filter(|a| **a).count();
                if m == 0 {
                    vec![1.0 / k as f64; k]
                } else {
                    allowed
                        .iter()
                        .map(|&a| if a { 1.0 / m as f64 } else { 0.0 })
                        .collect()
                }
            }
        }
    }
}
