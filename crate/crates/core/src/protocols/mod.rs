//! Consensus protocols and the monitors shared between them.

pub mod byz;
pub mod chain;
pub mod crash;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::types::{Bit, ProcessId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Grade {
    Commit,
    Adopt,
}

/// Result of one graded round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub grade: Grade,
    pub value: Bit,
}

impl RoundOutcome {
    pub fn commit(value: Bit) -> Self {
        RoundOutcome {
            grade: Grade::Commit,
            value,
        }
    }

    pub fn adopt(value: Bit) -> Self {
        RoundOutcome {
            grade: Grade::Adopt,
            value,
        }
    }
}

/// All decided values in `decisions` (restricted to `who`) are equal.
pub fn agreement(decisions: &[Option<Bit>], who: &BTreeSet<ProcessId>) -> bool {
    let mut seen = None;
    for p in who {
        if let Some(v) = decisions.get(p.0).copied().flatten() {
            match seen {
                None => seen = Some(v),
                Some(w) if w != v => return false,
                _ => {}
            }
        }
    }
    true
}

/// If every process in `who` had input `v`, every decision among them is `v`.
pub fn strong_validity(
    inputs: &[Option<Bit>],
    decisions: &[Option<Bit>],
    who: &BTreeSet<ProcessId>,
) -> bool {
    let mut common = None;
    for p in who {
        match (inputs.get(p.0).copied().flatten(), common) {
            (None, _) => return true,
            (Some(v), None) => common = Some(v),
            (Some(v), Some(c)) if v != c => return true,
            _ => {}
        }
    }
    let Some(v) = common else { return true };
    who.iter()
        .all(|p| decisions.get(p.0).copied().flatten().is_none_or(|d| d == v))
}

/// Number of processes in `who` whose estimate is zero.
pub fn markov_state<'a>(estimates: impl IntoIterator<Item = &'a Bit>) -> usize {
    estimates.into_iter().filter(|b| **b == Bit::Zero).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[usize]) -> BTreeSet<ProcessId> {
        ids.iter().map(|&i| ProcessId(i)).collect()
    }

    #[test]
    fn agreement_ignores_undecided_and_outsiders() {
        let d = [Some(Bit::One), None, Some(Bit::One), Some(Bit::Zero)];
        assert!(agreement(&d, &set(&[0, 1, 2])));
        assert!(!agreement(&d, &set(&[0, 3])));
    }

    #[test]
    fn strong_validity_only_binds_unanimous_inputs() {
        let i = [Some(Bit::One), Some(Bit::One), Some(Bit::Zero)];
        let d = [Some(Bit::Zero), Some(Bit::Zero), Some(Bit::Zero)];
        assert!(!strong_validity(&i, &d, &set(&[0, 1])));
        assert!(strong_validity(&i, &d, &set(&[0, 1, 2])));
    }

    #[test]
    fn markov_state_counts_zero_estimates() {
        assert_eq!(markov_state(&[Bit::Zero, Bit::One, Bit::One]), 1);
        assert_eq!(markov_state(&[Bit::Zero; 3]), 3);
        assert_eq!(markov_state(&[Bit::One; 3]), 0);
    }
}
