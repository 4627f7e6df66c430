//! Fault strategies.
//!
//! Honest-mimic and crash faults run the protocol's own code on a hosted
//! process (see [`crate::engine::Role::Hosted`]); everything else is an
//! [`crate::engine::Adversary`] driving controlled processes.

pub mod equivocate;
pub mod naive;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::engine::Adversary;
use crate::types::ProcessId;

pub use equivocate::{ByzEquivocator, ChainEquivocator};
pub use naive::{FinalRound, NaiveAttack, NaiveMsg, NaiveProcess};

/// When a crash-fault process stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrashPoint {
    At(u64),
    /// Uniform over `0..=window` steps, drawn per trial.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdversarySpec {
    /// No faulty process at all.
    None,
    Silent,
    /// Faulty processes run the honest protocol.
    Mimic,
    Crash(CrashPoint),
    Equivocator,
    NaiveAttack {
        target: ProcessId,
    },
}

impl AdversarySpec {
    pub fn name(&self) -> &'static str {
        match self {
            AdversarySpec::None => "none",
            AdversarySpec::Silent => "silent",
            AdversarySpec::Mimic => "mimic",
            AdversarySpec::Crash(_) => "crash",
            AdversarySpec::Equivocator => "equivocator",
            AdversarySpec::NaiveAttack { .. } => "naive_attack",
        }
    }
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversarySpec::Crash(CrashPoint::At(k)) => write!(f, "crash:{k}"),
            AdversarySpec::Crash(CrashPoint::Random) => write!(f, "crash:random"),
            AdversarySpec::NaiveAttack { target } => write!(f, "naive_attack:{}", target.0),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for AdversarySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("none", None) => Ok(AdversarySpec::None),
            ("silent", None) => Ok(AdversarySpec::Silent),
            ("mimic", None) => Ok(AdversarySpec::Mimic),
            ("equivocator", None) => Ok(AdversarySpec::Equivocator),
            ("crash", Some("random")) => Ok(AdversarySpec::Crash(CrashPoint::Random)),
            ("crash", Some(k)) => k
                .parse()
                .map(|k| AdversarySpec::Crash(CrashPoint::At(k)))
                .map_err(|_| format!("bad crash step `{k}`")),
            ("naive_attack", Some(t)) => t
                .trim_start_matches('p')
                .parse()
                .map(|t| AdversarySpec::NaiveAttack {
                    target: ProcessId(t),
                })
                .map_err(|_| format!("bad attack target `{t}`")),
            ("naive_attack", None) => Ok(AdversarySpec::NaiveAttack {
                target: ProcessId(0),
            }),
            _ => Err(format!(
                "unknown adversary `{s}` (expected none|silent|mimic|crash:<step>|crash:random|equivocator|naive_attack:<target>)"
            )),
        }
    }
}

impl Serialize for AdversarySpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AdversarySpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Controlled processes that never send anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl<M> Adversary<M> for Silent {}

/// Split correct processes into two groups by position: even positions get
/// value 0, odd positions value 1.
pub fn equivocation_groups(correct: impl IntoIterator<Item = ProcessId>) -> Vec<(ProcessId, u8)> {
    correct
        .into_iter()
        .enumerate()
        .map(|(i, p)| (p, (i % 2) as u8))
        .collect()
}
