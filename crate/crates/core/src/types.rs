//! Identifiers, binary values and system configuration shared by every module.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Dense process identifier in `[0, n)`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ProcessId(pub usize);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// All ids of an `n`-process system, in order.
pub fn all_processes(n: usize) -> impl Iterator<Item = ProcessId> {
    (0..n).map(ProcessId)
}

/// A binary consensus value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn as_u8(self) -> u8 {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }

    pub fn flip(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }

    pub fn from_u8(v: u8) -> Option<Bit> {
        match v {
            0 => Some(Bit::Zero),
            1 => Some(Bit::One),
            _ => None,
        }
    }
}

impl From<bool> for Bit {
    fn from(b: bool) -> Self {
        if b {
            Bit::One
        } else {
            Bit::Zero
        }
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Strict majority of a multiset of bits; ties resolve to zero.
pub fn majority<'a>(values: impl IntoIterator<Item = &'a Bit>) -> Bit {
    let (mut zeros, mut ones) = (0usize, 0usize);
    for v in values {
        match v {
            Bit::Zero => zeros += 1,
            Bit::One => ones += 1,
        }
    }
    Bit::from(ones > zeros)
}

/// Number of delivery events so far. One network delivery advances it by one.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct LogicalTime(pub u64);

pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

/// Static parameters of one simulated run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n: usize,
    pub f: usize,
    pub correct: BTreeSet<ProcessId>,
    pub max_steps: u64,
    pub seed: u64,
}

impl SystemConfig {
    /// Every process correct.
    pub fn all_correct(n: usize, f: usize, seed: u64) -> Self {
        SystemConfig {
            n,
            f,
            correct: all_processes(n).collect(),
            max_steps: DEFAULT_MAX_STEPS,
            seed,
        }
    }

    /// The last `f` processes faulty, the rest correct.
    pub fn with_last_faulty(n: usize, f: usize, seed: u64) -> Self {
        SystemConfig {
            n,
            f,
            correct: (0..n.saturating_sub(f)).map(ProcessId).collect(),
            max_steps: DEFAULT_MAX_STEPS,
            seed,
        }
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn faulty(&self) -> BTreeSet<ProcessId> {
        all_processes(self.n)
            .filter(|p| !self.correct.contains(p))
            .collect()
    }

    pub fn is_correct(&self, p: ProcessId) -> bool {
        self.correct.contains(&p)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::NoProcesses);
        }
        if self.max_steps == 0 {
            return Err(ConfigError::ZeroHorizon);
        }
        if let Some(p) = self.correct.iter().find(|p| p.0 >= self.n) {
            return Err(ConfigError::UnknownProcess(*p));
        }
        if self.correct.len() + self.f < self.n {
            return Err(ConfigError::TooManyFaulty {
                n: self.n,
                f: self.f,
                correct: self.correct.len(),
            });
        }
        Ok(())
    }
}
