//! Experiment configuration, validation and the key=value file format.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rasim_core::adversary::{AdversarySpec, CrashPoint};
use rasim_core::{Bit, ProcessId, SchedulerPolicy, TraceMode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Byz3f1,
    Chain,
    Crash,
    Naive,
    Fd,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Byz3f1 => "byz3f1",
            Protocol::Chain => "chain",
            Protocol::Crash => "crash",
            Protocol::Naive => "naive",
            Protocol::Fd => "fd",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "byz3f1" => Ok(Protocol::Byz3f1),
            "chain" => Ok(Protocol::Chain),
            "crash" => Ok(Protocol::Crash),
            "naive" => Ok(Protocol::Naive),
            "fd" => Ok(Protocol::Fd),
            other => Err(format!(
                "unknown protocol `{other}` (byz3f1|chain|crash|naive|fd)"
            )),
        }
    }
}

/// How process inputs are chosen.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum InputSpec {
    All(Bit),
    List(Vec<Bit>),
    /// Process `i` gets `i mod 2`.
    Alternating,
    /// Independent fair bits per process, drawn per trial.
    Random,
}

impl fmt::Display for InputSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSpec::All(b) => write!(f, "all:{b}"),
            InputSpec::List(v) => {
                let s: Vec<String> = v.iter().map(|b| b.to_string()).collect();
                f.write_str(&s.join(","))
            }
            InputSpec::Alternating => f.write_str("alternating"),
            InputSpec::Random => f.write_str("random"),
        }
    }
}

fn parse_bit(s: &str) -> Result<Bit, String> {
    match s.trim() {
        "0" => Ok(Bit::Zero),
        "1" => Ok(Bit::One),
        other => Err(format!("`{other}` is not a binary value")),
    }
}

impl FromStr for InputSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        match s {
            "alternating" => Ok(InputSpec::Alternating),
            "random" => Ok(InputSpec::Random),
            _ => {
                if let Some(v) = s.strip_prefix("all:") {
                    return parse_bit(v).map(InputSpec::All);
                }
                s.split(',')
                    .map(parse_bit)
                    .collect::<Result<Vec<_>, _>>()
                    .map(InputSpec::List)
                    .map_err(|e| format!("bad inputs `{s}`: {e}"))
            }
        }
    }
}

impl Serialize for InputSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InputSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

pub fn parse_scheduler(s: &str) -> Result<SchedulerPolicy, String> {
    let s = s.trim();
    let (head, arg) = match s.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (s, None),
    };
    match (head, arg) {
        ("uniform", None) => Ok(SchedulerPolicy::Uniform),
        ("weighted", None) => Ok(SchedulerPolicy::WeightedMin { eps: None }),
        ("weighted", Some(e)) => e
            .parse::<f64>()
            .map(|e| SchedulerPolicy::WeightedMin { eps: Some(e) })
            .map_err(|_| format!("bad eps `{e}`")),
        ("sync", None) => Ok(SchedulerPolicy::SyncAdapter),
        ("partition", arg) => {
            let spec = arg.unwrap_or("0|1");
            let groups = spec
                .split('|')
                .map(|g| {
                    g.split(',')
                        .map(|p| p.trim().trim_start_matches('p').parse().map(ProcessId))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| format!("bad partition groups `{spec}`"))?;
            Ok(SchedulerPolicy::AdversarialPartition { groups })
        }
        _ => Err(format!(
            "unknown scheduler `{s}` (uniform|weighted[:eps]|sync|partition[:0,..|1,..])"
        )),
    }
}

pub fn scheduler_text(p: &SchedulerPolicy) -> String {
    match p {
        SchedulerPolicy::Uniform => "uniform".into(),
        SchedulerPolicy::WeightedMin { eps: None } => "weighted".into(),
        SchedulerPolicy::WeightedMin { eps: Some(e) } => format!("weighted:{e}"),
        SchedulerPolicy::SyncAdapter => "sync".into(),
        SchedulerPolicy::AdversarialPartition { groups } => {
            let g: Vec<String> = groups
                .iter()
                .map(|g| {
                    g.iter()
                        .map(|p| p.0.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect();
            format!("partition:{}", g.join("|"))
        }
    }
}

mod scheduler_serde {
    use super::*;
    pub fn serialize<S: serde::Serializer>(p: &SchedulerPolicy, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&scheduler_text(p))
    }
    pub fn deserialize<'de, D: serde::Deserializer<'de>>(
        d: D,
    ) -> Result<SchedulerPolicy, D::Error> {
        parse_scheduler(&String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_CRASH_WINDOW: u64 = 500;
pub const DEFAULT_DRAIN_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub n: usize,
    pub f: usize,
    /// Rounds per phase (chain), final round (naive) or suspicion window
    /// (fd; absent means infinite).
    #[serde(rename = "R")]
    pub rounds: Option<u32>,
    #[serde(with = "scheduler_serde")]
    pub scheduler: SchedulerPolicy,
    pub adversary: AdversarySpec,
    pub inputs: InputSpec,
    pub trials: u64,
    pub seed: u64,
    pub max_steps: u64,
    pub trace: TraceMode,
    /// Upper end of the uniform crash-step draw for `crash:random`.
    pub crash_window: u64,
    /// Extra steps allowed to drain broadcast traffic for liveness monitors.
    pub drain_cap: u64,
    /// Keep per-trial records in the report.
    pub per_trial: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            protocol: Protocol::Byz3f1,
            n: 4,
            f: 1,
            rounds: None,
            scheduler: SchedulerPolicy::Uniform,
            adversary: AdversarySpec::Silent,
            inputs: InputSpec::Random,
            trials: 100,
            seed: 0,
            max_steps: rasim_core::types::DEFAULT_MAX_STEPS,
            trace: TraceMode::Hash,
            crash_window: DEFAULT_CRASH_WINDOW,
            drain_cap: DEFAULT_DRAIN_CAP,
            per_trial: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{protocol} needs {need}, got n={n}, f={f}")]
    Resilience {
        protocol: Protocol,
        need: &'static str,
        n: usize,
        f: usize,
    },
    #[error("{0} requires R")]
    MissingRounds(Protocol),
    #[error("adversary {adversary} is not supported by {protocol}")]
    Adversary {
        adversary: AdversarySpec,
        protocol: Protocol,
    },
    #[error("{0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let (n, f, p) = (self.n, self.f, self.protocol);
        if n == 0 {
            return Err(ConfigError::Invalid("n must be at least 1".into()));
        }
        if f >= n {
            return Err(ConfigError::Invalid(format!("f={f} must be below n={n}")));
        }
        if self.max_steps == 0 {
            return Err(ConfigError::Invalid("max_steps must be positive".into()));
        }
        let resilience = |ok: bool, need| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Resilience {
                    protocol: p,
                    need,
                    n,
                    f,
                })
            }
        };
        match p {
            Protocol::Byz3f1 => resilience(n == 3 * f + 1, "n = 3f+1")?,
            Protocol::Chain => resilience(n >= f + 2, "n >= f+2")?,
            Protocol::Crash => resilience(n == 2 * f + 1, "n = 2f+1")?,
            Protocol::Naive => resilience(n <= 2 * f + 1 && n > f, "f < n <= 2f+1")?,
            Protocol::Fd => resilience(n > f, "n > f")?,
        }
        if matches!(p, Protocol::Chain | Protocol::Naive) {
            match self.rounds {
                None => return Err(ConfigError::MissingRounds(p)),
                Some(0) if p == Protocol::Chain => {
                    return Err(ConfigError::Invalid("R must be at least 1".into()))
                }
                _ => {}
            }
        }
        if matches!(p, Protocol::Crash | Protocol::Fd)
            && self.rounds == Some(0)
            && p == Protocol::Fd
        {
            return Err(ConfigError::Invalid("window R must be at least 1".into()));
        }
        let adv_ok = match self.adversary {
            AdversarySpec::None | AdversarySpec::Silent | AdversarySpec::Mimic => true,
            AdversarySpec::Crash(_) => true,
            AdversarySpec::Equivocator => matches!(p, Protocol::Byz3f1 | Protocol::Chain),
            AdversarySpec::NaiveAttack { target } => {
                matches!(p, Protocol::Naive | Protocol::Chain) && f >= 1 && target.0 < n - f
            }
        };
        if !adv_ok {
            return Err(ConfigError::Adversary {
                adversary: self.adversary,
                protocol: p,
            });
        }
        if let AdversarySpec::Crash(CrashPoint::Random) = self.adversary {
            if self.crash_window == u64::MAX {
                return Err(ConfigError::Invalid("crash_window too large".into()));
            }
        }
        if let InputSpec::List(v) = &self.inputs {
            if v.len() != n {
                return Err(ConfigError::Invalid(format!(
                    "{} inputs listed for n={n}",
                    v.len()
                )));
            }
        }
        if let SchedulerPolicy::WeightedMin { eps: Some(e) } = self.scheduler {
            if !(e > 0.0 && e.is_finite()) {
                return Err(ConfigError::Invalid(format!(
                    "weighted eps {e} must be positive"
                )));
            }
        }
        Ok(())
    }

    /// Ids of faulty processes: none without an adversary, else the last f.
    pub fn faulty(&self) -> Vec<ProcessId> {
        if self.adversary == AdversarySpec::None {
            Vec::new()
        } else {
            (self.n - self.f..self.n).map(ProcessId).collect()
        }
    }

    pub fn rounds_text(&self) -> String {
        match self.rounds {
            Some(r) => r.to_string(),
            None if self.protocol == Protocol::Fd => "inf".into(),
            None => String::new(),
        }
    }

    /// Apply one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        let num = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| format!("`{key}`: bad number `{v}`"))
        };
        match key.trim() {
            "protocol" => self.protocol = v.parse()?,
            "n" => self.n = num(v)? as usize,
            "f" => self.f = num(v)? as usize,
            "R" | "r" | "rounds" => {
                self.rounds = if v == "inf" || v.is_empty() {
                    None
                } else {
                    Some(num(v)? as u32)
                }
            }
            "scheduler" => self.scheduler = parse_scheduler(v)?,
            "adversary" => self.adversary = v.parse()?,
            "fault_model" => {
                if v != "crash" && v != "byzantine" {
                    return Err(format!("unknown fault_model `{v}`"));
                }
            }
            "inputs" => self.inputs = v.parse()?,
            "trials" => self.trials = num(v)?,
            "seed" => self.seed = num(v)?,
            "max_steps" => self.max_steps = num(v)?,
            "trace" => {
                self.trace = match v {
                    "off" => TraceMode::Off,
                    "hash" => TraceMode::Hash,
                    "full" => TraceMode::Full,
                    _ => return Err(format!("unknown trace mode `{v}`")),
                }
            }
            "crash_window" => self.crash_window = num(v)?,
            "drain_cap" => self.drain_cap = num(v)?,
            "per_trial" => self.per_trial = matches!(v, "1" | "true" | "yes"),
            other => return Err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// Parse a key=value file: one setting per line, `#` comments.
    pub fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            self.set(k, v).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    /// The settings as key=value lines; `apply_file` of this text
    /// reproduces the config.
    pub fn to_kv(&self) -> String {
        let mut m = BTreeMap::new();
        m.insert("protocol", self.protocol.to_string());
        m.insert("n", self.n.to_string());
        m.insert("f", self.f.to_string());
        m.insert(
            "R",
            self.rounds
                .map(|r| r.to_string())
                .unwrap_or_else(|| "inf".into()),
        );
        m.insert("scheduler", scheduler_text(&self.scheduler));
        m.insert("adversary", self.adversary.to_string());
        m.insert("inputs", self.inputs.to_string());
        m.insert("trials", self.trials.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("max_steps", self.max_steps.to_string());
        m.insert(
            "trace",
            match self.trace {
                TraceMode::Off => "off",
                TraceMode::Hash => "hash",
                TraceMode::Full => "full",
            }
            .into(),
        );
        m.insert("crash_window", self.crash_window.to_string());
        m.insert("drain_cap", self.drain_cap.to_string());
        m.insert("per_trial", self.per_trial.to_string());
        m.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}
