//! Deterministic simulator for the random asynchronous network model.
//!
//! The engine keeps one FIFO queue per ordered process pair and, at every
//! step, asks a [`scheduler::Scheduler`] to draw one pair with pending
//! traffic; the head envelope of that queue is delivered. Protocols are
//! deterministic state machines implementing [`engine::Process`]; faulty
//! processes are driven by an [`engine::Adversary`].

pub mod adversary;
pub mod brb;
pub mod crypto;
pub mod engine;
pub mod error;
pub mod fd;
pub mod protocols;
pub mod scheduler;
pub mod trace;
pub mod types;

pub use crypto::{SignatureRegistry, SignedValue, Signer};
pub use engine::{
    Adversary, AdversaryContext, Context, Engine, Envelope, Host, NoAdversary, Process, Role,
    RunOutcome, RunReport, World,
};
pub use error::{ConfigError, CryptoError, SimError};
pub use scheduler::{Scheduler, SchedulerPolicy};
pub use trace::{Trace, TraceMode};
pub use types::{majority, Bit, LogicalTime, ProcessId, SystemConfig};

/// Identifier of the pseudo-random generator, recorded in every trace header.
pub const RNG_ID: &str = "chacha8";

pub type Rng = rand_chacha::ChaCha8Rng;
