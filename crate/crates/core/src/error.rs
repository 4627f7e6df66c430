use thiserror::Error;

use crate::types::ProcessId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("a system needs at least one process")]
    NoProcesses,
    #[error("max_steps must be positive")]
    ZeroHorizon,
    #[error("process {0} is outside the system")]
    UnknownProcess(ProcessId),
    #[error("n={n}, f={f} but only {correct} processes are correct")]
    TooManyFaulty { n: usize, f: usize, correct: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("{signer} already signed this chain")]
    DuplicateSigner { signer: ProcessId },
    #[error("{signer} is not controlled by the caller")]
    Forgery { signer: ProcessId },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("correct process {0} cannot inject messages")]
    CorrectInjection(ProcessId),
    #[error("adversary does not control {0}")]
    NotControlled(ProcessId),
    #[error("process {0} is outside the system")]
    UnknownProcess(ProcessId),
    #[error("self-addressed injection from {0}")]
    SelfInjection(ProcessId),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
