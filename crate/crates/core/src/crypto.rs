//! Simulated unforgeable signatures.
//!
//! Nothing here is cryptography. Every signing call is logged in a per-run
//! [`SignatureRegistry`]; verification succeeds only for statements that
//! appear in that log. Correct processes reach the registry exclusively
//! through a [`Signer`] bound to their own id, and adversaries through a
//! context that checks the signer against the controlled set, so a correct
//! id can never be forged.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::CryptoError;
use crate::types::{Bit, ProcessId};

const CHAIN_DOMAIN: u64 = 0;
const STATEMENT_DOMAIN: u64 = 1;

/// A binary value carrying an ordered chain of distinct signers.
/// The first signer is the origin.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignedValue {
    pub value: Bit,
    pub chain: Vec<ProcessId>,
}

impl SignedValue {
    pub fn origin(&self) -> Option<ProcessId> {
        self.chain.first().copied()
    }

    /// Number of distinct signers on the chain.
    pub fn signature_count(&self) -> usize {
        let mut seen: Vec<ProcessId> = self.chain.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn signed_by(&self, p: ProcessId) -> bool {
        self.chain.contains(&p)
    }
}

/// Log of every signing call made during one run.
#[derive(Debug, Clone, Default)]
pub struct SignatureRegistry {
    entries: HashSet<Box<[u64]>>,
    calls: u64,
}

impl SignatureRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total number of signing calls recorded.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    fn chain_key(value: Bit, chain: &[ProcessId]) -> Vec<u64> {
        let mut key = Vec::with_capacity(chain.len() + 2);
        key.push(CHAIN_DOMAIN);
        key.push(value.as_u8() as u64);
        key.extend(chain.iter().map(|p| p.0 as u64));
        key
    }

    fn statement_key(signer: ProcessId, statement: &[u64]) -> Vec<u64> {
        let mut key = Vec::with_capacity(statement.len() + 2);
        key.push(STATEMENT_DOMAIN);
        key.push(signer.0 as u64);
        key.extend_from_slice(statement);
        key
    }

    /// Sign a raw value: the result has chain `[signer]`.
    pub(crate) fn sign_raw(&mut self, signer: ProcessId, value: Bit) -> SignedValue {
        let sv = SignedValue {
            value,
            chain: vec![signer],
        };
        self.calls += 1;
        self.entries
            .insert(Self::chain_key(value, &sv.chain).into_boxed_slice());
        sv
    }

    /// Append `signer` to an existing chain.
    pub(crate) fn sign_chain(
        &mut self,
        signer: ProcessId,
        sv: &SignedValue,
    ) -> Result<SignedValue, CryptoError> {
        if sv.signed_by(signer) {
            return Err(CryptoError::DuplicateSigner { signer });
        }
        let mut chain = sv.chain.clone();
        chain.push(signer);
        self.calls += 1;
        self.entries
            .insert(Self::chain_key(sv.value, &chain).into_boxed_slice());
        Ok(SignedValue {
            value: sv.value,
            chain,
        })
    }

    pub(crate) fn sign_statement(&mut self, signer: ProcessId, statement: &[u64]) {
        self.calls += 1;
        self.entries
            .insert(Self::statement_key(signer, statement).into_boxed_slice());
    }

    /// True iff the chain is nonempty, its signers are distinct, and every
    /// prefix was produced by a signing call of its last signer.
    pub fn verify(&self, sv: &SignedValue) -> bool {
        if sv.chain.is_empty() || sv.signature_count() != sv.chain.len() {
            return false;
        }
        let full = Self::chain_key(sv.value, &sv.chain);
        (3..=full.len()).all(|end| self.entries.contains(&full[..end]))
    }

    pub fn verify_statement(&self, signer: ProcessId, statement: &[u64]) -> bool {
        self.entries
            .contains(Self::statement_key(signer, statement).as_slice())
    }
}

/// Signing capability bound to a single identity.
pub trait Signer {
    fn signer_id(&self) -> ProcessId;

    /// `sign(raw value)`: a fresh chain with this signer as origin.
    fn sign_value(&mut self, value: Bit) -> SignedValue;

    /// `sign(signed value)`: append this signer.
    fn sign(&mut self, sv: &SignedValue) -> Result<SignedValue, CryptoError>;

    fn sign_statement(&mut self, statement: &[u64]);

    fn verify(&self, sv: &SignedValue) -> bool;

    fn verify_statement(&self, signer: ProcessId, statement: &[u64]) -> bool;
}

/// A [`Signer`] over a borrowed registry. Used by process contexts and tests.
pub struct RegistrySigner<'a> {
    id: ProcessId,
    registry: &'a mut SignatureRegistry,
}

impl<'a> RegistrySigner<'a> {
    pub fn new(id: ProcessId, registry: &'a mut SignatureRegistry) -> Self {
        RegistrySigner { id, registry }
    }
}

impl Signer for RegistrySigner<'_> {
    fn signer_id(&self) -> ProcessId {
        self.id
    }

    fn sign_value(&mut self, value: Bit) -> SignedValue {
        self.registry.sign_raw(self.id, value)
    }

    fn sign(&mut self, sv: &SignedValue) -> Result<SignedValue, CryptoError> {
        self.registry.sign_chain(self.id, sv)
    }

    fn sign_statement(&mut self, statement: &[u64]) {
        self.registry.sign_statement(self.id, statement)
    }

    fn verify(&self, sv: &SignedValue) -> bool {
        self.registry.verify(sv)
    }

    fn verify_statement(&self, signer: ProcessId, statement: &[u64]) -> bool {
        self.registry.verify_statement(signer, statement)
    }
}
