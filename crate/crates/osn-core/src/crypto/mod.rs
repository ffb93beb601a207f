//! Cryptographic services: policy-based hybrid encryption with
//! proxy-mediated decryption and immediate revocation, attribute delegation,
//! threshold proxy splitting, authenticated symmetric encryption, and
//! signatures.
//!
//! The policy-based layer emulates a ciphertext-policy ABE with revocation:
//! the policy tree is Shamir-shared, each leaf share is masked by a
//! Diffie-Hellman seed `g^(r*a)`, and contact keys carry exponents blinded
//! per holder. Every decryption routes through the issuer's proxy, which
//! removes the blinding; revoking an attribute deletes the proxy entry, so
//! revoked keys fail on all ciphertexts, old and new, with no re-encryption.
//! The functional contract matches a pairing-based scheme behind the same
//! interface; the pairing constructions' formal reductions are not claimed.

pub mod abe;
pub mod group;
pub mod kdf;
pub mod keys;
pub mod proxy;
pub mod shamir;
pub mod sig;
pub mod sym;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::AttributeId;
use crate::wire::WireError;

pub use abe::{decrypt, encrypt, PolicyCiphertext, SECRET_PAYLOAD_LEN};
pub use group::{Group, GroupElement, Scalar};
pub use keys::{delegate, ContactKey, MasterKey, ProxyHop, PublicParams};
pub use proxy::{ProxyShare, ProxyState, ProxyTransformer, ThresholdProxyClient};
pub use sig::{sign_with, verify, Signature, SignatureKeyPair, SigningKey, VerifyingKey};
pub use sym::{open as sym_open, seal as sym_seal, SymKey};

/// Stable user identifier, exchanged out of band along with keys.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserId(pub String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for UserId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Debug for UserId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "user:{}", self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("duplicate attribute name {0:?}")]
    DuplicateAttribute(String),
    #[error("attribute not held by this key or authority")]
    UnknownAttribute,
    #[error("policy not satisfied by the key's attributes")]
    PolicyUnsatisfied,
    #[error("proxy has no entry for holder {holder} / attribute {attr} (revoked or never issued)")]
    Revoked { holder: UserId, attr: AttributeId },
    #[error("authenticated decryption failed")]
    AuthFailure,
    #[error("proxy chain length {given} does not match delegation depth + 1 = {expected}")]
    ProxyChainMismatch { given: usize, expected: usize },
    #[error("threshold {t} out of range for {n} shares")]
    BadThreshold { n: u32, t: u32 },
    #[error("scalar must be non-zero")]
    ZeroScalar,
    #[error("group element outside the prime-order subgroup")]
    InvalidElement,
    #[error("unknown group {0:?}")]
    UnknownGroup(String),
    #[error("ciphertext and key use different groups")]
    GroupMismatch,
    #[error("wire: {0}")]
    Wire(#[from] WireError),
}
