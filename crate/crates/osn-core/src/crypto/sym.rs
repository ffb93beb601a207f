//! Authenticated symmetric encryption (ChaCha20-Poly1305).
//!
//! Output layout: 12-byte random nonce followed by the ciphertext+tag.
//! Opening fails on any modification of ciphertext or associated data.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Nonce};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::CryptoError;

pub const SYM_KEY_LEN: usize = 32;
const NONCE_LEN: usize = 12;

/// 256-bit symmetric key.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymKey(pub [u8; SYM_KEY_LEN]);

impl SymKey {
    pub fn random(rng: &mut impl RngCore) -> Self {
        let mut k = [0u8; SYM_KEY_LEN];
        rng.fill_bytes(&mut k);
        Self(k)
    }

    pub fn as_bytes(&self) -> &[u8; SYM_KEY_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for SymKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SymKey(..)")
    }
}

pub fn seal(key: &SymKey, plaintext: &[u8], ad: &[u8], rng: &mut impl RngCore) -> Vec<u8> {
    let cipher = ChaCha20Poly1305::new((&key.0).into());
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let ct = cipher
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: plaintext, aad: ad })
        .expect("chacha20poly1305 encryption is infallible for in-memory sizes");
    let mut out = Vec::with_capacity(NONCE_LEN + ct.len());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&ct);
    out
}

pub fn open(key: &SymKey, sealed: &[u8], ad: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if sealed.len() < NONCE_LEN {
        return Err(CryptoError::AuthFailure);
    }
    let (nonce, ct) = sealed.split_at(NONCE_LEN);
    let cipher = ChaCha20Poly1305::new((&key.0).into());
    cipher
        .decrypt(Nonce::from_slice(nonce), Payload { msg: ct, aad: ad })
        .map_err(|_| CryptoError::AuthFailure)
}
