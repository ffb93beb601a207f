//! Core building blocks for a privacy-preserving decentralized social
//! network: attribute policies, policy-based encryption with proxy-mediated
//! revocation, encrypted container objects, and a write-authenticated
//! replicated DHT, plus the user-level workflows that compose them.

pub mod agent;
pub mod crypto;
pub mod dht;
pub mod localnet;
pub mod objects;
pub mod policy;
pub mod wire;

pub use crypto::{CryptoError, UserId};
pub use policy::{AttributeId, PolicyTree};
