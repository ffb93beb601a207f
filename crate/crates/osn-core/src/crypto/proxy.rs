//! Revocation proxies.
//!
//! A proxy holds, per (holder, attribute), the inverse of the blinding
//! factor baked into that holder's contact key. Every decryption sends the
//! proxy an ephemerally blinded group element and gets back the element
//! raised to the stored inverse. Revocation deletes entries; the proxy is
//! minimally trusted and can neither decrypt nor restore revoked access.
//!
//! The proxy function can be Shamir-split across n share holders with
//! threshold t: each share node raises the element to its Lagrange-weighted
//! share, and the product of t partial results equals the unsplit transform.

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::group::{Group, GroupElement, Scalar};
use super::{shamir, CryptoError, UserId};
use crate::policy::AttributeId;

/// Anything that can perform the unblinding transform for one authority.
///
/// Implemented by the local [`ProxyState`], the threshold combiner, and by
/// simulator handles that route the request over the network.
pub trait ProxyTransformer {
    fn transform(
        &self,
        holder: &UserId,
        attr: AttributeId,
        element: &GroupElement,
    ) -> Result<GroupElement, CryptoError>;
}

/// Unblinding entries held by one user's revocation proxy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProxyState {
    owner: UserId,
    group: Group,
    entries: BTreeMap<(UserId, AttributeId), Scalar>,
}

impl ProxyState {
    pub fn new(owner: UserId, group: Group) -> Self {
        Self {
            owner,
            group,
            entries: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> &UserId {
        &self.owner
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn has_entry(&self, holder: &UserId, attr: &AttributeId) -> bool {
        self.entries.contains_key(&(holder.clone(), *attr))
    }

    /// Installs (or rotates) the unblinding scalar for (holder, attr).
    pub fn install(&mut self, holder: UserId, attr: AttributeId, unblind: Scalar) {
        self.entries.insert((holder, attr), unblind);
    }

    /// Removes the entries; revoking an absent entry is a no-op. Other
    /// holders are untouched and no ciphertext is re-encrypted.
    pub fn revoke(&mut self, holder: &UserId, attrs: &BTreeSet<AttributeId>) {
        for attr in attrs {
            self.entries.remove(&(holder.clone(), *attr));
        }
    }

    /// Raises `element` to the stored unblinding scalar. The input is
    /// ephemerally blinded by the caller, so the proxy learns nothing about
    /// the ciphertext seed.
    pub fn transform(
        &self,
        holder: &UserId,
        attr: AttributeId,
        element: &GroupElement,
    ) -> Result<GroupElement, CryptoError> {
        let unblind = self
            .entries
            .get(&(holder.clone(), attr))
            .ok_or_else(|| CryptoError::Revoked {
                holder: holder.clone(),
                attr,
            })?;
        Ok(self.group.pow(element, unblind))
    }

    /// Splits every unblinding scalar into `n` Shamir shares with threshold
    /// `t`. The split is a snapshot: entries installed or revoked afterwards
    /// are not reflected in the shares.
    pub fn split(
        &self,
        n: u32,
        t: u32,
        rng: &mut impl RngCore,
    ) -> Result<Vec<ProxyShare>, CryptoError> {
        if t == 0 || t > n {
            return Err(CryptoError::BadThreshold { n, t });
        }
        let mut shares: Vec<ProxyShare> = (1..=n)
            .map(|index| ProxyShare {
                owner: self.owner.clone(),
                group: self.group.clone(),
                index,
                n,
                t,
                entries: BTreeMap::new(),
            })
            .collect();
        for (key, scalar) in &self.entries {
            let pieces = shamir::share(&self.group, scalar, n, t, rng);
            for (share, piece) in shares.iter_mut().zip(pieces) {
                share.entries.insert(key.clone(), piece);
            }
        }
        Ok(shares)
    }
}

impl ProxyTransformer for ProxyState {
    fn transform(
        &self,
        holder: &UserId,
        attr: AttributeId,
        element: &GroupElement,
    ) -> Result<GroupElement, CryptoError> {
        ProxyState::transform(self, holder, attr, element)
    }
}

/// One share of a threshold-split proxy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProxyShare {
    owner: UserId,
    group: Group,
    index: u32,
    n: u32,
    t: u32,
    entries: BTreeMap<(UserId, AttributeId), Scalar>,
}

impl ProxyShare {
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn threshold(&self) -> u32 {
        self.t
    }

    /// Partial transform: raises `element` to this node's share, already
    /// weighted by the Lagrange coefficient for `participants`. Multiplying
    /// the partials of all participants reproduces the unsplit transform.
    pub fn transform_partial(
        &self,
        holder: &UserId,
        attr: AttributeId,
        element: &GroupElement,
        participants: &[u32],
    ) -> Result<GroupElement, CryptoError> {
        let share = self
            .entries
            .get(&(holder.clone(), attr))
            .ok_or_else(|| CryptoError::Revoked {
                holder: holder.clone(),
                attr,
            })?;
        let position = participants
            .iter()
            .position(|&p| p == self.index)
            .ok_or(CryptoError::BadThreshold {
                n: self.n,
                t: self.t,
            })?;
        let coeffs = shamir::lagrange_at_zero(&self.group, participants);
        let weighted = self.group.mul_scalars(share, &coeffs[position]);
        Ok(self.group.pow(element, &weighted))
    }
}

/// Client-side combiner that drives `t` proxy shares and multiplies their
/// partial results.
pub struct ThresholdProxyClient<'a> {
    group: Group,
    shares: Vec<&'a ProxyShare>,
}

impl<'a> ThresholdProxyClient<'a> {
    /// Uses exactly the given shares; their count must meet the threshold.
    pub fn new(group: Group, shares: Vec<&'a ProxyShare>) -> Self {
        Self { group, shares }
    }

    pub fn participants(&self) -> Vec<u32> {
        self.shares.iter().map(|s| s.index()).collect()
    }
}

impl ProxyTransformer for ThresholdProxyClient<'_> {
    fn transform(
        &self,
        holder: &UserId,
        attr: AttributeId,
        element: &GroupElement,
    ) -> Result<GroupElement, CryptoError> {
        let participants = self.participants();
        let mut acc = self.group.identity();
        for share in &self.shares {
            let partial = share.transform_partial(holder, attr, element, &participants)?;
            acc = self.group.mul_elements(&acc, &partial);
        }
        Ok(acc)
    }
}
