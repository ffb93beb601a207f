//! Key-authority material: master keys, public encryption parameters, and
//! blinded contact keys with delegation.
//!
//! Every user is their own key authority. Issuing an attribute to a contact
//! picks a fresh blinding factor x: the contact key carries `a*x mod q` and
//! the issuer's proxy stores `x^-1`. The raw exponent `a` never leaves the
//! master key, and the contact key alone is useless without the proxy.

use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::group::{Group, GroupElement, Scalar};
use super::proxy::ProxyState;
use super::{kdf, CryptoError, SymKey, UserId};
use crate::policy::AttributeId;

/// Per-attribute secret exponents plus the owner's sealing secret.
#[derive(Clone, Serialize, Deserialize)]
pub struct MasterKey {
    owner: UserId,
    group: Group,
    exponents: BTreeMap<AttributeId, Scalar>,
    seal_secret: [u8; 32],
}

impl MasterKey {
    /// Fresh master key with one random exponent and one opaque id per name.
    /// Returns the name-to-id map callers use to parse policy text.
    pub fn generate(
        owner: UserId,
        attribute_names: &[&str],
        group: Group,
        rng: &mut impl RngCore,
    ) -> Result<(Self, BTreeMap<String, AttributeId>), CryptoError> {
        let mut key = Self {
            owner,
            group,
            exponents: BTreeMap::new(),
            seal_secret: {
                let mut s = [0u8; 32];
                rng.fill_bytes(&mut s);
                s
            },
        };
        let map = key.add_attributes(attribute_names, rng)?;
        Ok((key, map))
    }

    /// Adds attributes after the fact; names must be distinct per call.
    pub fn add_attributes(
        &mut self,
        names: &[&str],
        rng: &mut impl RngCore,
    ) -> Result<BTreeMap<String, AttributeId>, CryptoError> {
        let mut map = BTreeMap::new();
        for name in names {
            if map.contains_key(*name) {
                return Err(CryptoError::DuplicateAttribute(name.to_string()));
            }
            let id = AttributeId::random(rng);
            self.exponents.insert(id, self.group.random_scalar(rng));
            map.insert(name.to_string(), id);
        }
        Ok(map)
    }

    pub fn owner(&self) -> &UserId {
        &self.owner
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn attributes(&self) -> impl Iterator<Item = &AttributeId> {
        self.exponents.keys()
    }

    pub fn attribute_count(&self) -> usize {
        self.exponents.len()
    }

    /// Public per-attribute values `g^a`; sufficient to encrypt.
    pub fn public_params(&self) -> PublicParams {
        PublicParams {
            group: self.group.clone(),
            attr_pub: self
                .exponents
                .iter()
                .map(|(id, a)| (*id, self.group.generator_pow(a)))
                .collect(),
        }
    }

    /// Symmetric key the owner uses to seal material to themselves.
    pub fn owner_seal_key(&self) -> SymKey {
        SymKey(kdf::derive32(&self.seal_secret, "osn.owner-seal", b""))
    }

    /// Issues a contact key for `attrs`, installing the unblinding entries
    /// into the issuer's proxy. Re-issuing an attribute rotates the blinding:
    /// the previous key (and anything delegated from it) stops decrypting.
    pub fn issue_key(
        &self,
        proxy: &mut ProxyState,
        holder: UserId,
        attrs: &BTreeSet<AttributeId>,
        rng: &mut impl RngCore,
    ) -> Result<ContactKey, CryptoError> {
        let (key, entries) = self.issue_key_parts(holder, attrs, rng)?;
        for (attr, unblind) in entries {
            proxy.install(key.holder.clone(), attr, unblind);
        }
        Ok(key)
    }

    /// Like [`MasterKey::issue_key`] but returns the proxy entries instead of
    /// installing them, for callers whose proxy lives elsewhere.
    pub fn issue_key_parts(
        &self,
        holder: UserId,
        attrs: &BTreeSet<AttributeId>,
        rng: &mut impl RngCore,
    ) -> Result<(ContactKey, Vec<(AttributeId, Scalar)>), CryptoError> {
        let mut blinded = BTreeMap::new();
        let mut entries = Vec::with_capacity(attrs.len());
        for attr in attrs {
            let exponent = self.exponents.get(attr).ok_or(CryptoError::UnknownAttribute)?;
            let blinding = self.group.random_scalar(rng);
            blinded.insert(*attr, self.group.mul_scalars(exponent, &blinding));
            entries.push((*attr, self.group.invert_scalar(&blinding)?));
        }
        let key = ContactKey {
            holder: holder.clone(),
            group: self.group.clone(),
            blinded,
            chain: vec![ProxyHop {
                authority: self.owner.clone(),
                holder,
            }],
        };
        Ok((key, entries))
    }
}

impl std::fmt::Debug for MasterKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "MasterKey(owner={}, attrs={}, group={})",
            self.owner,
            self.exponents.len(),
            self.group.name()
        )
    }
}

/// Public encryption parameters of one key authority.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PublicParams {
    pub(crate) group: Group,
    pub(crate) attr_pub: BTreeMap<AttributeId, GroupElement>,
}

impl PublicParams {
    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn has_attribute(&self, attr: &AttributeId) -> bool {
        self.attr_pub.contains_key(attr)
    }
}

/// One proxy stop in a decryption: the `authority`'s proxy is asked to
/// unblind on behalf of `holder`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyHop {
    pub authority: UserId,
    pub holder: UserId,
}

/// Blinded decryption key held by a contact.
///
/// The exponent for attribute `a` is `a * x_1 * ... * x_d mod q`, one
/// blinding factor per hop in `chain`. Decryption must route through every
/// hop's proxy, issuer first.
#[derive(Clone, Serialize, Deserialize)]
pub struct ContactKey {
    holder: UserId,
    group: Group,
    blinded: BTreeMap<AttributeId, Scalar>,
    chain: Vec<ProxyHop>,
}

impl ContactKey {
    pub fn holder(&self) -> &UserId {
        &self.holder
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    /// 0 for a directly issued key, d > 0 after d delegations.
    pub fn delegation_depth(&self) -> usize {
        self.chain.len() - 1
    }

    /// Proxy hops in transform order (root authority first).
    pub fn chain(&self) -> &[ProxyHop] {
        &self.chain
    }

    pub fn attributes(&self) -> BTreeSet<AttributeId> {
        self.blinded.keys().copied().collect()
    }

    pub fn has_attribute(&self, attr: &AttributeId) -> bool {
        self.blinded.contains_key(attr)
    }

    pub(crate) fn blinded_exponent(&self, attr: &AttributeId) -> Option<&Scalar> {
        self.blinded.get(attr)
    }
}

impl std::fmt::Debug for ContactKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ContactKey(holder={}, attrs={}, depth={})",
            self.holder,
            self.blinded.len(),
            self.delegation_depth()
        )
    }
}

/// Delegates a subset of the delegator's attributes to a further contact.
///
/// The new key's exponent gains one more blinding factor, and the
/// delegator's own proxy stores its inverse, so the delegated key decrypts
/// only while every proxy along the chain still cooperates.
pub fn delegate(
    delegator: &ContactKey,
    delegator_proxy: &mut ProxyState,
    new_holder: UserId,
    attrs: &BTreeSet<AttributeId>,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<ContactKey, CryptoError> {
    let (key, entries) = delegate_parts(delegator, new_holder, attrs, rng)?;
    for (attr, unblind) in entries {
        delegator_proxy.install(key.holder.clone(), attr, unblind);
    }
    Ok(key)
}

/// Delegation variant returning the proxy entries for external installation.
pub fn delegate_parts(
    delegator: &ContactKey,
    new_holder: UserId,
    attrs: &BTreeSet<AttributeId>,
    rng: &mut impl RngCore,
) -> Result<(ContactKey, Vec<(AttributeId, Scalar)>), CryptoError> {
    let group = delegator.group.clone();
    let mut blinded = BTreeMap::new();
    let mut entries = Vec::with_capacity(attrs.len());
    for attr in attrs {
        let base = delegator
            .blinded
            .get(attr)
            .ok_or(CryptoError::UnknownAttribute)?;
        let extra = group.random_scalar(rng);
        blinded.insert(*attr, group.mul_scalars(base, &extra));
        entries.push((*attr, group.invert_scalar(&extra)?));
    }
    let mut chain = delegator.chain.clone();
    chain.push(ProxyHop {
        authority: delegator.holder.clone(),
        holder: new_holder.clone(),
    });
    let key = ContactKey {
        holder: new_holder,
        group,
        blinded,
        chain,
    };
    Ok((key, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn generate_assigns_exponent_per_name() {
        let mut rng = ChaCha20Rng::seed_from_u64(40);
        let (key, map) = MasterKey::generate(
            UserId::from("alice"),
            &["friend", "coworker", "family"],
            Group::modp_64(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(key.attribute_count(), 3);
        assert_eq!(map.len(), 3);
    }

    #[test]
    fn empty_master_key_valid_and_extendable() {
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        let (mut key, map) =
            MasterKey::generate(UserId::from("alice"), &[], Group::modp_64(), &mut rng).unwrap();
        assert!(map.is_empty());
        let more = key.add_attributes(&["friend"], &mut rng).unwrap();
        assert_eq!(more.len(), 1);
        assert_eq!(key.attribute_count(), 1);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let err = MasterKey::generate(
            UserId::from("alice"),
            &["friend", "friend"],
            Group::modp_64(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, CryptoError::DuplicateAttribute(_)));
    }

    #[test]
    fn repeated_generation_never_collides() {
        let mut rng = ChaCha20Rng::seed_from_u64(43);
        let mut seen = BTreeSet::new();
        for _ in 0..10_000 {
            let id = AttributeId::random(&mut rng);
            assert!(seen.insert(id), "attribute id collision");
        }
    }

    #[test]
    fn issue_installs_proxy_entries_and_blinds() {
        let mut rng = ChaCha20Rng::seed_from_u64(44);
        let group = Group::modp_64();
        let (master, map) = MasterKey::generate(
            UserId::from("alice"),
            &["friend", "coworker"],
            group.clone(),
            &mut rng,
        )
        .unwrap();
        let mut proxy = ProxyState::new(UserId::from("alice"), group);
        let attrs: BTreeSet<AttributeId> = map.values().copied().collect();
        let key = master
            .issue_key(&mut proxy, UserId::from("bob"), &attrs, &mut rng)
            .unwrap();
        assert_eq!(key.attributes().len(), 2);
        assert_eq!(key.delegation_depth(), 0);
        assert_eq!(proxy.entry_count(), 2);
        // the blinded exponent must never equal the raw one
        for attr in &attrs {
            let blinded = key.blinded_exponent(attr).unwrap();
            let raw = master.exponents.get(attr).unwrap();
            assert_ne!(blinded, raw);
        }
    }

    #[test]
    fn issue_empty_set_is_valid() {
        let mut rng = ChaCha20Rng::seed_from_u64(45);
        let group = Group::modp_64();
        let (master, _) =
            MasterKey::generate(UserId::from("alice"), &["friend"], group.clone(), &mut rng)
                .unwrap();
        let mut proxy = ProxyState::new(UserId::from("alice"), group);
        let key = master
            .issue_key(&mut proxy, UserId::from("bob"), &BTreeSet::new(), &mut rng)
            .unwrap();
        assert!(key.attributes().is_empty());
        assert_eq!(proxy.entry_count(), 0);
    }

    #[test]
    fn issuing_unknown_attribute_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(46);
        let group = Group::modp_64();
        let (master, _) =
            MasterKey::generate(UserId::from("alice"), &["friend"], group.clone(), &mut rng)
                .unwrap();
        let mut proxy = ProxyState::new(UserId::from("alice"), group);
        let foreign: BTreeSet<AttributeId> = [AttributeId::random(&mut rng)].into();
        assert!(matches!(
            master.issue_key(&mut proxy, UserId::from("bob"), &foreign, &mut rng),
            Err(CryptoError::UnknownAttribute)
        ));
    }

    #[test]
    fn delegation_extends_chain() {
        let mut rng = ChaCha20Rng::seed_from_u64(47);
        let group = Group::modp_64();
        let (master, map) =
            MasterKey::generate(UserId::from("alice"), &["foaf"], group.clone(), &mut rng)
                .unwrap();
        let mut alice_proxy = ProxyState::new(UserId::from("alice"), group.clone());
        let attrs: BTreeSet<AttributeId> = map.values().copied().collect();
        let bob = master
            .issue_key(&mut alice_proxy, UserId::from("bob"), &attrs, &mut rng)
            .unwrap();
        let mut bob_proxy = ProxyState::new(UserId::from("bob"), group);
        let carol = delegate(&bob, &mut bob_proxy, UserId::from("carol"), &attrs, &mut rng).unwrap();
        assert_eq!(carol.delegation_depth(), 1);
        assert_eq!(carol.chain()[0].authority, UserId::from("alice"));
        assert_eq!(carol.chain()[0].holder, UserId::from("bob"));
        assert_eq!(carol.chain()[1].authority, UserId::from("bob"));
        assert_eq!(carol.chain()[1].holder, UserId::from("carol"));
    }

    #[test]
    fn delegating_unheld_attribute_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(48);
        let group = Group::modp_64();
        let (master, map) = MasterKey::generate(
            UserId::from("alice"),
            &["friend", "foaf"],
            group.clone(),
            &mut rng,
        )
        .unwrap();
        let mut alice_proxy = ProxyState::new(UserId::from("alice"), group.clone());
        let only_friend: BTreeSet<AttributeId> = [map["friend"]].into();
        let bob = master
            .issue_key(&mut alice_proxy, UserId::from("bob"), &only_friend, &mut rng)
            .unwrap();
        let mut bob_proxy = ProxyState::new(UserId::from("bob"), group);
        let want_foaf: BTreeSet<AttributeId> = [map["foaf"]].into();
        assert!(matches!(
            delegate(&bob, &mut bob_proxy, UserId::from("carol"), &want_foaf, &mut rng),
            Err(CryptoError::UnknownAttribute)
        ));
    }
}
