//! Hybrid policy-based encryption with proxy-mediated decryption.
//!
//! Encryption Shamir-shares a fresh root secret down the policy tree and
//! masks each leaf share with the seed `g^(r*a)` for that leaf's attribute.
//! The 32-byte payload (a symmetric key or key seed) is sealed under a key
//! derived from the root secret. Decryption selects a minimal satisfying
//! leaf set, recovers each seed through the proxy chain, and reconstructs
//! the root secret by Lagrange interpolation.
//!
//! For every selected leaf the holder computes `(g^r)^(b*y)` with blinded
//! exponent `b` and a fresh ephemeral `y`, sends it through each proxy in
//! the chain, and strips `y` afterwards. The proxy only ever sees elements
//! randomized by `y`, so repeated decryptions of the same ciphertext give it
//! unrelated transcripts.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::group::{Group, GroupElement, Scalar};
use super::keys::{ContactKey, PublicParams};
use super::proxy::ProxyTransformer;
use super::{kdf, shamir, sym, CryptoError};
use crate::policy::{PolicyLimits, PolicyTree, SelectionPlan};
use crate::wire::{Reader, Writer};

/// Payload size sealed by a policy ciphertext: a symmetric key or a signing
/// key seed.
pub const SECRET_PAYLOAD_LEN: usize = 32;

const NONCE_LEN: usize = 16;

/// Policy-encrypted 32-byte payload.
///
/// The policy tree rides in the clear inside the ciphertext; references
/// embedding it are themselves sealed or exchanged out of band, so storage
/// nodes never see policies.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicyCiphertext {
    group: Group,
    nonce: [u8; NONCE_LEN],
    ephemeral: GroupElement,
    policy: PolicyTree,
    leaf_slots: Vec<LeafSlot>,
    sealed_payload: Vec<u8>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct LeafSlot {
    attr: crate::policy::AttributeId,
    masked_share: Vec<u8>,
}

impl PolicyCiphertext {
    pub fn policy(&self) -> &PolicyTree {
        &self.policy
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    /// Digest binding header fields; used as associated data for the seal.
    fn header_ad(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"osn.abe.header");
        h.update(self.nonce);
        h.update(self.group.encode_element(&self.ephemeral));
        h.update(self.policy.to_bytes());
        h.finalize().into()
    }

    pub fn encode(&self, w: &mut Writer) {
        w.put_str(self.group.name());
        w.put_fixed(&self.nonce);
        self.group.encode_element_into(w, &self.ephemeral);
        w.put_bytes(&self.policy.to_bytes());
        w.put_varint(self.leaf_slots.len() as u64);
        for slot in &self.leaf_slots {
            w.put_fixed(slot.attr.as_bytes());
            w.put_bytes(&slot.masked_share);
        }
        w.put_bytes(&self.sealed_payload);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, CryptoError> {
        let group = Group::by_name(&r.string()?)?;
        let nonce: [u8; NONCE_LEN] = r.fixed()?;
        let ephemeral = group.decode_element_from(r)?;
        let policy_bytes = r.bytes()?;
        let policy = PolicyTree::from_bytes(&policy_bytes)
            .map_err(|_| CryptoError::Wire(crate::wire::WireError::Malformed("policy")))?;
        let n = r.varint()? as usize;
        if n != policy.leaf_count() {
            return Err(CryptoError::Wire(crate::wire::WireError::Malformed(
                "leaf slot count",
            )));
        }
        let mut leaf_slots = Vec::with_capacity(n);
        for _ in 0..n {
            leaf_slots.push(LeafSlot {
                attr: crate::policy::AttributeId::from_bytes(r.fixed()?),
                masked_share: r.bytes()?,
            });
        }
        let sealed_payload = r.bytes()?;
        Ok(Self {
            group,
            nonce,
            ephemeral,
            policy,
            leaf_slots,
            sealed_payload,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        let ct = Self::decode(&mut r)?;
        r.finish().map_err(CryptoError::Wire)?;
        Ok(ct)
    }
}

fn leaf_mask(
    group: &Group,
    seed: &GroupElement,
    nonce: &[u8; NONCE_LEN],
    slot: usize,
) -> Vec<u8> {
    let mut context = Vec::with_capacity(NONCE_LEN + 8);
    context.extend_from_slice(nonce);
    context.extend_from_slice(&(slot as u64).to_be_bytes());
    kdf::derive(
        &group.encode_element(seed),
        "osn.leaf-mask",
        &context,
        group.scalar_len(),
    )
}

fn payload_seal_key(group: &Group, root: &Scalar, nonce: &[u8; NONCE_LEN]) -> sym::SymKey {
    sym::SymKey(kdf::derive32(
        &group.encode_scalar(root),
        "osn.root-seal",
        nonce,
    ))
}

/// Encrypts `payload` under `policy` using the authority's public
/// parameters. Anyone holding the parameters can encrypt.
pub fn encrypt(
    params: &PublicParams,
    policy: &PolicyTree,
    payload: &[u8; SECRET_PAYLOAD_LEN],
    rng: &mut impl RngCore,
) -> Result<PolicyCiphertext, CryptoError> {
    policy
        .validate(&PolicyLimits::default())
        .map_err(|_| CryptoError::PolicyUnsatisfied)?;
    for attr in policy.leaves() {
        if !params.has_attribute(&attr) {
            return Err(CryptoError::UnknownAttribute);
        }
    }
    let group = params.group().clone();
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let r = group.random_scalar(rng);
    let ephemeral = group.generator_pow(&r);
    let root = group.random_scalar(rng);

    let mut leaf_secrets = Vec::with_capacity(policy.leaf_count());
    split_tree(&group, policy, root.clone(), rng, &mut leaf_secrets);

    let leaf_slots = leaf_secrets
        .into_iter()
        .enumerate()
        .map(|(slot, (attr, secret))| {
            let seed = group.pow(&params.attr_pub[&attr], &r);
            let mask = leaf_mask(&group, &seed, &nonce, slot);
            let share_bytes = group.encode_scalar(&secret);
            let masked_share = share_bytes
                .iter()
                .zip(mask.iter())
                .map(|(a, b)| a ^ b)
                .collect();
            LeafSlot { attr, masked_share }
        })
        .collect();

    let mut ct = PolicyCiphertext {
        group: group.clone(),
        nonce,
        ephemeral,
        policy: policy.clone(),
        leaf_slots,
        sealed_payload: Vec::new(),
    };
    let seal_key = payload_seal_key(&group, &root, &nonce);
    ct.sealed_payload = sym::seal(&seal_key, payload, &ct.header_ad(), rng);
    Ok(ct)
}

fn split_tree(
    group: &Group,
    node: &PolicyTree,
    secret: Scalar,
    rng: &mut impl RngCore,
    out: &mut Vec<(crate::policy::AttributeId, Scalar)>,
) {
    match node {
        PolicyTree::Leaf(attr) => out.push((*attr, secret)),
        PolicyTree::Threshold { k, children } => {
            let shares = shamir::share(group, &secret, children.len() as u32, *k, rng);
            for (child, share) in children.iter().zip(shares) {
                split_tree(group, child, share, rng, out);
            }
        }
    }
}

/// Decrypts the payload. `proxies[i]` must serve the i-th hop of the key's
/// proxy chain (root authority first); a directly issued key needs exactly
/// one proxy handle.
pub fn decrypt(
    ct: &PolicyCiphertext,
    key: &ContactKey,
    proxies: &[&dyn ProxyTransformer],
    rng: &mut impl RngCore,
) -> Result<[u8; SECRET_PAYLOAD_LEN], CryptoError> {
    if key.group() != &ct.group {
        return Err(CryptoError::GroupMismatch);
    }
    if proxies.len() != key.chain().len() {
        return Err(CryptoError::ProxyChainMismatch {
            given: proxies.len(),
            expected: key.chain().len(),
        });
    }
    let plan = ct
        .policy
        .select_satisfying(&key.attributes())
        .ok_or(CryptoError::PolicyUnsatisfied)?;

    let group = &ct.group;
    let mut leaf_secrets: Vec<Option<Scalar>> = vec![None; ct.leaf_slots.len()];
    for (slot, attr) in plan.leaves() {
        let blinded = key
            .blinded_exponent(&attr)
            .ok_or(CryptoError::PolicyUnsatisfied)?;
        let ephemeral_blind = group.random_scalar(rng);
        let exponent = group.mul_scalars(blinded, &ephemeral_blind);
        let mut element = group.pow(&ct.ephemeral, &exponent);
        for (hop, proxy) in key.chain().iter().zip(proxies.iter()) {
            element = proxy.transform(&hop.holder, attr, &element)?;
        }
        let seed = group.pow(&element, &group.invert_scalar(&ephemeral_blind)?);
        let mask = leaf_mask(group, &seed, &ct.nonce, slot);
        let masked = &ct.leaf_slots[slot].masked_share;
        if masked.len() != mask.len() {
            return Err(CryptoError::AuthFailure);
        }
        let share_bytes: Vec<u8> = masked.iter().zip(mask.iter()).map(|(a, b)| a ^ b).collect();
        let share = group
            .decode_scalar(&share_bytes)
            .map_err(|_| CryptoError::AuthFailure)?;
        leaf_secrets[slot] = Some(share);
    }

    let root = recover(group, &plan, &leaf_secrets);
    let seal_key = payload_seal_key(group, &root, &ct.nonce);
    let payload = sym::open(&seal_key, &ct.sealed_payload, &ct.header_ad())?;
    payload
        .try_into()
        .map_err(|_| CryptoError::AuthFailure)
}

fn recover(group: &Group, plan: &SelectionPlan, leaf_secrets: &[Option<Scalar>]) -> Scalar {
    match plan {
        SelectionPlan::Leaf { slot, .. } => leaf_secrets[*slot]
            .clone()
            .expect("plan leaf was recovered"),
        SelectionPlan::Node { picks } => {
            let points: Vec<(u32, Scalar)> = picks
                .iter()
                .map(|(idx, sub)| (idx + 1, recover(group, sub, leaf_secrets)))
                .collect();
            shamir::reconstruct(group, &points)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keys::MasterKey;
    use crate::crypto::proxy::ProxyState;
    use crate::crypto::UserId;
    use crate::policy::{testing, AttributeId};
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::cell::RefCell;
    use std::collections::BTreeSet;

    struct Fixture {
        master: MasterKey,
        map: std::collections::BTreeMap<String, AttributeId>,
        proxy: ProxyState,
        rng: ChaCha20Rng,
    }

    fn fixture(seed: u64, names: &[&str]) -> Fixture {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let group = Group::modp_64();
        let (master, map) =
            MasterKey::generate(UserId::from("alice"), names, group.clone(), &mut rng).unwrap();
        let proxy = ProxyState::new(UserId::from("alice"), group);
        Fixture { master, map, proxy, rng }
    }

    fn payload(rng: &mut impl RngCore) -> [u8; 32] {
        let mut p = [0u8; 32];
        rng.fill_bytes(&mut p);
        p
    }

    #[test]
    fn conjunction_example_round_trip() {
        let mut fx = fixture(60, &["friend", "coworker", "family"]);
        let policy = crate::policy::parse_policy("(friend AND coworker) OR family", &fx.map).unwrap();
        let secret = payload(&mut fx.rng);
        let ct = encrypt(&fx.master.public_params(), &policy, &secret, &mut fx.rng).unwrap();

        let attrs: BTreeSet<_> = [fx.map["friend"], fx.map["coworker"]].into();
        let bob = fx
            .master
            .issue_key(&mut fx.proxy, UserId::from("bob"), &attrs, &mut fx.rng)
            .unwrap();
        let out = decrypt(&ct, &bob, &[&fx.proxy], &mut fx.rng).unwrap();
        assert_eq!(out, secret);
    }

    #[test]
    fn unsatisfied_policy_rejected_before_proxy_contact() {
        let mut fx = fixture(61, &["friend", "family"]);
        let policy = crate::policy::parse_policy("friend AND family", &fx.map).unwrap();
        let ct = encrypt(&fx.master.public_params(), &policy, &payload(&mut fx.rng), &mut fx.rng)
            .unwrap();
        let attrs: BTreeSet<_> = [fx.map["friend"]].into();
        let bob = fx
            .master
            .issue_key(&mut fx.proxy, UserId::from("bob"), &attrs, &mut fx.rng)
            .unwrap();
        assert!(matches!(
            decrypt(&ct, &bob, &[&fx.proxy], &mut fx.rng),
            Err(CryptoError::PolicyUnsatisfied)
        ));
    }

    #[test]
    fn or_policy_both_routes_agree() {
        let mut fx = fixture(62, &["a", "b"]);
        let policy = crate::policy::parse_policy("a OR b", &fx.map).unwrap();
        let secret = payload(&mut fx.rng);
        let ct = encrypt(&fx.master.public_params(), &policy, &secret, &mut fx.rng).unwrap();
        let via_a = fx
            .master
            .issue_key(&mut fx.proxy, UserId::from("xa"), &[fx.map["a"]].into(), &mut fx.rng)
            .unwrap();
        let via_b = fx
            .master
            .issue_key(&mut fx.proxy, UserId::from("xb"), &[fx.map["b"]].into(), &mut fx.rng)
            .unwrap();
        assert_eq!(decrypt(&ct, &via_a, &[&fx.proxy], &mut fx.rng).unwrap(), secret);
        assert_eq!(decrypt(&ct, &via_b, &[&fx.proxy], &mut fx.rng).unwrap(), secret);
    }

    struct CountingProxy<'a> {
        inner: &'a ProxyState,
        inputs: RefCell<Vec<GroupElement>>,
    }

    impl ProxyTransformer for CountingProxy<'_> {
        fn transform(
            &self,
            holder: &UserId,
            attr: AttributeId,
            element: &GroupElement,
        ) -> Result<GroupElement, CryptoError> {
            self.inputs.borrow_mut().push(element.clone());
            self.inner.transform(holder, attr, element)
        }
    }

    #[test]
    fn single_leaf_uses_one_proxy_round() {
        let mut fx = fixture(63, &["friend"]);
        let policy = PolicyTree::Leaf(fx.map["friend"]);
        let secret = payload(&mut fx.rng);
        let ct = encrypt(&fx.master.public_params(), &policy, &secret, &mut fx.rng).unwrap();
        let bob = fx
            .master
            .issue_key(&mut fx.proxy, UserId::from("bob"), &[fx.map["friend"]].into(), &mut fx.rng)
            .unwrap();
        let counter = CountingProxy { inner: &fx.proxy, inputs: RefCell::new(Vec::new()) };
        assert_eq!(decrypt(&ct, &bob, &[&counter], &mut fx.rng).unwrap(), secret);
        assert_eq!(counter.inputs.borrow().len(), 1);
    }

    #[test]
    fn proxy_sees_fresh_element_every_decryption() {
        let mut fx = fixture(64, &["friend"]);
        let policy = PolicyTree::Leaf(fx.map["friend"]);
        let ct = encrypt(&fx.master.public_params(), &policy, &payload(&mut fx.rng), &mut fx.rng)
            .unwrap();
        let bob = fx
            .master
            .issue_key(&mut fx.proxy, UserId::from("bob"), &[fx.map["friend"]].into(), &mut fx.rng)
            .unwrap();
        let counter = CountingProxy { inner: &fx.proxy, inputs: RefCell::new(Vec::new()) };
        for _ in 0..8 {
            decrypt(&ct, &bob, &[&counter], &mut fx.rng).unwrap();
        }
        let inputs = counter.inputs.borrow();
        for i in 0..inputs.len() {
            assert_ne!(inputs[i], ct.ephemeral, "input leaked the raw ephemeral");
            for j in (i + 1)..inputs.len() {
                assert_ne!(inputs[i], inputs[j], "proxy transcript repeated");
            }
        }
    }

    #[test]
    fn revocation_blocks_old_ciphertexts() {
        let mut fx = fixture(65, &["friend"]);
        let policy = PolicyTree::Leaf(fx.map["friend"]);
        let secret = payload(&mut fx.rng);
        let ct = encrypt(&fx.master.public_params(), &policy, &secret, &mut fx.rng).unwrap();
        let bob = fx
            .master
            .issue_key(&mut fx.proxy, UserId::from("bob"), &[fx.map["friend"]].into(), &mut fx.rng)
            .unwrap();
        assert_eq!(decrypt(&ct, &bob, &[&fx.proxy], &mut fx.rng).unwrap(), secret);
        fx.proxy.revoke(&UserId::from("bob"), &[fx.map["friend"]].into());
        assert!(matches!(
            decrypt(&ct, &bob, &[&fx.proxy], &mut fx.rng),
            Err(CryptoError::Revoked { .. })
        ));
    }

    #[test]
    fn reissue_rotates_blinding_and_kills_old_key() {
        let mut fx = fixture(66, &["friend"]);
        let policy = PolicyTree::Leaf(fx.map["friend"]);
        let secret = payload(&mut fx.rng);
        let ct = encrypt(&fx.master.public_params(), &policy, &secret, &mut fx.rng).unwrap();
        let old = fx
            .master
            .issue_key(&mut fx.proxy, UserId::from("bob"), &[fx.map["friend"]].into(), &mut fx.rng)
            .unwrap();
        let new = fx
            .master
            .issue_key(&mut fx.proxy, UserId::from("bob"), &[fx.map["friend"]].into(), &mut fx.rng)
            .unwrap();
        // old key now pairs with the rotated proxy entry: reconstruction junk
        assert!(decrypt(&ct, &old, &[&fx.proxy], &mut fx.rng).is_err());
        assert_eq!(decrypt(&ct, &new, &[&fx.proxy], &mut fx.rng).unwrap(), secret);
    }

    #[test]
    fn tampered_share_or_payload_fails_auth() {
        let mut fx = fixture(67, &["a", "b"]);
        let policy = crate::policy::parse_policy("a AND b", &fx.map).unwrap();
        let secret = payload(&mut fx.rng);
        let ct = encrypt(&fx.master.public_params(), &policy, &secret, &mut fx.rng).unwrap();
        let key = fx
            .master
            .issue_key(
                &mut fx.proxy,
                UserId::from("bob"),
                &[fx.map["a"], fx.map["b"]].into(),
                &mut fx.rng,
            )
            .unwrap();

        let mut bad_share = ct.clone();
        bad_share.leaf_slots[0].masked_share[0] ^= 1;
        assert!(matches!(
            decrypt(&bad_share, &key, &[&fx.proxy], &mut fx.rng),
            Err(CryptoError::AuthFailure)
        ));

        let mut bad_payload = ct.clone();
        let last = bad_payload.sealed_payload.len() - 1;
        bad_payload.sealed_payload[last] ^= 1;
        assert!(matches!(
            decrypt(&bad_payload, &key, &[&fx.proxy], &mut fx.rng),
            Err(CryptoError::AuthFailure)
        ));
    }

    #[test]
    fn wire_round_trip() {
        let mut fx = fixture(68, &["a", "b", "c"]);
        let policy = crate::policy::parse_policy("2 of {a, b, c}", &fx.map).unwrap();
        let secret = payload(&mut fx.rng);
        let ct = encrypt(&fx.master.public_params(), &policy, &secret, &mut fx.rng).unwrap();
        let bytes = ct.to_bytes();
        let decoded = PolicyCiphertext::from_bytes(&bytes).unwrap();
        let key = fx
            .master
            .issue_key(
                &mut fx.proxy,
                UserId::from("bob"),
                &[fx.map["a"], fx.map["c"]].into(),
                &mut fx.rng,
            )
            .unwrap();
        assert_eq!(decrypt(&decoded, &key, &[&fx.proxy], &mut fx.rng).unwrap(), secret);
    }

    #[test]
    fn wrong_proxy_count_rejected() {
        let mut fx = fixture(69, &["a"]);
        let policy = PolicyTree::Leaf(fx.map["a"]);
        let ct = encrypt(&fx.master.public_params(), &policy, &payload(&mut fx.rng), &mut fx.rng)
            .unwrap();
        let key = fx
            .master
            .issue_key(&mut fx.proxy, UserId::from("bob"), &[fx.map["a"]].into(), &mut fx.rng)
            .unwrap();
        assert!(matches!(
            decrypt(&ct, &key, &[], &mut fx.rng),
            Err(CryptoError::ProxyChainMismatch { given: 0, expected: 1 })
        ));
        assert!(matches!(
            decrypt(&ct, &key, &[&fx.proxy, &fx.proxy], &mut fx.rng),
            Err(CryptoError::ProxyChainMismatch { given: 2, expected: 1 })
        ));
    }

    #[test]
    fn delegated_key_needs_every_proxy_in_the_chain() {
        let mut fx = fixture(71, &["foaf"]);
        let foaf = fx.map["foaf"];
        let policy = PolicyTree::Leaf(foaf);
        let secret = payload(&mut fx.rng);
        let ct = encrypt(&fx.master.public_params(), &policy, &secret, &mut fx.rng).unwrap();

        let bob = fx
            .master
            .issue_key(&mut fx.proxy, UserId::from("bob"), &[foaf].into(), &mut fx.rng)
            .unwrap();
        let mut bob_proxy = ProxyState::new(UserId::from("bob"), Group::modp_64());
        let carol = crate::crypto::delegate(
            &bob,
            &mut bob_proxy,
            UserId::from("carol"),
            &[foaf].into(),
            &mut fx.rng,
        )
        .unwrap();
        assert_eq!(carol.delegation_depth(), 1);
        assert_eq!(
            decrypt(&ct, &carol, &[&fx.proxy, &bob_proxy], &mut fx.rng).unwrap(),
            secret
        );
        // a depth-1 key cannot skip either hop
        assert!(decrypt(&ct, &carol, &[&fx.proxy], &mut fx.rng).is_err());
        // swapping in the wrong proxy for a hop fails at that hop
        assert!(decrypt(&ct, &carol, &[&bob_proxy, &bob_proxy], &mut fx.rng).is_err());
    }

    #[test]
    fn delegation_revocation_truth_table() {
        // 2x2 over (alice revokes bob, bob revokes carol)
        for (alice_revokes, bob_revokes) in
            [(false, false), (false, true), (true, false), (true, true)]
        {
            let mut fx = fixture(72, &["foaf"]);
            let foaf = fx.map["foaf"];
            let policy = PolicyTree::Leaf(foaf);
            let secret = payload(&mut fx.rng);
            let ct =
                encrypt(&fx.master.public_params(), &policy, &secret, &mut fx.rng).unwrap();
            let bob = fx
                .master
                .issue_key(&mut fx.proxy, UserId::from("bob"), &[foaf].into(), &mut fx.rng)
                .unwrap();
            let mut bob_proxy = ProxyState::new(UserId::from("bob"), Group::modp_64());
            let carol = crate::crypto::delegate(
                &bob,
                &mut bob_proxy,
                UserId::from("carol"),
                &[foaf].into(),
                &mut fx.rng,
            )
            .unwrap();
            if alice_revokes {
                fx.proxy.revoke(&UserId::from("bob"), &[foaf].into());
            }
            if bob_revokes {
                bob_proxy.revoke(&UserId::from("carol"), &[foaf].into());
            }
            let carol_ok = decrypt(&ct, &carol, &[&fx.proxy, &bob_proxy], &mut fx.rng).is_ok();
            assert_eq!(carol_ok, !alice_revokes && !bob_revokes);
            // bob's own access depends only on alice's revocation
            let bob_ok = decrypt(&ct, &bob, &[&fx.proxy], &mut fx.rng).is_ok();
            assert_eq!(bob_ok, !alice_revokes);
        }
    }

    #[test]
    fn threshold_split_proxy_decrypts_and_rejects_singletons() {
        let mut fx = fixture(73, &["friend"]);
        let friend = fx.map["friend"];
        let policy = PolicyTree::Leaf(friend);
        let secret = payload(&mut fx.rng);
        let ct = encrypt(&fx.master.public_params(), &policy, &secret, &mut fx.rng).unwrap();
        let bob = fx
            .master
            .issue_key(&mut fx.proxy, UserId::from("bob"), &[friend].into(), &mut fx.rng)
            .unwrap();
        let shares = fx.proxy.split(3, 2, &mut fx.rng).unwrap();
        let group = Group::modp_64();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let client = crate::crypto::ThresholdProxyClient::new(
                group.clone(),
                vec![&shares[i], &shares[j]],
            );
            assert_eq!(decrypt(&ct, &bob, &[&client], &mut fx.rng).unwrap(), secret);
        }
        for share in &shares {
            let lone = crate::crypto::ThresholdProxyClient::new(group.clone(), vec![share]);
            assert!(matches!(
                decrypt(&ct, &bob, &[&lone], &mut fx.rng),
                Err(CryptoError::AuthFailure)
            ));
        }
    }

    #[test]
    fn success_matches_policy_evaluation_over_random_pairs() {
        let mut fx = fixture(70, &[]);
        let names: Vec<String> = (0..8).map(|i| format!("attr{i}")).collect();
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let map = fx.master.add_attributes(&name_refs, &mut fx.rng).unwrap();
        let attrs: Vec<AttributeId> = map.values().copied().collect();
        let params = fx.master.public_params();
        for trial in 0..1000 {
            let policy = testing::random_tree(&mut fx.rng, &attrs, 4, 8);
            let held = testing::random_subset(&mut fx.rng, &attrs, 0.45);
            let secret = payload(&mut fx.rng);
            let ct = encrypt(&params, &policy, &secret, &mut fx.rng).unwrap();
            let holder = UserId::new(format!("holder{trial}"));
            let key = fx
                .master
                .issue_key(&mut fx.proxy, holder, &held, &mut fx.rng)
                .unwrap();
            let got = decrypt(&ct, &key, &[&fx.proxy], &mut fx.rng);
            if policy.evaluate(&held) {
                assert_eq!(got.unwrap(), secret, "trial {trial}");
            } else {
                assert!(got.is_err(), "trial {trial}");
            }
        }
    }
}
