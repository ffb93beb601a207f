//! Container objects, object references, and sealing.
//!
//! Every piece of content is a container object: a typed payload plus a list
//! of append entries referencing comment objects. An object reference is the
//! read capability: `(objID, policy-encrypted K, SPK)`. Objects are stored
//! sealed; a storage node sees only the object id, a plaintext version, the
//! per-object write-authentication public key (WAPK), the opaque sealed
//! body, and opaque append entries.
//!
//! Three policies govern an object: the read policy gates the symmetric key
//! K inside the reference, the write policy is the owner's signature key
//! (SPK) verifying the body, and the append policy gates the APSSK signing
//! key so only authorized contacts can produce append entries that readers
//! accept.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::crypto::{
    self, sig, sym, CryptoError, MasterKey, PolicyCiphertext, ProxyTransformer, PublicParams,
    Signature, SignatureKeyPair, SigningKey, SymKey, VerifyingKey,
};
use crate::policy::PolicyTree;
use crate::wire::{Reader, WireError, Writer};

pub const OBJECT_ID_LEN: usize = 20;

/// Random 160-bit object identifier; doubles as the DHT key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectId([u8; OBJECT_ID_LEN]);

impl ObjectId {
    pub fn random(rng: &mut impl RngCore) -> Self {
        let mut bytes = [0u8; OBJECT_ID_LEN];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }

    pub fn from_bytes(bytes: [u8; OBJECT_ID_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; OBJECT_ID_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for ObjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "obj:")?;
        for b in &self.0[..5] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..")
    }
}

impl std::fmt::Display for ObjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ObjectError {
    #[error("reference and sealed object ids differ")]
    IdMismatch,
    #[error("key capsule denied: {0}")]
    CapsuleDenied(CryptoError),
    #[error("sealed body failed authentication (tampered or wrong key)")]
    BodyTampered,
    #[error("body signature invalid (forged content)")]
    SignatureInvalid,
    #[error("reference omits the SPK and no containing object supplied one")]
    MissingSpk,
    #[error("write-auth secret key does not match the object's WAPK")]
    WrongWask,
    #[error("crypto: {0}")]
    Crypto(#[from] CryptoError),
    #[error("wire: {0}")]
    Wire(#[from] WireError),
}

/// How the reference carries the object key.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum KeyCapsule {
    /// K policy-encrypted under the creator's read policy.
    Policy(PolicyCiphertext),
    /// Bare K: the referenced object's read policy matches the container's.
    Bare(SymKey),
}

/// Read capability for one object.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectReference {
    pub obj_id: ObjectId,
    pub capsule: KeyCapsule,
    /// Write-policy verification key; `None` means "same as the containing
    /// object's" (storage optimization).
    pub spk: Option<VerifyingKey>,
}

impl ObjectReference {
    pub fn resolve_spk<'a>(
        &'a self,
        parent_spk: Option<&'a VerifyingKey>,
    ) -> Result<&'a VerifyingKey, ObjectError> {
        self.spk
            .as_ref()
            .or(parent_spk)
            .ok_or(ObjectError::MissingSpk)
    }

    pub fn encode(&self, w: &mut Writer) {
        w.put_fixed(self.obj_id.as_bytes());
        match &self.capsule {
            KeyCapsule::Bare(k) => {
                w.put_u8(0);
                w.put_fixed(k.as_bytes());
            }
            KeyCapsule::Policy(ct) => {
                w.put_u8(1);
                w.put_bytes(&ct.to_bytes());
            }
        }
        match &self.spk {
            None => w.put_u8(0),
            Some(vk) => {
                w.put_u8(1);
                w.put_fixed(vk.as_bytes());
            }
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, ObjectError> {
        let obj_id = ObjectId::from_bytes(r.fixed()?);
        let capsule = match r.u8()? {
            0 => KeyCapsule::Bare(SymKey(r.fixed()?)),
            1 => {
                let raw = r.bytes()?;
                KeyCapsule::Policy(PolicyCiphertext::from_bytes(&raw)?)
            }
            _ => return Err(WireError::Malformed("capsule tag").into()),
        };
        let spk = match r.u8()? {
            0 => None,
            1 => Some(decode_verifying_key(&r.fixed::<32>()?)?),
            _ => return Err(WireError::Malformed("spk tag").into()),
        };
        Ok(Self { obj_id, capsule, spk })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ObjectError> {
        let mut r = Reader::new(bytes);
        let out = Self::decode(&mut r)?;
        r.finish().map_err(WireError::from)?;
        Ok(out)
    }
}

fn decode_verifying_key(bytes: &[u8; 32]) -> Result<VerifyingKey, ObjectError> {
    VerifyingKey::from_bytes(bytes).map_err(|_| WireError::Malformed("verifying key").into())
}

/// Typed object payload. The content type is incidental; `Bytes` covers
/// anything beyond the built-in social shapes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Content {
    Status(String),
    Wall(Vec<ObjectReference>),
    Profile(BTreeMap<String, String>),
    Root {
        profile: Box<ObjectReference>,
        wall: Box<ObjectReference>,
    },
    Bytes(Vec<u8>),
}

impl Content {
    pub fn encode(&self, w: &mut Writer) {
        match self {
            Content::Status(text) => {
                w.put_u8(0);
                w.put_str(text);
            }
            Content::Wall(refs) => {
                w.put_u8(1);
                w.put_varint(refs.len() as u64);
                for r in refs {
                    w.put_bytes(&r.to_bytes());
                }
            }
            Content::Profile(fields) => {
                w.put_u8(2);
                w.put_varint(fields.len() as u64);
                for (k, v) in fields {
                    w.put_str(k);
                    w.put_str(v);
                }
            }
            Content::Root { profile, wall } => {
                w.put_u8(3);
                w.put_bytes(&profile.to_bytes());
                w.put_bytes(&wall.to_bytes());
            }
            Content::Bytes(data) => {
                w.put_u8(4);
                w.put_bytes(data);
            }
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, ObjectError> {
        Ok(match r.u8()? {
            0 => Content::Status(r.string()?),
            1 => {
                let n = r.varint()? as usize;
                let mut refs = Vec::with_capacity(n.min(4096));
                for _ in 0..n {
                    refs.push(ObjectReference::from_bytes(&r.bytes()?)?);
                }
                Content::Wall(refs)
            }
            2 => {
                let n = r.varint()? as usize;
                let mut fields = BTreeMap::new();
                for _ in 0..n {
                    let k = r.string()?;
                    let v = r.string()?;
                    fields.insert(k, v);
                }
                Content::Profile(fields)
            }
            3 => Content::Root {
                profile: Box::new(ObjectReference::from_bytes(&r.bytes()?)?),
                wall: Box::new(ObjectReference::from_bytes(&r.bytes()?)?),
            },
            4 => Content::Bytes(r.bytes()?),
            _ => return Err(WireError::Malformed("content tag").into()),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }
}

/// Decrypted view of a container object.
#[derive(Clone, Debug)]
pub struct ContainerObject {
    pub version: u64,
    pub content: Content,
    /// Append-policy verification key: readers check append entries against it.
    pub apspk: VerifyingKey,
    /// Append-policy signing key, sealed under the A-policy tree.
    pub sealed_apssk: PolicyCiphertext,
    pub body_signature: Signature,
    pub wapk: VerifyingKey,
    /// WASK sealed to the owner (opaque to everyone else).
    pub wask_capsule: Vec<u8>,
    /// References carried by valid append entries, arrival order.
    pub comments: Vec<ObjectReference>,
    /// Entries dropped at open time (bad seal or bad APSPK signature).
    pub rejected_appends: usize,
}

/// Stored form: plaintext routing metadata plus the sealed body.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SealedObject {
    pub obj_id: ObjectId,
    pub version: u64,
    pub wapk: VerifyingKey,
    pub sealed_body: Vec<u8>,
    pub append_entries: Vec<Vec<u8>>,
}

impl SealedObject {
    pub fn encode(&self, w: &mut Writer) {
        w.put_fixed(self.obj_id.as_bytes());
        w.put_u64(self.version);
        w.put_fixed(self.wapk.as_bytes());
        w.put_bytes(&self.sealed_body);
        w.put_varint(self.append_entries.len() as u64);
        for e in &self.append_entries {
            w.put_bytes(e);
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, ObjectError> {
        let obj_id = ObjectId::from_bytes(r.fixed()?);
        let version = r.u64()?;
        let wapk = decode_verifying_key(&r.fixed::<32>()?)?;
        let sealed_body = r.bytes()?;
        let n = r.varint()? as usize;
        let mut append_entries = Vec::with_capacity(n.min(4096));
        for _ in 0..n {
            append_entries.push(r.bytes()?);
        }
        Ok(Self {
            obj_id,
            version,
            wapk,
            sealed_body,
            append_entries,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ObjectError> {
        let mut r = Reader::new(bytes);
        let out = Self::decode(&mut r)?;
        r.finish().map_err(WireError::from)?;
        Ok(out)
    }

    /// Digest over (objID, version, WAPK, sealed body); append entries are
    /// node-side mutable and excluded.
    pub fn digest(&self) -> [u8; 32] {
        record_digest(&self.obj_id, self.version, &self.wapk, &self.sealed_body)
    }
}

pub fn record_digest(
    obj_id: &ObjectId,
    version: u64,
    wapk: &VerifyingKey,
    sealed_body: &[u8],
) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"osn.record.v1");
    h.update(obj_id.as_bytes());
    h.update(version.to_be_bytes());
    h.update(wapk.as_bytes());
    h.update(sealed_body);
    h.finalize().into()
}

/// Keys an owner needs to mint objects.
pub struct OwnerKeys<'a> {
    pub master: &'a MasterKey,
    pub params: &'a PublicParams,
    pub signing: &'a SignatureKeyPair,
}

/// Everything `create_object` mints. The owner caches `key`, `wask`, and
/// `apssk`; readers only ever see `sealed` and `reference`.
pub struct CreatedObject {
    pub sealed: SealedObject,
    pub reference: ObjectReference,
    pub key: SymKey,
    pub wask: SigningKey,
    pub apssk: SigningKey,
}

fn body_sign_message(version: u64, content: &Content, apspk: &VerifyingKey) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_fixed(b"osn.body.v1");
    w.put_u64(version);
    w.put_bytes(&content.to_bytes());
    w.put_fixed(apspk.as_bytes());
    w.into_bytes()
}

fn body_seal_ad(obj_id: &ObjectId, version: u64) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_fixed(b"osn.body-ad.v1");
    w.put_fixed(obj_id.as_bytes());
    w.put_u64(version);
    w.into_bytes()
}

fn wask_seal_ad(obj_id: &ObjectId) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_fixed(b"osn.wask-ad.v1");
    w.put_fixed(obj_id.as_bytes());
    w.into_bytes()
}

fn entry_seal_ad(parent_id: &ObjectId) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_fixed(b"osn.entry-ad.v1");
    w.put_fixed(parent_id.as_bytes());
    w.into_bytes()
}

fn append_sign_message(parent_id: &ObjectId, reference_bytes: &[u8]) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_fixed(b"osn.append.v1");
    w.put_fixed(parent_id.as_bytes());
    w.put_bytes(reference_bytes);
    w.into_bytes()
}

/// Message signed by the WASK to authorize an overwrite at storage nodes.
pub fn update_auth_message(obj_id: &ObjectId, version: u64, digest: &[u8; 32]) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_fixed(b"osn.update.v1");
    w.put_fixed(obj_id.as_bytes());
    w.put_u64(version);
    w.put_fixed(digest);
    w.into_bytes()
}

/// Message signed by the WASK to authorize deletion.
pub fn delete_auth_message(obj_id: &ObjectId) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_fixed(b"osn.delete.v1");
    w.put_fixed(obj_id.as_bytes());
    w.into_bytes()
}

fn encode_body(
    version: u64,
    content: &Content,
    apspk: &VerifyingKey,
    sealed_apssk: &PolicyCiphertext,
    body_signature: &Signature,
    wask_capsule: &[u8],
) -> Vec<u8> {
    let mut w = Writer::new();
    w.put_u64(version);
    w.put_bytes(&content.to_bytes());
    w.put_fixed(apspk.as_bytes());
    w.put_bytes(&sealed_apssk.to_bytes());
    w.put_fixed(&body_signature.to_bytes());
    w.put_bytes(wask_capsule);
    w.into_bytes()
}

struct Body {
    version: u64,
    content: Content,
    apspk: VerifyingKey,
    sealed_apssk: PolicyCiphertext,
    body_signature: Signature,
    wask_capsule: Vec<u8>,
}

fn decode_body(bytes: &[u8]) -> Result<Body, ObjectError> {
    let mut r = Reader::new(bytes);
    let version = r.u64()?;
    let content_raw = r.bytes()?;
    let content = {
        let mut cr = Reader::new(&content_raw);
        let c = Content::decode(&mut cr)?;
        cr.finish().map_err(WireError::from)?;
        c
    };
    let apspk = decode_verifying_key(&r.fixed::<32>()?)?;
    let sealed_apssk = PolicyCiphertext::from_bytes(&r.bytes()?)?;
    let body_signature = Signature::from_bytes(&r.fixed::<64>()?);
    let wask_capsule = r.bytes()?;
    r.finish().map_err(WireError::from)?;
    Ok(Body {
        version,
        content,
        apspk,
        sealed_apssk,
        body_signature,
        wask_capsule,
    })
}

/// Creates and seals a fresh object: random id and K, per-object WAPK/WASK
/// pair, APSPK/APSSK pair with the signing half sealed under the append
/// policy, body signed by the owner's write-policy key, and a reference
/// carrying the policy-encrypted K and the SPK.
pub fn create_object(
    content: Content,
    read_policy: &PolicyTree,
    append_policy: &PolicyTree,
    owner: &OwnerKeys<'_>,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<CreatedObject, ObjectError> {
    let obj_id = ObjectId::random(rng);
    let key = SymKey::random(rng);
    let write_auth = SignatureKeyPair::generate(rng);
    let append_pair = SignatureKeyPair::generate(rng);
    let version = 1u64;

    let sealed_apssk = crypto::encrypt(
        owner.params,
        append_policy,
        &append_pair.signing_key().to_bytes(),
        rng,
    )?;
    let wask_capsule = sym::seal(
        &owner.master.owner_seal_key(),
        &write_auth.signing_key().to_bytes(),
        &wask_seal_ad(&obj_id),
        rng,
    );
    let apspk = append_pair.verifying_key();
    let body_signature = owner
        .signing
        .sign(&body_sign_message(version, &content, &apspk));
    let body = encode_body(
        version,
        &content,
        &apspk,
        &sealed_apssk,
        &body_signature,
        &wask_capsule,
    );
    let sealed_body = sym::seal(&key, &body, &body_seal_ad(&obj_id, version), rng);

    let capsule = KeyCapsule::Policy(crypto::encrypt(owner.params, read_policy, &key.0, rng)?);
    let reference = ObjectReference {
        obj_id,
        capsule,
        spk: Some(owner.signing.verifying_key()),
    };
    let sealed = SealedObject {
        obj_id,
        version,
        wapk: write_auth.verifying_key(),
        sealed_body,
        append_entries: Vec::new(),
    };
    Ok(CreatedObject {
        sealed,
        reference,
        key,
        wask: write_auth.signing_key().clone(),
        apssk: append_pair.signing_key().clone(),
    })
}

/// How the reader obtains K for `open_object`.
pub enum Opener<'a> {
    /// Owner path: K cached at creation time.
    CachedKey(&'a SymKey),
    /// Contact path: decrypt the reference capsule through the proxy chain.
    Contact {
        key: &'a crypto::ContactKey,
        proxies: &'a [&'a dyn ProxyTransformer],
    },
}

/// Opens a sealed object: recovers K, authenticates and decodes the body,
/// verifies the body signature under the SPK, and filters append entries,
/// silently dropping any that fail to unseal or whose signature does not
/// verify under the APSPK.
pub fn open_object(
    sealed: &SealedObject,
    reference: &ObjectReference,
    opener: Opener<'_>,
    parent_spk: Option<&VerifyingKey>,
    rng: &mut impl RngCore,
) -> Result<(ContainerObject, SymKey), ObjectError> {
    if sealed.obj_id != reference.obj_id {
        return Err(ObjectError::IdMismatch);
    }
    let key = match (&reference.capsule, opener) {
        (_, Opener::CachedKey(k)) => k.clone(),
        (KeyCapsule::Bare(k), _) => k.clone(),
        (KeyCapsule::Policy(ct), Opener::Contact { key, proxies }) => SymKey(
            crypto::decrypt(ct, key, proxies, rng).map_err(ObjectError::CapsuleDenied)?,
        ),
    };

    let body_raw = sym::open(
        &key,
        &sealed.sealed_body,
        &body_seal_ad(&sealed.obj_id, sealed.version),
    )
    .map_err(|_| ObjectError::BodyTampered)?;
    let body = decode_body(&body_raw)?;
    if body.version != sealed.version {
        return Err(ObjectError::BodyTampered);
    }
    let spk = reference.resolve_spk(parent_spk)?;
    let message = body_sign_message(body.version, &body.content, &body.apspk);
    if !sig::verify(spk, &message, &body.body_signature) {
        return Err(ObjectError::SignatureInvalid);
    }

    let mut comments = Vec::new();
    let mut rejected = 0usize;
    for entry in &sealed.append_entries {
        match open_append_entry(&key, &sealed.obj_id, &body.apspk, entry) {
            Some(reference) => comments.push(reference),
            None => rejected += 1,
        }
    }

    Ok((
        ContainerObject {
            version: body.version,
            content: body.content,
            apspk: body.apspk,
            sealed_apssk: body.sealed_apssk,
            body_signature: body.body_signature,
            wapk: sealed.wapk,
            wask_capsule: body.wask_capsule,
            comments,
            rejected_appends: rejected,
        },
        key,
    ))
}

fn open_append_entry(
    key: &SymKey,
    parent_id: &ObjectId,
    apspk: &VerifyingKey,
    entry: &[u8],
) -> Option<ObjectReference> {
    let inner = sym::open(key, entry, &entry_seal_ad(parent_id)).ok()?;
    let mut r = Reader::new(&inner);
    let ref_bytes = r.bytes().ok()?;
    let signature = Signature::from_bytes(&r.fixed::<64>().ok()?);
    r.finish().ok()?;
    let reference = ObjectReference::from_bytes(&ref_bytes).ok()?;
    if !sig::verify(apspk, &append_sign_message(parent_id, &ref_bytes), &signature) {
        return None;
    }
    Some(reference)
}

/// Recovers the WASK from an opened object; owner only.
pub fn unseal_wask(
    master: &MasterKey,
    obj_id: &ObjectId,
    wask_capsule: &[u8],
) -> Result<SigningKey, ObjectError> {
    let raw = sym::open(&master.owner_seal_key(), wask_capsule, &wask_seal_ad(obj_id))
        .map_err(|_| ObjectError::BodyTampered)?;
    let seed: [u8; 32] = raw.try_into().map_err(|_| ObjectError::BodyTampered)?;
    Ok(SigningKey::from_bytes(&seed))
}

/// Builds a signed, sealed append entry for `comment_ref` against a parent
/// whose A-policy the appender satisfies (unsealing the APSSK goes through
/// the proxy chain, so revoked appenders fail here).
pub fn build_append_entry(
    parent: &ContainerObject,
    parent_id: &ObjectId,
    parent_key: &SymKey,
    comment_ref: &ObjectReference,
    appender_key: &crypto::ContactKey,
    proxies: &[&dyn ProxyTransformer],
    rng: &mut impl RngCore,
) -> Result<Vec<u8>, ObjectError> {
    let seed = crypto::decrypt(&parent.sealed_apssk, appender_key, proxies, rng)
        .map_err(ObjectError::CapsuleDenied)?;
    let apssk = SigningKey::from_bytes(&seed);
    Ok(build_append_entry_with_key(
        parent_id,
        parent_key,
        &apssk,
        comment_ref,
        rng,
    ))
}

/// Append-entry construction for a caller already holding the APSSK (the
/// owner, or an appender reusing a recovered key).
pub fn build_append_entry_with_key(
    parent_id: &ObjectId,
    parent_key: &SymKey,
    apssk: &SigningKey,
    comment_ref: &ObjectReference,
    rng: &mut impl RngCore,
) -> Vec<u8> {
    let ref_bytes = comment_ref.to_bytes();
    let signature = sig::sign_with(apssk, &append_sign_message(parent_id, &ref_bytes));
    let mut w = Writer::new();
    w.put_bytes(&ref_bytes);
    w.put_fixed(&signature.to_bytes());
    sym::seal(parent_key, &w.into_bytes(), &entry_seal_ad(parent_id), rng)
}

/// Result of an authorized overwrite: the new sealed object plus the
/// detached write-auth signature storage nodes verify against the WAPK.
#[derive(Debug)]
pub struct UpdatedObject {
    pub sealed: SealedObject,
    pub auth_signature: Signature,
    pub apssk: SigningKey,
}

/// Overwrites the object's content: version + 1, fresh body signature, same
/// objID, K, and WAPK. The APSPK/APSSK pair rotates on every overwrite, so
/// entries appended against an earlier version stop verifying.
pub fn update_object(
    old: &SealedObject,
    new_content: Content,
    owner: &OwnerKeys<'_>,
    key: &SymKey,
    wask: &SigningKey,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<UpdatedObject, ObjectError> {
    if wask.verifying_key() != old.wapk {
        return Err(ObjectError::WrongWask);
    }
    let old_body = {
        let raw = sym::open(key, &old.sealed_body, &body_seal_ad(&old.obj_id, old.version))
            .map_err(|_| ObjectError::BodyTampered)?;
        decode_body(&raw)?
    };
    let version = old.version + 1;
    let append_pair = SignatureKeyPair::generate(rng);
    let apspk = append_pair.verifying_key();
    let sealed_apssk = crypto::encrypt(
        owner.params,
        old_body.sealed_apssk.policy(),
        &append_pair.signing_key().to_bytes(),
        rng,
    )?;
    let body_signature = owner
        .signing
        .sign(&body_sign_message(version, &new_content, &apspk));
    let body = encode_body(
        version,
        &new_content,
        &apspk,
        &sealed_apssk,
        &body_signature,
        &old_body.wask_capsule,
    );
    let sealed_body = sym::seal(key, &body, &body_seal_ad(&old.obj_id, version), rng);
    let sealed = SealedObject {
        obj_id: old.obj_id,
        version,
        wapk: old.wapk,
        sealed_body,
        append_entries: old.append_entries.clone(),
    };
    let auth_signature = sig::sign_with(
        wask,
        &update_auth_message(&sealed.obj_id, version, &sealed.digest()),
    );
    Ok(UpdatedObject {
        sealed,
        auth_signature,
        apssk: append_pair.signing_key().clone(),
    })
}

/// Detached signature authorizing deletion at storage nodes.
pub fn sign_delete(wask: &SigningKey, obj_id: &ObjectId) -> Signature {
    sig::sign_with(wask, &delete_auth_message(obj_id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{ProxyState, UserId};
    use crate::policy::AttributeId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::BTreeSet;

    struct Owner {
        master: MasterKey,
        params: PublicParams,
        signing: SignatureKeyPair,
        proxy: ProxyState,
        map: BTreeMap<String, AttributeId>,
    }

    impl Owner {
        fn new(seed: u64) -> (Self, ChaCha20Rng) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let group = crypto::Group::modp_64();
            let (master, map) = MasterKey::generate(
                UserId::from("alice"),
                &["friend", "coworker", "family"],
                group.clone(),
                &mut rng,
            )
            .unwrap();
            let params = master.public_params();
            let signing = SignatureKeyPair::generate(&mut rng);
            let proxy = ProxyState::new(UserId::from("alice"), group);
            (
                Self {
                    master,
                    params,
                    signing,
                    proxy,
                    map,
                },
                rng,
            )
        }

        fn keys(&self) -> OwnerKeys<'_> {
            OwnerKeys {
                master: &self.master,
                params: &self.params,
                signing: &self.signing,
            }
        }

        fn issue(
            &mut self,
            holder: &str,
            names: &[&str],
            rng: &mut ChaCha20Rng,
        ) -> crypto::ContactKey {
            let attrs: BTreeSet<AttributeId> = names.iter().map(|n| self.map[*n]).collect();
            self.master
                .issue_key(&mut self.proxy, UserId::from(holder), &attrs, rng)
                .unwrap()
        }

        fn policy(&self, text: &str) -> PolicyTree {
            crate::policy::parse_policy(text, &self.map).unwrap()
        }
    }

    fn contains_subslice(haystack: &[u8], needle: &[u8]) -> bool {
        haystack.windows(needle.len()).any(|w| w == needle)
    }

    #[test]
    fn contact_opens_what_owner_sealed() {
        let (mut owner, mut rng) = Owner::new(80);
        let created = create_object(
            Content::Status("first post".into()),
            &owner.policy("(friend AND coworker) OR family"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let bob = owner.issue("bob", &["friend", "coworker"], &mut rng);
        let proxies: Vec<&dyn ProxyTransformer> = vec![&owner.proxy];
        let (opened, key) = open_object(
            &created.sealed,
            &created.reference,
            Opener::Contact { key: &bob, proxies: &proxies },
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(opened.version, 1);
        assert!(matches!(opened.content, Content::Status(ref s) if s == "first post"));
        assert_eq!(key, created.key);
        assert!(opened.comments.is_empty());
        assert_eq!(opened.rejected_appends, 0);

        // owner path: cached key, no policy decryption
        let (opened_cached, _) = open_object(
            &created.sealed,
            &created.reference,
            Opener::CachedKey(&created.key),
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(opened_cached.content.to_bytes(), opened.content.to_bytes());
    }

    #[test]
    fn wrong_attributes_denied() {
        let (mut owner, mut rng) = Owner::new(81);
        let created = create_object(
            Content::Status("secret".into()),
            &owner.policy("friend AND family"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let bob = owner.issue("bob", &["friend"], &mut rng);
        let proxies: Vec<&dyn ProxyTransformer> = vec![&owner.proxy];
        let err = open_object(
            &created.sealed,
            &created.reference,
            Opener::Contact { key: &bob, proxies: &proxies },
            None,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ObjectError::CapsuleDenied(CryptoError::PolicyUnsatisfied)
        ));
    }

    #[test]
    fn storage_tamper_fails_before_signature_check() {
        let (mut owner, mut rng) = Owner::new(82);
        let created = create_object(
            Content::Status("x".into()),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let bob = owner.issue("bob", &["friend"], &mut rng);
        let proxies: Vec<&dyn ProxyTransformer> = vec![&owner.proxy];
        let mut tampered = created.sealed.clone();
        let mid = tampered.sealed_body.len() / 2;
        tampered.sealed_body[mid] ^= 1;
        let err = open_object(
            &tampered,
            &created.reference,
            Opener::Contact { key: &bob, proxies: &proxies },
            None,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, ObjectError::BodyTampered));
    }

    #[test]
    fn forged_body_signature_detected_distinctly() {
        let (owner, mut rng) = Owner::new(83);
        // forge: reference carries an unrelated SPK
        let created = create_object(
            Content::Status("x".into()),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let stranger = SignatureKeyPair::generate(&mut rng);
        let mut reference = created.reference.clone();
        reference.spk = Some(stranger.verifying_key());
        let err = open_object(
            &created.sealed,
            &reference,
            Opener::CachedKey(&created.key),
            None,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, ObjectError::SignatureInvalid));
    }

    #[test]
    fn creations_never_share_ids_keys_or_wapks() {
        let (owner, mut rng) = Owner::new(84);
        let read = owner.policy("friend");
        let append = owner.policy("friend");
        let mut ids = BTreeSet::new();
        let mut wapks = BTreeSet::new();
        let mut keys = BTreeSet::new();
        for _ in 0..1000 {
            let c = create_object(
                Content::Status("same text".into()),
                &read,
                &append,
                &owner.keys(),
                &mut rng,
            )
            .unwrap();
            assert!(ids.insert(*c.sealed.obj_id.as_bytes()));
            assert!(wapks.insert(c.sealed.wapk.to_bytes()));
            assert!(keys.insert(*c.key.as_bytes()));
        }
    }

    #[test]
    fn append_entries_filtered_in_order() {
        let (mut owner, mut rng) = Owner::new(85);
        let parent = create_object(
            Content::Status("parent".into()),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let bob = owner.issue("bob", &["friend"], &mut rng);
        let proxies: Vec<&dyn ProxyTransformer> = vec![&owner.proxy];

        let (parent_view, parent_key) = open_object(
            &parent.sealed,
            &parent.reference,
            Opener::Contact { key: &bob, proxies: &proxies },
            None,
            &mut rng,
        )
        .unwrap();

        let mut sealed = parent.sealed.clone();
        let mut valid_ids = Vec::new();
        for i in 0..3 {
            let comment = create_object(
                Content::Status(format!("comment {i}")),
                &owner.policy("friend"),
                &owner.policy("friend"),
                &owner.keys(),
                &mut rng,
            )
            .unwrap();
            let entry = build_append_entry(
                &parent_view,
                &sealed.obj_id,
                &parent_key,
                &comment.reference,
                &bob,
                &proxies,
                &mut rng,
            )
            .unwrap();
            valid_ids.push(comment.sealed.obj_id);
            sealed.append_entries.push(entry);
            // interleave a forged entry: signed by a key that never saw the A-policy
            let mallory = SignatureKeyPair::generate(&mut rng);
            let forged = build_append_entry_with_key(
                &sealed.obj_id,
                &parent_key,
                mallory.signing_key(),
                &comment.reference,
                &mut rng,
            );
            sealed.append_entries.push(forged);
            // and raw garbage
            sealed.append_entries.push(vec![0u8; 40]);
        }

        let (reopened, _) = open_object(
            &sealed,
            &parent.reference,
            Opener::CachedKey(&parent.key),
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(reopened.comments.len(), 3);
        assert_eq!(reopened.rejected_appends, 6);
        let got: Vec<ObjectId> = reopened.comments.iter().map(|r| r.obj_id).collect();
        assert_eq!(got, valid_ids);
    }

    #[test]
    fn stranger_cannot_build_verifying_entry() {
        let (mut owner, mut rng) = Owner::new(86);
        let parent = create_object(
            Content::Status("parent".into()),
            &owner.policy("friend"),
            &owner.policy("family"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        // bob can read (friend) but not append (family)
        let bob = owner.issue("bob", &["friend"], &mut rng);
        let proxies: Vec<&dyn ProxyTransformer> = vec![&owner.proxy];
        let (view, key) = open_object(
            &parent.sealed,
            &parent.reference,
            Opener::Contact { key: &bob, proxies: &proxies },
            None,
            &mut rng,
        )
        .unwrap();
        let comment_ref = parent.reference.clone();
        let err = build_append_entry(
            &view,
            &parent.sealed.obj_id,
            &key,
            &comment_ref,
            &bob,
            &proxies,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, ObjectError::CapsuleDenied(_)));
    }

    #[test]
    fn update_bumps_version_and_signs_for_storage() {
        let (owner, mut rng) = Owner::new(87);
        let created = create_object(
            Content::Status("v1".into()),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let updated = update_object(
            &created.sealed,
            Content::Status("v2".into()),
            &owner.keys(),
            &created.key,
            &created.wask,
            &mut rng,
        )
        .unwrap();
        assert_eq!(updated.sealed.version, 2);
        assert_eq!(updated.sealed.obj_id, created.sealed.obj_id);
        assert_eq!(updated.sealed.wapk, created.sealed.wapk);
        let message = update_auth_message(
            &updated.sealed.obj_id,
            updated.sealed.version,
            &updated.sealed.digest(),
        );
        assert!(sig::verify(&created.sealed.wapk, &message, &updated.auth_signature));

        let (opened, _) = open_object(
            &updated.sealed,
            &created.reference,
            Opener::CachedKey(&created.key),
            None,
            &mut rng,
        )
        .unwrap();
        assert_eq!(opened.version, 2);
        assert!(matches!(opened.content, Content::Status(ref s) if s == "v2"));
    }

    #[test]
    fn updating_without_matching_wask_rejected() {
        let (owner, mut rng) = Owner::new(88);
        let created = create_object(
            Content::Status("v1".into()),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let wrong = SignatureKeyPair::generate(&mut rng);
        let err = update_object(
            &created.sealed,
            Content::Status("evil".into()),
            &owner.keys(),
            &created.key,
            wrong.signing_key(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, ObjectError::WrongWask));
    }

    #[test]
    fn wask_round_trips_through_owner_capsule() {
        let (owner, mut rng) = Owner::new(89);
        let created = create_object(
            Content::Status("x".into()),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let (opened, _) = open_object(
            &created.sealed,
            &created.reference,
            Opener::CachedKey(&created.key),
            None,
            &mut rng,
        )
        .unwrap();
        let wask = unseal_wask(&owner.master, &created.sealed.obj_id, &opened.wask_capsule).unwrap();
        assert_eq!(wask.verifying_key(), created.sealed.wapk);
    }

    #[test]
    fn plaintext_bytes_leak_no_long_term_key_and_no_shared_material() {
        let (owner, mut rng) = Owner::new(90);
        let a = create_object(
            Content::Status("one".into()),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let b = create_object(
            Content::Status("two".into()),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let enc_a = a.sealed.to_bytes();
        let enc_b = b.sealed.to_bytes();
        let owner_vk = owner.signing.verifying_key().to_bytes();
        assert!(!contains_subslice(&enc_a, &owner_vk));
        assert!(!contains_subslice(&enc_b, &owner_vk));
        assert_ne!(a.sealed.wapk, b.sealed.wapk);
        assert!(!contains_subslice(&enc_a, &b.sealed.wapk.to_bytes()));
        assert!(!contains_subslice(&enc_b, &a.sealed.wapk.to_bytes()));
        assert!(!contains_subslice(&enc_a, a.key.as_bytes()));
    }

    #[test]
    fn parent_plaintext_never_exposes_comment_reference() {
        let (mut owner, mut rng) = Owner::new(91);
        let parent = create_object(
            Content::Status("parent".into()),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let bob = owner.issue("bob", &["friend"], &mut rng);
        let proxies: Vec<&dyn ProxyTransformer> = vec![&owner.proxy];
        let (view, key) = open_object(
            &parent.sealed,
            &parent.reference,
            Opener::Contact { key: &bob, proxies: &proxies },
            None,
            &mut rng,
        )
        .unwrap();
        let comment = create_object(
            Content::Status("comment".into()),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let entry = build_append_entry(
            &view,
            &parent.sealed.obj_id,
            &key,
            &comment.reference,
            &bob,
            &proxies,
            &mut rng,
        )
        .unwrap();
        let mut sealed = parent.sealed.clone();
        sealed.append_entries.push(entry);
        let encoded = sealed.to_bytes();
        assert!(!contains_subslice(&encoded, comment.sealed.obj_id.as_bytes()));
    }

    #[test]
    fn reference_wire_round_trip_with_optimizations() {
        let (owner, mut rng) = Owner::new(92);
        let created = create_object(
            Content::Status("x".into()),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        // full reference
        let full = created.reference.clone();
        let round = ObjectReference::from_bytes(&full.to_bytes()).unwrap();
        assert_eq!(round.obj_id, full.obj_id);
        assert!(round.spk.is_some());

        // both optimizations: bare K, inherited SPK
        let slim = ObjectReference {
            obj_id: created.reference.obj_id,
            capsule: KeyCapsule::Bare(created.key.clone()),
            spk: None,
        };
        let round = ObjectReference::from_bytes(&slim.to_bytes()).unwrap();
        assert!(matches!(round.capsule, KeyCapsule::Bare(ref k) if *k == created.key));
        assert!(round.spk.is_none());

        // opening through the slim reference with the parent's SPK
        let (opened, _) = open_object(
            &created.sealed,
            &slim,
            Opener::CachedKey(&created.key),
            Some(&owner.signing.verifying_key()),
            &mut rng,
        )
        .unwrap();
        assert_eq!(opened.version, 1);
        // without a parent SPK the slim reference cannot verify anything
        let err = open_object(
            &created.sealed,
            &slim,
            Opener::CachedKey(&created.key),
            None,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, ObjectError::MissingSpk));
    }

    #[test]
    fn sealed_object_wire_round_trip() {
        let (owner, mut rng) = Owner::new(93);
        let mut created = create_object(
            Content::Profile(BTreeMap::from([("name".into(), "alice".into())])),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        created.sealed.append_entries.push(vec![1, 2, 3]);
        let bytes = created.sealed.to_bytes();
        let decoded = SealedObject::from_bytes(&bytes).unwrap();
        assert_eq!(decoded.obj_id, created.sealed.obj_id);
        assert_eq!(decoded.version, 1);
        assert_eq!(decoded.append_entries, created.sealed.append_entries);
        assert_eq!(decoded.digest(), created.sealed.digest());
    }

    #[test]
    fn apspk_rotation_on_update_invalidates_stale_entries() {
        let (mut owner, mut rng) = Owner::new(94);
        let parent = create_object(
            Content::Status("v1".into()),
            &owner.policy("friend"),
            &owner.policy("friend"),
            &owner.keys(),
            &mut rng,
        )
        .unwrap();
        let bob = owner.issue("bob", &["friend"], &mut rng);
        let proxies: Vec<&dyn ProxyTransformer> = vec![&owner.proxy];
        let (view, key) = open_object(
            &parent.sealed,
            &parent.reference,
            Opener::Contact { key: &bob, proxies: &proxies },
            None,
            &mut rng,
        )
        .unwrap();
        let entry = build_append_entry(
            &view,
            &parent.sealed.obj_id,
            &key,
            &parent.reference,
            &bob,
            &proxies,
            &mut rng,
        )
        .unwrap();
        let mut sealed = parent.sealed.clone();
        sealed.append_entries.push(entry);

        let updated = update_object(
            &sealed,
            Content::Status("v2".into()),
            &owner.keys(),
            &parent.key,
            &parent.wask,
            &mut rng,
        )
        .unwrap();
        let (reopened, _) = open_object(
            &updated.sealed,
            &parent.reference,
            Opener::CachedKey(&parent.key),
            None,
            &mut rng,
        )
        .unwrap();
        // the pre-update entry no longer verifies under the rotated APSPK
        assert_eq!(reopened.comments.len(), 0);
        assert_eq!(reopened.rejected_appends, 1);
    }
}
