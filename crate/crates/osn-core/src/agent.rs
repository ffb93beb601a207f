//! User-level workflows: join, establish contacts, post, comment, view
//! walls and newsfeeds, revoke.
//!
//! An account composes the lower layers: the user is their own key
//! authority, their profile/wall/root objects live in the DHT, and every
//! view of another user's content walks reference chains, decrypting key
//! capsules through the issuer's proxy. Users cache the symmetric keys of
//! objects they created, so viewing one's own content costs no policy
//! decryptions; viewing others' costs one per fetched object.

use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    self, ContactKey, CryptoError, Group, GroupElement, MasterKey, PolicyCiphertext, ProxyState,
    ProxyTransformer, PublicParams, Scalar, Signature, SignatureKeyPair, SigningKey, SymKey,
    UserId,
};
use crate::dht::{GetOutcome, PutOutcome, RecordData, RecordFull};
use crate::objects::{
    self, Content, ContainerObject, KeyCapsule, ObjectError, ObjectId, ObjectReference, Opener,
    OwnerKeys, SealedObject,
};
use crate::policy::{parse_policy, AttributeId, ParseError, PolicyTree};

/// Operation counters kept by a network implementation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetStats {
    pub gets: u64,
    pub put_news: u64,
    pub put_updates: u64,
    pub appends: u64,
    pub deletes: u64,
    pub policy_decrypts: u64,
    pub proxy_rounds: u64,
}

impl NetStats {
    pub fn puts(&self) -> u64 {
        self.put_news + self.put_updates
    }
}

/// Everything an account needs from the outside world: storage operations
/// issued from this user's node, and the proxy directory. Implementations
/// use interior mutability; the local world and the network simulator both
/// implement this.
pub trait OsnNet {
    fn register_proxy(&self, state: ProxyState);
    fn proxy_install(
        &self,
        authority: &UserId,
        holder: &UserId,
        entries: Vec<(AttributeId, Scalar)>,
    );
    fn proxy_revoke(&self, authority: &UserId, holder: &UserId, attrs: &BTreeSet<AttributeId>);
    fn proxy_transform(
        &self,
        requester: &UserId,
        authority: &UserId,
        holder: &UserId,
        attr: AttributeId,
        element: &GroupElement,
    ) -> Result<GroupElement, CryptoError>;

    fn dht_put_new(&self, user: &UserId, record: RecordFull) -> PutOutcome;
    fn dht_put_update(&self, user: &UserId, record: RecordData) -> PutOutcome;
    fn dht_append(&self, user: &UserId, obj_id: ObjectId, entry: Vec<u8>) -> PutOutcome;
    fn dht_delete(&self, user: &UserId, obj_id: ObjectId, signature: Signature) -> PutOutcome;
    fn dht_get(&self, user: &UserId, obj_id: ObjectId) -> GetOutcome;

    fn note_policy_decrypt(&self);
    fn stats(&self) -> NetStats;
    fn reset_stats(&self);
}

/// Proxy handle routing transform requests through the network.
pub struct NetProxy<'a> {
    pub net: &'a dyn OsnNet,
    pub requester: UserId,
    pub authority: UserId,
}

impl ProxyTransformer for NetProxy<'_> {
    fn transform(
        &self,
        holder: &UserId,
        attr: AttributeId,
        element: &GroupElement,
    ) -> Result<GroupElement, CryptoError> {
        self.net
            .proxy_transform(&self.requester, &self.authority, holder, attr, element)
    }
}

fn chain_proxies<'a>(net: &'a dyn OsnNet, requester: &UserId, key: &ContactKey) -> Vec<NetProxy<'a>> {
    key.chain()
        .iter()
        .map(|hop| NetProxy {
            net,
            requester: requester.clone(),
            authority: hop.authority.clone(),
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("policy: {0}")]
    Policy(#[from] ParseError),
    #[error("object: {0}")]
    Object(#[from] ObjectError),
    #[error("crypto: {0}")]
    Crypto(#[from] CryptoError),
    #[error("no contact book entry for {0}")]
    UnknownContact(UserId),
    #[error("no contact key from {0}")]
    NoKeyFrom(UserId),
    #[error("attribute name {0:?} not in this account's namespace")]
    UnknownAttributeName(String),
    #[error("view: {0}")]
    View(#[from] ViewError),
}

/// Why a particular object could not be rendered.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ViewError {
    #[error("no replica returned the object")]
    NotFound,
    #[error("no held contact key satisfies the read policy")]
    NoKey,
    #[error("read policy denied: {0}")]
    Denied(CryptoError),
    #[error("every candidate failed authentication")]
    Tampered,
    #[error("body signature invalid")]
    BadSignature,
    #[error("reference lacks an SPK")]
    MissingSpk,
    #[error("object has an unexpected content shape")]
    WrongShape,
    #[error("wall is empty")]
    EmptyWall,
}

/// Per-contact state: their root reference, the key they issued to us, and
/// the attributes we issued to them.
#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct Contact {
    pub root_ref: Option<ObjectReference>,
    pub key_from_them: Option<ContactKey>,
    pub attrs_issued_to_them: BTreeSet<AttributeId>,
}

/// Policy text applied to the objects an account creates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AccountPolicies {
    pub root_read: String,
    pub profile_read: String,
    pub wall_read: String,
    pub wall_append: String,
    pub status_read: String,
    pub status_append: String,
}

impl Default for AccountPolicies {
    fn default() -> Self {
        Self {
            root_read: "friend".into(),
            profile_read: "friend".into(),
            wall_read: "friend".into(),
            wall_append: "friend".into(),
            status_read: "friend".into(),
            status_append: "friend".into(),
        }
    }
}

#[derive(Clone, Serialize, Deserialize)]
pub struct UserAccount {
    pub user_id: UserId,
    pub master: MasterKey,
    pub params: PublicParams,
    pub attr_names: BTreeMap<String, AttributeId>,
    pub signing: SignatureKeyPair,
    pub policies: AccountPolicies,
    pub root_ref: ObjectReference,
    pub profile_ref: ObjectReference,
    pub wall_ref: ObjectReference,
    /// Current wall object, maintained locally so posting needs no fetch.
    pub wall_sealed: SealedObject,
    pub wall_items: Vec<ObjectReference>,
    pub contacts: BTreeMap<UserId, Contact>,
    /// Symmetric keys of objects this user created; never others'.
    pub key_cache: BTreeMap<ObjectId, SymKey>,
    pub wask_cache: BTreeMap<ObjectId, SigningKey>,
    pub apssk_cache: BTreeMap<ObjectId, SigningKey>,
}

impl UserAccount {
    pub fn owner_keys(&self) -> OwnerKeys<'_> {
        OwnerKeys {
            master: &self.master,
            params: &self.params,
            signing: &self.signing,
        }
    }

    pub fn parse_policy(&self, text: &str) -> Result<PolicyTree, ParseError> {
        parse_policy(text, &self.attr_names)
    }

    pub fn resolve_attrs(&self, names: &[&str]) -> Result<BTreeSet<AttributeId>, AgentError> {
        names
            .iter()
            .map(|n| {
                self.attr_names
                    .get(*n)
                    .copied()
                    .ok_or_else(|| AgentError::UnknownAttributeName(n.to_string()))
            })
            .collect()
    }

    /// Picks the contact key able to open a policy ciphertext. Attribute ids
    /// are globally unique per authority, so at most one contact matches.
    pub fn select_key_for(&self, ct: &PolicyCiphertext) -> Option<(&UserId, &ContactKey)> {
        self.contacts.iter().find_map(|(id, contact)| {
            let key = contact.key_from_them.as_ref()?;
            ct.policy().select_satisfying(&key.attributes())?;
            Some((id, key))
        })
    }

    fn cache_created(&mut self, created: &objects::CreatedObject) {
        let id = created.sealed.obj_id;
        self.key_cache.insert(id, created.key.clone());
        self.wask_cache.insert(id, created.wask.clone());
        self.apssk_cache.insert(id, created.apssk.clone());
    }
}

/// Creates an account: master and signing keys, an empty proxy registered
/// with the network, and profile, wall, and root objects stored in the DHT.
/// The root reference is what the user hands to contacts out of band.
pub fn join(
    net: &dyn OsnNet,
    user_id: UserId,
    attribute_names: &[&str],
    policies: AccountPolicies,
    group: Group,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<UserAccount, AgentError> {
    let (master, attr_names) =
        MasterKey::generate(user_id.clone(), attribute_names, group.clone(), rng)?;
    let params = master.public_params();
    let signing = SignatureKeyPair::generate(rng);
    net.register_proxy(ProxyState::new(user_id.clone(), group));

    let parse = |text: &str| parse_policy(text, &attr_names);
    let profile_read = parse(&policies.profile_read)?;
    let wall_read = parse(&policies.wall_read)?;
    let wall_append = parse(&policies.wall_append)?;
    let root_read = parse(&policies.root_read)?;

    let owner = OwnerKeys {
        master: &master,
        params: &params,
        signing: &signing,
    };

    let mut profile_fields = BTreeMap::new();
    profile_fields.insert("name".to_string(), user_id.to_string());
    let profile = objects::create_object(
        Content::Profile(profile_fields),
        &profile_read,
        &wall_append,
        &owner,
        rng,
    )?;
    let wall = objects::create_object(
        Content::Wall(Vec::new()),
        &wall_read,
        &wall_append,
        &owner,
        rng,
    )?;
    let root = objects::create_object(
        Content::Root {
            profile: Box::new(profile.reference.clone()),
            wall: Box::new(wall.reference.clone()),
        },
        &root_read,
        &wall_append,
        &owner,
        rng,
    )?;

    for created in [&profile, &wall, &root] {
        net.dht_put_new(
            &user_id,
            crate::dht::record_from_sealed(&created.sealed, None),
        );
    }

    let mut account = UserAccount {
        user_id,
        master,
        params,
        attr_names,
        signing,
        policies,
        root_ref: root.reference.clone(),
        profile_ref: profile.reference.clone(),
        wall_ref: wall.reference.clone(),
        wall_sealed: wall.sealed.clone(),
        wall_items: Vec::new(),
        contacts: BTreeMap::new(),
        key_cache: BTreeMap::new(),
        wask_cache: BTreeMap::new(),
        apssk_cache: BTreeMap::new(),
    };
    account.cache_created(&profile);
    account.cache_created(&wall);
    account.cache_created(&root);
    Ok(account)
}

/// One-directional relationship establishment: the issuer grants `attrs` to
/// the peer and both sides exchange root references. Each side decides
/// independently what to issue, so relationships are asymmetric. Calling it
/// again re-issues: old keys (and delegations built on them) die.
pub fn add_contact(
    net: &dyn OsnNet,
    issuer: &mut UserAccount,
    peer: &mut UserAccount,
    attr_names: &[&str],
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<(), AgentError> {
    let attrs = issuer.resolve_attrs(attr_names)?;
    let (key, entries) = issuer
        .master
        .issue_key_parts(peer.user_id.clone(), &attrs, rng)?;
    net.proxy_install(&issuer.user_id, &peer.user_id, entries);

    let entry = issuer.contacts.entry(peer.user_id.clone()).or_default();
    entry.root_ref = Some(peer.root_ref.clone());
    entry.attrs_issued_to_them = attrs;

    let entry = peer.contacts.entry(issuer.user_id.clone()).or_default();
    entry.root_ref = Some(issuer.root_ref.clone());
    entry.key_from_them = Some(key);
    Ok(())
}

/// Removes attributes from a contact at the proxy. Takes effect for every
/// ciphertext immediately, including objects created before the revocation;
/// nothing is re-encrypted.
pub fn revoke_contact(
    net: &dyn OsnNet,
    account: &mut UserAccount,
    peer: &UserId,
    attr_names: &[&str],
) -> Result<(), AgentError> {
    let attrs = account.resolve_attrs(attr_names)?;
    net.proxy_revoke(&account.user_id, peer, &attrs);
    if let Some(contact) = account.contacts.get_mut(peer) {
        for attr in &attrs {
            contact.attrs_issued_to_them.remove(attr);
        }
    }
    Ok(())
}

/// Creates a status object, inserts it, and prepends its reference to the
/// wall via an authorized overwrite. Costs exactly one PUT_NEW and one
/// PUT_UPDATE regardless of wall size.
pub fn post_status(
    net: &dyn OsnNet,
    account: &mut UserAccount,
    text: &str,
    read_policy: &str,
    append_policy: &str,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<ObjectId, AgentError> {
    let r_policy = account.parse_policy(read_policy)?;
    let a_policy = account.parse_policy(append_policy)?;
    let status = objects::create_object(
        Content::Status(text.to_string()),
        &r_policy,
        &a_policy,
        &account.owner_keys(),
        rng,
    )?;
    net.dht_put_new(
        &account.user_id,
        crate::dht::record_from_sealed(&status.sealed, None),
    );
    let status_id = status.sealed.obj_id;
    account.cache_created(&status);

    // newest first
    let mut items = Vec::with_capacity(account.wall_items.len() + 1);
    items.push(status.reference.clone());
    items.extend(account.wall_items.iter().cloned());
    update_wall(net, account, Content::Wall(items.clone()), rng)?;
    account.wall_items = items;
    Ok(status_id)
}

fn update_wall(
    net: &dyn OsnNet,
    account: &mut UserAccount,
    content: Content,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<(), AgentError> {
    let sealed = account.wall_sealed.clone();
    let obj_id = sealed.obj_id;
    let key = account.key_cache[&obj_id].clone();
    let wask = account.wask_cache[&obj_id].clone();
    let updated = objects::update_object(&sealed, content, &account.owner_keys(), &key, &wask, rng)?;
    net.dht_put_update(
        &account.user_id,
        RecordData {
            obj_id,
            version: updated.sealed.version,
            wapk: updated.sealed.wapk,
            blob: updated.sealed.sealed_body.clone(),
            update_sig: Some(updated.auth_signature),
        },
    );
    account.apssk_cache.insert(obj_id, updated.apssk.clone());
    account.wall_sealed = updated.sealed;
    Ok(())
}

/// Handle onto an opened object another operation can target.
#[derive(Clone, Debug)]
pub struct ParentHandle {
    pub obj_id: ObjectId,
    pub key: SymKey,
    pub object: ContainerObject,
}

/// Creates a comment object with its own read policy, then appends a signed
/// reference to it onto the parent. The appender must satisfy the parent's
/// A-policy to unseal the APSSK (revoked appenders fail before any entry is
/// produced); readers of the comment must satisfy both the parent's and the
/// comment's read policies.
pub fn comment(
    net: &dyn OsnNet,
    account: &mut UserAccount,
    parent: &ParentHandle,
    text: &str,
    read_policy: &str,
    append_policy: &str,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<ObjectId, AgentError> {
    let r_policy = account.parse_policy(read_policy)?;
    let a_policy = account.parse_policy(append_policy)?;
    let comment_obj = objects::create_object(
        Content::Status(text.to_string()),
        &r_policy,
        &a_policy,
        &account.owner_keys(),
        rng,
    )?;

    let entry = if let Some(apssk) = account.apssk_cache.get(&parent.obj_id) {
        // own parent: the signing key is cached
        objects::build_append_entry_with_key(
            &parent.obj_id,
            &parent.key,
            apssk,
            &comment_obj.reference,
            rng,
        )
    } else {
        let (authority, key) = account
            .select_key_for(&parent.object.sealed_apssk)
            .map(|(a, k)| (a.clone(), k.clone()))
            .ok_or(ViewError::NoKey)?;
        let _ = authority;
        let proxies = chain_proxies(net, &account.user_id, &key);
        let proxy_refs: Vec<&dyn ProxyTransformer> =
            proxies.iter().map(|p| p as &dyn ProxyTransformer).collect();
        net.note_policy_decrypt();
        objects::build_append_entry(
            &parent.object,
            &parent.obj_id,
            &parent.key,
            &comment_obj.reference,
            &key,
            &proxy_refs,
            rng,
        )?
    };

    net.dht_put_new(
        &account.user_id,
        crate::dht::record_from_sealed(&comment_obj.sealed, None),
    );
    let comment_id = comment_obj.sealed.obj_id;
    account.cache_created(&comment_obj);
    net.dht_append(&account.user_id, parent.obj_id, entry);
    Ok(comment_id)
}

/// Adds a reference to an existing object onto one's own wall. When the
/// account created the object (its key is cached), the key capsule is
/// re-encrypted under `read_policy` over this account's attributes: the same
/// object becomes reachable under a different read policy from this wall.
/// Otherwise the original capsule is re-shared unchanged.
pub fn cross_post(
    net: &dyn OsnNet,
    account: &mut UserAccount,
    target: &ObjectReference,
    read_policy: &str,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<(), AgentError> {
    let capsule = match account.key_cache.get(&target.obj_id) {
        Some(key) => {
            let policy = account.parse_policy(read_policy)?;
            KeyCapsule::Policy(crypto::encrypt(&account.params, &policy, &key.0, rng)?)
        }
        None => target.capsule.clone(),
    };
    let reference = ObjectReference {
        obj_id: target.obj_id,
        capsule,
        spk: target.spk,
    };
    let mut items = Vec::with_capacity(account.wall_items.len() + 1);
    items.push(reference);
    items.extend(account.wall_items.iter().cloned());
    update_wall(net, account, Content::Wall(items.clone()), rng)?;
    account.wall_items = items;
    Ok(())
}

/// A successfully rendered item.
#[derive(Clone, Debug)]
pub struct ViewedItem {
    pub handle: ParentHandle,
    /// Contact whose key opened the capsule; `None` when a cached key did.
    pub via: Option<UserId>,
    pub comments: Vec<ViewedItem>,
    pub skipped_comments: Vec<(ObjectId, ViewError)>,
}

impl ViewedItem {
    pub fn text(&self) -> Option<&str> {
        match &self.handle.object.content {
            Content::Status(s) => Some(s),
            _ => None,
        }
    }
}

/// Rendered wall: statuses posted by the owner (wall content references)
/// and posts appended by contacts, each with its readable comments.
#[derive(Debug)]
pub struct WallView {
    pub wall: ParentHandle,
    pub statuses: Vec<ViewedItem>,
    pub posts: Vec<ViewedItem>,
    pub skipped: Vec<(ObjectId, ViewError)>,
}

impl WallView {
    pub fn failures(&self) -> usize {
        self.skipped.len()
            + self
                .statuses
                .iter()
                .chain(self.posts.iter())
                .map(|i| i.skipped_comments.len())
                .sum::<usize>()
    }
}

struct Viewer<'a> {
    net: &'a dyn OsnNet,
    account: &'a UserAccount,
    rng: std::cell::RefCell<&'a mut dyn RngCore>,
}

impl Viewer<'_> {
    /// Fetches all replica candidates and opens the freshest authentic one.
    /// The key capsule is decrypted once, up front; candidates that fail
    /// authentication are skipped in favor of older authentic ones.
    fn fetch_open(
        &self,
        reference: &ObjectReference,
        parent_spk: Option<&ed25519_dalek::VerifyingKey>,
    ) -> Result<(ContainerObject, SymKey, Option<UserId>), ViewError> {
        let outcome = self.net.dht_get(&self.account.user_id, reference.obj_id);
        if outcome.candidates.is_empty() {
            return Err(ViewError::NotFound);
        }
        let (key, via) = self.resolve_key(reference)?;

        let mut rng = self.rng.borrow_mut();
        let mut last_err = ViewError::Tampered;
        for candidate in &outcome.candidates {
            let mut sealed = candidate.to_sealed();
            // union of append entries across replicas
            sealed.append_entries = outcome.appends.clone();
            match objects::open_object(
                &sealed,
                reference,
                Opener::CachedKey(&key),
                parent_spk,
                &mut *rng,
            ) {
                Ok((object, key)) => return Ok((object, key, via)),
                Err(ObjectError::BodyTampered) => last_err = ViewError::Tampered,
                Err(ObjectError::SignatureInvalid) => last_err = ViewError::BadSignature,
                Err(ObjectError::MissingSpk) => return Err(ViewError::MissingSpk),
                Err(_) => last_err = ViewError::Tampered,
            }
        }
        Err(last_err)
    }

    fn resolve_key(
        &self,
        reference: &ObjectReference,
    ) -> Result<(SymKey, Option<UserId>), ViewError> {
        if let Some(key) = self.account.key_cache.get(&reference.obj_id) {
            return Ok((key.clone(), None));
        }
        match &reference.capsule {
            KeyCapsule::Bare(key) => Ok((key.clone(), None)),
            KeyCapsule::Policy(ct) => {
                let (authority, key) = self
                    .account
                    .select_key_for(ct)
                    .ok_or(ViewError::NoKey)?;
                let proxies = chain_proxies(self.net, &self.account.user_id, key);
                let proxy_refs: Vec<&dyn ProxyTransformer> =
                    proxies.iter().map(|p| p as &dyn ProxyTransformer).collect();
                self.net.note_policy_decrypt();
                let mut rng = self.rng.borrow_mut();
                let payload = crypto::decrypt(ct, key, &proxy_refs, &mut *rng)
                    .map_err(ViewError::Denied)?;
                Ok((SymKey(payload), Some(authority.clone())))
            }
        }
    }

    fn view_item(
        &self,
        reference: &ObjectReference,
        parent_spk: Option<&ed25519_dalek::VerifyingKey>,
        fetch_comments: bool,
    ) -> Result<ViewedItem, ViewError> {
        let (object, key, via) = self.fetch_open(reference, parent_spk)?;
        let mut comments = Vec::new();
        let mut skipped_comments = Vec::new();
        if fetch_comments {
            let comment_refs = object.comments.clone();
            for comment_ref in &comment_refs {
                match self.view_item(comment_ref, reference.spk.as_ref().or(parent_spk), false) {
                    Ok(item) => comments.push(item),
                    Err(err) => skipped_comments.push((comment_ref.obj_id, err)),
                }
            }
        }
        Ok(ViewedItem {
            handle: ParentHandle {
                obj_id: reference.obj_id,
                key,
                object,
            },
            via,
            comments,
            skipped_comments,
        })
    }
}

/// Resolves a user's wall through their root object and renders every
/// readable item. Unreadable items are skipped with a per-item reason; the
/// wall itself failing (unreachable or read-policy unsatisfied) is an error.
pub fn view_wall(
    net: &dyn OsnNet,
    viewer: &UserAccount,
    target: &UserId,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<WallView, AgentError> {
    let root_ref = if target == &viewer.user_id {
        viewer.root_ref.clone()
    } else {
        viewer
            .contacts
            .get(target)
            .and_then(|c| c.root_ref.clone())
            .ok_or_else(|| AgentError::UnknownContact(target.clone()))?
    };
    let v = Viewer {
        net,
        account: viewer,
        rng: std::cell::RefCell::new(rng),
    };

    let (root_obj, _, _) = v.fetch_open(&root_ref, None).map_err(AgentError::View)?;
    let Content::Root { wall, .. } = &root_obj.content else {
        return Err(ViewError::WrongShape.into());
    };
    let wall_item = v
        .view_item(wall, root_ref.spk.as_ref(), false)
        .map_err(AgentError::View)?;
    let Content::Wall(item_refs) = wall_item.handle.object.content.clone() else {
        return Err(ViewError::WrongShape.into());
    };

    let mut statuses = Vec::new();
    let mut posts = Vec::new();
    let mut skipped = Vec::new();
    for item_ref in &item_refs {
        match v.view_item(item_ref, wall.spk.as_ref(), true) {
            Ok(item) => statuses.push(item),
            Err(err) => skipped.push((item_ref.obj_id, err)),
        }
    }
    for post_ref in &wall_item.handle.object.comments.clone() {
        match v.view_item(post_ref, wall.spk.as_ref(), true) {
            Ok(item) => posts.push(item),
            Err(err) => skipped.push((post_ref.obj_id, err)),
        }
    }
    Ok(WallView {
        wall: wall_item.handle,
        statuses,
        posts,
        skipped,
    })
}

/// One newsfeed row: a contact and their latest status (or why it is
/// missing). Feed construction is per-contact fault isolated.
#[derive(Debug)]
pub struct FeedEntry {
    pub contact: UserId,
    pub item: Result<ViewedItem, ViewError>,
}

/// Fetches the latest status of every contact: root, wall, then the first
/// wall reference. Three fetches and at most three policy decryptions per
/// contact.
pub fn view_newsfeed(
    net: &dyn OsnNet,
    viewer: &UserAccount,
    rng: &mut (impl RngCore + CryptoRng),
) -> Vec<FeedEntry> {
    let v = Viewer {
        net,
        account: viewer,
        rng: std::cell::RefCell::new(rng),
    };
    let mut feed = Vec::new();
    for (contact_id, contact) in &viewer.contacts {
        let Some(root_ref) = &contact.root_ref else {
            continue;
        };
        let item = (|| {
            let (root_obj, _, _) = v.fetch_open(root_ref, None)?;
            let Content::Root { wall, .. } = &root_obj.content else {
                return Err(ViewError::WrongShape);
            };
            let (wall_obj, _, _) = v.fetch_open(wall, root_ref.spk.as_ref())?;
            let Content::Wall(items) = &wall_obj.content else {
                return Err(ViewError::WrongShape);
            };
            let latest = items.first().ok_or(ViewError::EmptyWall)?;
            v.view_item(latest, wall.spk.as_ref(), false)
        })();
        feed.push(FeedEntry {
            contact: contact_id.clone(),
            item,
        });
    }
    feed
}
