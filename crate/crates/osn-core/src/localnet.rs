//! Single-node in-process world: one honest storage node, locally hosted
//! proxies, no modelled latency. Backs the command-line client and the
//! agent-level tests; the simulator provides the full replicated overlay
//! behind the same trait.

use std::cell::RefCell;
use std::collections::BTreeMap;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::agent::{NetStats, OsnNet};
use crate::crypto::{CryptoError, GroupElement, ProxyState, Scalar, UserId};
use crate::dht::{
    GetOutcome, Message, MessageBody, NodeId, NodeRole, PutOutcome, RecordData, RecordFull,
    StorageNode,
};
use crate::objects::ObjectId;
use crate::policy::AttributeId;

#[derive(Serialize, Deserialize)]
struct LocalNetInner {
    node: StorageNode,
    client_id: NodeId,
    proxies: BTreeMap<UserId, ProxyState>,
    stats: NetStats,
    next_request_id: u64,
}

/// In-process [`OsnNet`] implementation.
#[derive(Serialize, Deserialize)]
pub struct LocalNet {
    inner: RefCell<LocalNetInner>,
}

impl LocalNet {
    pub fn new(seed: u64) -> Self {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let node_id = NodeId::random(&mut rng);
        let client_id = NodeId::random(&mut rng);
        Self {
            inner: RefCell::new(LocalNetInner {
                node: StorageNode::new(node_id, 20, NodeRole::Honest),
                client_id,
                proxies: BTreeMap::new(),
                stats: NetStats::default(),
                next_request_id: 1,
            }),
        }
    }

    fn send(&self, body: MessageBody) -> Option<Message> {
        let mut inner = self.inner.borrow_mut();
        let request_id = inner.next_request_id;
        inner.next_request_id += 1;
        let from = inner.client_id;
        let msg = Message {
            request_id,
            sender: from,
            body,
        };
        inner.node.handle(from, &msg)
    }

    fn outcome(reply: Option<Message>) -> PutOutcome {
        let mut out = PutOutcome::default();
        match reply {
            Some(Message { body: MessageBody::Ack, .. }) => out.acks += 1,
            Some(_) => out.refusals += 1,
            None => out.timeouts += 1,
        }
        out
    }

    /// Direct record inspection, for tests.
    pub fn with_node<T>(&self, f: impl FnOnce(&StorageNode) -> T) -> T {
        f(&self.inner.borrow().node)
    }

    pub fn with_proxy<T>(&self, user: &UserId, f: impl FnOnce(&ProxyState) -> T) -> Option<T> {
        self.inner.borrow().proxies.get(user).map(f)
    }
}

impl OsnNet for LocalNet {
    fn register_proxy(&self, state: ProxyState) {
        let mut inner = self.inner.borrow_mut();
        inner.proxies.insert(state.owner().clone(), state);
    }

    fn proxy_install(
        &self,
        authority: &UserId,
        holder: &UserId,
        entries: Vec<(AttributeId, Scalar)>,
    ) {
        let mut inner = self.inner.borrow_mut();
        if let Some(proxy) = inner.proxies.get_mut(authority) {
            for (attr, unblind) in entries {
                proxy.install(holder.clone(), attr, unblind);
            }
        }
    }

    fn proxy_revoke(
        &self,
        authority: &UserId,
        holder: &UserId,
        attrs: &std::collections::BTreeSet<AttributeId>,
    ) {
        let mut inner = self.inner.borrow_mut();
        if let Some(proxy) = inner.proxies.get_mut(authority) {
            proxy.revoke(holder, attrs);
        }
    }

    fn proxy_transform(
        &self,
        _requester: &UserId,
        authority: &UserId,
        holder: &UserId,
        attr: AttributeId,
        element: &GroupElement,
    ) -> Result<GroupElement, CryptoError> {
        let mut inner = self.inner.borrow_mut();
        inner.stats.proxy_rounds += 1;
        let proxy = inner.proxies.get(authority).ok_or_else(|| CryptoError::Revoked {
            holder: holder.clone(),
            attr,
        })?;
        proxy.transform(holder, attr, element)
    }

    fn dht_put_new(&self, _user: &UserId, record: RecordFull) -> PutOutcome {
        self.inner.borrow_mut().stats.put_news += 1;
        Self::outcome(self.send(MessageBody::PutNew { record }))
    }

    fn dht_put_update(&self, _user: &UserId, record: RecordData) -> PutOutcome {
        self.inner.borrow_mut().stats.put_updates += 1;
        Self::outcome(self.send(MessageBody::PutUpdate { record }))
    }

    fn dht_append(&self, _user: &UserId, obj_id: ObjectId, entry: Vec<u8>) -> PutOutcome {
        self.inner.borrow_mut().stats.appends += 1;
        Self::outcome(self.send(MessageBody::Append { obj_id, entry }))
    }

    fn dht_delete(
        &self,
        _user: &UserId,
        obj_id: ObjectId,
        signature: crate::crypto::Signature,
    ) -> PutOutcome {
        self.inner.borrow_mut().stats.deletes += 1;
        Self::outcome(self.send(MessageBody::Delete { obj_id, signature }))
    }

    fn dht_get(&self, _user: &UserId, obj_id: ObjectId) -> GetOutcome {
        self.inner.borrow_mut().stats.gets += 1;
        match self.send(MessageBody::Get { obj_id }) {
            Some(Message {
                body: MessageBody::Record { record: Some(full) },
                ..
            }) => GetOutcome {
                appends: full.appends.clone(),
                candidates: vec![full],
                responders: 1,
            },
            Some(_) => GetOutcome {
                candidates: Vec::new(),
                appends: Vec::new(),
                responders: 1,
            },
            None => GetOutcome {
                candidates: Vec::new(),
                appends: Vec::new(),
                responders: 0,
            },
        }
    }

    fn note_policy_decrypt(&self) {
        self.inner.borrow_mut().stats.policy_decrypts += 1;
    }

    fn stats(&self) -> NetStats {
        self.inner.borrow().stats
    }

    fn reset_stats(&self) {
        self.inner.borrow_mut().stats = NetStats::default();
    }
}
