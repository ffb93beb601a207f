//! Storage node state machine.
//!
//! Each node processes one request at a time and returns at most one
//! response. Honest nodes enforce the extended storage contract:
//!
//! * first write claims the id and pins the WAPK for the record's lifetime;
//! * overwrites and deletes need a signature under the stored WAPK, and
//!   overwrites must strictly increase the version;
//! * appends are unauthenticated, size-limited, and deduplicated — readers
//!   filter forged entries;
//! * a higher version carried by a maintenance push is adopted only when its
//!   forwarded write-auth signature verifies, so replicas converge on the
//!   newest authorized version without trusting each other.
//!
//! Malicious roles sabotage storage operations only; routing queries are
//! answered honestly (secure routing is delegated to the overlay).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::messages::{entry_digest, Message, MessageBody, RecordData, RecordFull, RefuseReason};
use super::node_id::NodeId;
use super::routing::RoutingTable;
use crate::crypto::sig;
use crate::objects::{delete_auth_message, update_auth_message, ObjectId};

/// Default cap on a single append entry.
pub const DEFAULT_APPEND_LIMIT: usize = 64 * 1024;

/// A storage node's view of one object.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoredRecord {
    pub data: RecordData,
    pub appends: Vec<Vec<u8>>,
    append_digests: BTreeSet<[u8; 32]>,
}

impl StoredRecord {
    pub fn new(full: RecordFull) -> Self {
        let mut record = Self {
            data: full.data,
            appends: Vec::new(),
            append_digests: BTreeSet::new(),
        };
        for entry in full.appends {
            record.push_append(entry);
        }
        record
    }

    pub fn to_full(&self) -> RecordFull {
        RecordFull {
            data: self.data.clone(),
            appends: self.appends.clone(),
        }
    }

    /// Adds an entry unless an identical one is already present.
    pub fn push_append(&mut self, entry: Vec<u8>) -> bool {
        if self.append_digests.insert(entry_digest(&entry)) {
            self.appends.push(entry);
            true
        } else {
            false
        }
    }
}

/// Sabotage profile of a malicious node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaliciousBehavior {
    /// Ignores storage requests entirely.
    Drop,
    /// Acknowledges overwrites without applying them and keeps serving the
    /// version it has.
    StaleReplay,
    /// Refuses every append.
    RefuseAppend,
    /// Serves records with a corrupted body and an inflated version.
    Garbage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeRole {
    Honest,
    Malicious(MaliciousBehavior),
}

impl NodeRole {
    pub fn is_honest(&self) -> bool {
        matches!(self, NodeRole::Honest)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StorageNode {
    pub id: NodeId,
    pub routing: RoutingTable,
    pub store: BTreeMap<ObjectId, StoredRecord>,
    pub role: NodeRole,
    pub append_limit: usize,
}

impl StorageNode {
    pub fn new(id: NodeId, bucket_size: usize, role: NodeRole) -> Self {
        Self {
            id,
            routing: RoutingTable::new(id, bucket_size),
            store: BTreeMap::new(),
            role,
            append_limit: DEFAULT_APPEND_LIMIT,
        }
    }

    /// Processes one request; `None` means no response (dropped).
    pub fn handle(&mut self, from: NodeId, msg: &Message) -> Option<Message> {
        self.routing.observe(from);
        let body = match (&self.role, msg.body.is_storage_op()) {
            (NodeRole::Honest, _) | (_, false) => self.handle_honest(&msg.body)?,
            (NodeRole::Malicious(behavior), true) => {
                self.handle_malicious(*behavior, &msg.body)?
            }
        };
        Some(Message {
            request_id: msg.request_id,
            sender: self.id,
            body,
        })
    }

    fn handle_honest(&mut self, body: &MessageBody) -> Option<MessageBody> {
        Some(match body {
            MessageBody::Ping => MessageBody::Pong,
            MessageBody::FindNode { target } => MessageBody::Nodes {
                nodes: self.routing.closest(target, self.routing_reply_size()),
            },
            MessageBody::PutNew { record } => self.put_new(record),
            MessageBody::PutUpdate { record } => self.put_update(record),
            MessageBody::Append { obj_id, entry } => self.append(obj_id, entry),
            MessageBody::Delete { obj_id, signature } => self.delete(obj_id, signature),
            MessageBody::Get { obj_id } => MessageBody::Record {
                record: self.store.get(obj_id).map(StoredRecord::to_full),
            },
            // responses delivered as requests are ignored
            _ => return None,
        })
    }

    fn handle_malicious(
        &mut self,
        behavior: MaliciousBehavior,
        body: &MessageBody,
    ) -> Option<MessageBody> {
        match behavior {
            MaliciousBehavior::Drop => None,
            MaliciousBehavior::StaleReplay => Some(match body {
                // lie: claim success, change nothing
                MessageBody::PutUpdate { .. } => MessageBody::Ack,
                MessageBody::PutNew { record } => self.put_new_claim_only(record),
                MessageBody::Append { .. } | MessageBody::Delete { .. } => MessageBody::Ack,
                MessageBody::Get { obj_id } => MessageBody::Record {
                    record: self.store.get(obj_id).map(StoredRecord::to_full),
                },
                _ => return None,
            }),
            MaliciousBehavior::RefuseAppend => match body {
                MessageBody::Append { .. } => Some(MessageBody::Refuse {
                    reason: RefuseReason::Denied,
                }),
                other => self.handle_honest(other),
            },
            MaliciousBehavior::Garbage => match body {
                MessageBody::Get { obj_id } => Some(MessageBody::Record {
                    record: self.store.get(obj_id).map(|r| {
                        let mut full = r.to_full();
                        // corrupt deterministically and inflate the version
                        // to bait freshness-based selection
                        if let Some(b) = full.data.blob.first_mut() {
                            *b ^= 0xff;
                        }
                        full.data.version += 1;
                        full
                    }),
                }),
                other => self.handle_honest(other),
            },
        }
    }

    // StaleReplay still claims fresh ids so it can serve stale copies later.
    fn put_new_claim_only(&mut self, record: &RecordFull) -> MessageBody {
        if self.store.contains_key(&record.data.obj_id) {
            MessageBody::Refuse {
                reason: RefuseReason::Exists,
            }
        } else {
            self.store
                .insert(record.data.obj_id, StoredRecord::new(record.clone()));
            MessageBody::Ack
        }
    }

    fn put_new(&mut self, record: &RecordFull) -> MessageBody {
        match self.store.get_mut(&record.data.obj_id) {
            None => {
                self.store
                    .insert(record.data.obj_id, StoredRecord::new(record.clone()));
                MessageBody::Ack
            }
            Some(existing) => {
                // Claim refused, but a maintenance push may still teach us a
                // newer authorized version or missing appends.
                if record.data.version > existing.data.version
                    && record.data.wapk == existing.data.wapk
                {
                    if let Some(sig) = &record.data.update_sig {
                        let message = update_auth_message(
                            &record.data.obj_id,
                            record.data.version,
                            &record.data.digest(),
                        );
                        if sig::verify(&existing.data.wapk, &message, sig) {
                            existing.data = record.data.clone();
                        }
                    }
                }
                let limit = self.append_limit;
                for entry in &record.appends {
                    if entry.len() <= limit {
                        existing.push_append(entry.clone());
                    }
                }
                MessageBody::Refuse {
                    reason: RefuseReason::Exists,
                }
            }
        }
    }

    fn put_update(&mut self, record: &RecordData) -> MessageBody {
        let Some(existing) = self.store.get_mut(&record.obj_id) else {
            // unknown id: treated as a first write, claiming the id
            self.store.insert(
                record.obj_id,
                StoredRecord::new(RecordFull {
                    data: record.clone(),
                    appends: Vec::new(),
                }),
            );
            return MessageBody::Ack;
        };
        if record.wapk != existing.data.wapk {
            return MessageBody::Refuse {
                reason: RefuseReason::WapkMismatch,
            };
        }
        let Some(sig) = &record.update_sig else {
            return MessageBody::Refuse {
                reason: RefuseReason::BadSignature,
            };
        };
        let message = update_auth_message(&record.obj_id, record.version, &record.digest());
        if !sig::verify(&existing.data.wapk, &message, sig) {
            return MessageBody::Refuse {
                reason: RefuseReason::BadSignature,
            };
        }
        if record.version <= existing.data.version {
            return MessageBody::Refuse {
                reason: RefuseReason::StaleVersion,
            };
        }
        existing.data = record.clone();
        MessageBody::Ack
    }

    fn append(&mut self, obj_id: &ObjectId, entry: &[u8]) -> MessageBody {
        if entry.len() > self.append_limit {
            return MessageBody::Refuse {
                reason: RefuseReason::TooLarge,
            };
        }
        match self.store.get_mut(obj_id) {
            None => MessageBody::Refuse {
                reason: RefuseReason::UnknownObject,
            },
            Some(record) => {
                record.push_append(entry.to_vec());
                MessageBody::Ack
            }
        }
    }

    fn delete(&mut self, obj_id: &ObjectId, signature: &crate::crypto::Signature) -> MessageBody {
        let Some(existing) = self.store.get(obj_id) else {
            return MessageBody::Refuse {
                reason: RefuseReason::UnknownObject,
            };
        };
        if !sig::verify(&existing.data.wapk, &delete_auth_message(obj_id), signature) {
            return MessageBody::Refuse {
                reason: RefuseReason::BadSignature,
            };
        }
        self.store.remove(obj_id);
        MessageBody::Ack
    }

    fn routing_reply_size(&self) -> usize {
        20
    }
}
