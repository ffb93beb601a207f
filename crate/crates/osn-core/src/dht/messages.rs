//! Wire messages of the storage overlay.
//!
//! Requests: PING, FIND_NODE, PUT_NEW, PUT_UPDATE, APPEND, DELETE, GET.
//! Responses: PONG, NODES, RECORD, ACK, REFUSE. Every message carries a
//! request id and the sender's node id; payloads use the canonical encoding.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::node_id::NodeId;
use crate::crypto::Signature;
use crate::objects::{record_digest, ObjectId, SealedObject};
use crate::wire::{Reader, WireError, Writer};

use ed25519_dalek::VerifyingKey;

/// Mutable-part-free view of a stored object: what overwrites replace.
///
/// `update_sig` is the detached WAPK signature over
/// (objID, version, digest); it is absent until the first overwrite and lets
/// replicas verify higher versions learned during maintenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecordData {
    pub obj_id: ObjectId,
    pub version: u64,
    pub wapk: VerifyingKey,
    pub blob: Vec<u8>,
    pub update_sig: Option<Signature>,
}

impl RecordData {
    pub fn digest(&self) -> [u8; 32] {
        record_digest(&self.obj_id, self.version, &self.wapk, &self.blob)
    }

    pub fn encode(&self, w: &mut Writer) {
        w.put_fixed(self.obj_id.as_bytes());
        w.put_u64(self.version);
        w.put_fixed(self.wapk.as_bytes());
        w.put_bytes(&self.blob);
        match &self.update_sig {
            None => w.put_u8(0),
            Some(sig) => {
                w.put_u8(1);
                w.put_fixed(&sig.to_bytes());
            }
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let obj_id = ObjectId::from_bytes(r.fixed()?);
        let version = r.u64()?;
        let wapk = VerifyingKey::from_bytes(&r.fixed::<32>()?)
            .map_err(|_| WireError::Malformed("wapk"))?;
        let blob = r.bytes()?;
        let update_sig = match r.u8()? {
            0 => None,
            1 => Some(Signature::from_bytes(&r.fixed::<64>()?)),
            _ => return Err(WireError::Malformed("signature tag")),
        };
        Ok(Self {
            obj_id,
            version,
            wapk,
            blob,
            update_sig,
        })
    }
}

/// Record data plus the append list, as served by GET and pushed by PUT_NEW.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecordFull {
    pub data: RecordData,
    pub appends: Vec<Vec<u8>>,
}

impl RecordFull {
    pub fn encode(&self, w: &mut Writer) {
        self.data.encode(w);
        w.put_varint(self.appends.len() as u64);
        for entry in &self.appends {
            w.put_bytes(entry);
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let data = RecordData::decode(r)?;
        let n = r.varint()? as usize;
        let mut appends = Vec::with_capacity(n.min(4096));
        for _ in 0..n {
            appends.push(r.bytes()?);
        }
        Ok(Self { data, appends })
    }

    /// Reconstructs the sealed object a reader hands to `open_object`.
    pub fn to_sealed(&self) -> SealedObject {
        SealedObject {
            obj_id: self.data.obj_id,
            version: self.data.version,
            wapk: self.data.wapk,
            sealed_body: self.data.blob.clone(),
            append_entries: self.appends.clone(),
        }
    }
}

/// Builds the record pushed on first insert.
pub fn record_from_sealed(sealed: &SealedObject, update_sig: Option<Signature>) -> RecordFull {
    RecordFull {
        data: RecordData {
            obj_id: sealed.obj_id,
            version: sealed.version,
            wapk: sealed.wapk,
            blob: sealed.sealed_body.clone(),
            update_sig,
        },
        appends: sealed.append_entries.clone(),
    }
}

pub fn entry_digest(entry: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"osn.entry");
    h.update(entry);
    h.finalize().into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefuseReason {
    /// PUT_NEW on an already claimed id.
    Exists,
    /// Operation on an id this node does not store.
    UnknownObject,
    /// Write-auth signature missing or invalid under the stored WAPK.
    BadSignature,
    /// Version not strictly greater than the stored one.
    StaleVersion,
    /// Update tried to swap the immutable WAPK.
    WapkMismatch,
    /// Append entry over the size limit.
    TooLarge,
    /// Unspecified refusal (only adversarial nodes emit this).
    Denied,
}

impl RefuseReason {
    fn tag(self) -> u8 {
        match self {
            RefuseReason::Exists => 0,
            RefuseReason::UnknownObject => 1,
            RefuseReason::BadSignature => 2,
            RefuseReason::StaleVersion => 3,
            RefuseReason::WapkMismatch => 4,
            RefuseReason::TooLarge => 5,
            RefuseReason::Denied => 6,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, WireError> {
        Ok(match tag {
            0 => RefuseReason::Exists,
            1 => RefuseReason::UnknownObject,
            2 => RefuseReason::BadSignature,
            3 => RefuseReason::StaleVersion,
            4 => RefuseReason::WapkMismatch,
            5 => RefuseReason::TooLarge,
            6 => RefuseReason::Denied,
            _ => return Err(WireError::Malformed("refuse reason")),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum MessageBody {
    Ping,
    Pong,
    FindNode { target: NodeId },
    Nodes { nodes: Vec<NodeId> },
    PutNew { record: RecordFull },
    PutUpdate { record: RecordData },
    Append { obj_id: ObjectId, entry: Vec<u8> },
    Delete { obj_id: ObjectId, signature: Signature },
    Get { obj_id: ObjectId },
    Record { record: Option<RecordFull> },
    Ack,
    Refuse { reason: RefuseReason },
}

impl MessageBody {
    pub fn kind(&self) -> &'static str {
        match self {
            MessageBody::Ping => "PING",
            MessageBody::Pong => "PONG",
            MessageBody::FindNode { .. } => "FIND_NODE",
            MessageBody::Nodes { .. } => "NODES",
            MessageBody::PutNew { .. } => "PUT_NEW",
            MessageBody::PutUpdate { .. } => "PUT_UPDATE",
            MessageBody::Append { .. } => "APPEND",
            MessageBody::Delete { .. } => "DELETE",
            MessageBody::Get { .. } => "GET",
            MessageBody::Record { .. } => "RECORD",
            MessageBody::Ack => "ACK",
            MessageBody::Refuse { .. } => "REFUSE",
        }
    }

    /// True for the storage-layer operations adversaries may sabotage;
    /// routing traffic stays honest.
    pub fn is_storage_op(&self) -> bool {
        matches!(
            self,
            MessageBody::PutNew { .. }
                | MessageBody::PutUpdate { .. }
                | MessageBody::Append { .. }
                | MessageBody::Delete { .. }
                | MessageBody::Get { .. }
        )
    }
}

/// Envelope: request id, sender, payload.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Message {
    pub request_id: u64,
    pub sender: NodeId,
    pub body: MessageBody,
}

impl Message {
    pub fn encode(&self, w: &mut Writer) {
        w.put_u64(self.request_id);
        w.put_fixed(self.sender.as_bytes());
        match &self.body {
            MessageBody::Ping => w.put_u8(0),
            MessageBody::Pong => w.put_u8(1),
            MessageBody::FindNode { target } => {
                w.put_u8(2);
                w.put_fixed(target.as_bytes());
            }
            MessageBody::Nodes { nodes } => {
                w.put_u8(3);
                w.put_varint(nodes.len() as u64);
                for n in nodes {
                    w.put_fixed(n.as_bytes());
                }
            }
            MessageBody::PutNew { record } => {
                w.put_u8(4);
                record.encode(w);
            }
            MessageBody::PutUpdate { record } => {
                w.put_u8(5);
                record.encode(w);
            }
            MessageBody::Append { obj_id, entry } => {
                w.put_u8(6);
                w.put_fixed(obj_id.as_bytes());
                w.put_bytes(entry);
            }
            MessageBody::Delete { obj_id, signature } => {
                w.put_u8(7);
                w.put_fixed(obj_id.as_bytes());
                w.put_fixed(&signature.to_bytes());
            }
            MessageBody::Get { obj_id } => {
                w.put_u8(8);
                w.put_fixed(obj_id.as_bytes());
            }
            MessageBody::Record { record } => {
                w.put_u8(9);
                match record {
                    None => w.put_u8(0),
                    Some(full) => {
                        w.put_u8(1);
                        full.encode(w);
                    }
                }
            }
            MessageBody::Ack => w.put_u8(10),
            MessageBody::Refuse { reason } => {
                w.put_u8(11);
                w.put_u8(reason.tag());
            }
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let request_id = r.u64()?;
        let sender = NodeId::from_bytes(r.fixed()?);
        let body = match r.u8()? {
            0 => MessageBody::Ping,
            1 => MessageBody::Pong,
            2 => MessageBody::FindNode {
                target: NodeId::from_bytes(r.fixed()?),
            },
            3 => {
                let n = r.varint()? as usize;
                let mut nodes = Vec::with_capacity(n.min(1024));
                for _ in 0..n {
                    nodes.push(NodeId::from_bytes(r.fixed()?));
                }
                MessageBody::Nodes { nodes }
            }
            4 => MessageBody::PutNew {
                record: RecordFull::decode(r)?,
            },
            5 => MessageBody::PutUpdate {
                record: RecordData::decode(r)?,
            },
            6 => MessageBody::Append {
                obj_id: ObjectId::from_bytes(r.fixed()?),
                entry: r.bytes()?,
            },
            7 => MessageBody::Delete {
                obj_id: ObjectId::from_bytes(r.fixed()?),
                signature: Signature::from_bytes(&r.fixed::<64>()?),
            },
            8 => MessageBody::Get {
                obj_id: ObjectId::from_bytes(r.fixed()?),
            },
            9 => MessageBody::Record {
                record: match r.u8()? {
                    0 => None,
                    1 => Some(RecordFull::decode(r)?),
                    _ => return Err(WireError::Malformed("record tag")),
                },
            },
            10 => MessageBody::Ack,
            11 => MessageBody::Refuse {
                reason: RefuseReason::from_tag(r.u8()?)?,
            },
            _ => return Err(WireError::Malformed("message tag")),
        };
        Ok(Self {
            request_id,
            sender,
            body,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let msg = Self::decode(&mut r)?;
        r.finish()?;
        Ok(msg)
    }
}
