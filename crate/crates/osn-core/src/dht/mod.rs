//! Kademlia-style overlay with the extended storage contract: first-write
//! claim, write-authenticated overwrite and delete, unauthenticated append,
//! replication, and version-based freshness.

pub mod client;
pub mod messages;
pub mod node;
pub mod node_id;
pub mod routing;

pub use client::{bootstrap_join, Channel, DhtClient, DhtConfig, GetOutcome, LookupOutcome, PutOutcome};
pub use messages::{record_from_sealed, Message, MessageBody, RecordData, RecordFull, RefuseReason};
pub use node::{MaliciousBehavior, NodeRole, StorageNode, StoredRecord, DEFAULT_APPEND_LIMIT};
pub use node_id::{Distance, NodeId, NODE_ID_LEN};
pub use routing::{RoutingTable, DEFAULT_BUCKET_SIZE};

use std::collections::BTreeMap;

/// Zero-latency in-memory transport: a map of nodes, every request routed
/// and handled synchronously. Used by tests and the local single-node world.
#[derive(Default)]
pub struct InMemoryChannel {
    pub nodes: BTreeMap<NodeId, StorageNode>,
}

impl Channel for InMemoryChannel {
    fn request(&mut self, from: NodeId, to: NodeId, msg: Message) -> Option<Message> {
        self.nodes.get_mut(&to)?.handle(from, &msg)
    }
}
