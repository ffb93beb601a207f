//! Kademlia routing table: 160 k-buckets with least-recently-seen eviction.

use serde::{Deserialize, Serialize};

use super::node_id::{NodeId, NODE_ID_LEN};

pub const DEFAULT_BUCKET_SIZE: usize = 20;

/// Per-node routing state. Bucket `i` holds peers at XOR distance in
/// [2^i, 2^(i+1)); each bucket is ordered oldest-seen first and evicts the
/// least recently seen entry when full.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoutingTable {
    own: NodeId,
    bucket_size: usize,
    buckets: Vec<Vec<NodeId>>,
}

impl RoutingTable {
    pub fn new(own: NodeId, bucket_size: usize) -> Self {
        Self {
            own,
            bucket_size,
            buckets: vec![Vec::new(); NODE_ID_LEN * 8],
        }
    }

    pub fn own_id(&self) -> NodeId {
        self.own
    }

    pub fn contact_count(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.iter().all(Vec::is_empty)
    }

    /// Records traffic from `peer`: refreshes recency, inserts if there is
    /// room, or evicts the least recently seen entry.
    pub fn observe(&mut self, peer: NodeId) {
        let Some(idx) = self.own.distance(&peer).bucket_index() else {
            return; // own id
        };
        let bucket = &mut self.buckets[idx];
        if let Some(pos) = bucket.iter().position(|n| *n == peer) {
            bucket.remove(pos);
            bucket.push(peer);
            return;
        }
        if bucket.len() >= self.bucket_size {
            bucket.remove(0);
        }
        bucket.push(peer);
    }

    /// Drops a peer that stopped responding.
    pub fn remove(&mut self, peer: &NodeId) {
        if let Some(idx) = self.own.distance(peer).bucket_index() {
            self.buckets[idx].retain(|n| n != peer);
        }
    }

    pub fn contains(&self, peer: &NodeId) -> bool {
        self.own
            .distance(peer)
            .bucket_index()
            .is_some_and(|idx| self.buckets[idx].contains(peer))
    }

    /// Up to `count` known peers closest to `target` by XOR distance.
    pub fn closest(&self, target: &NodeId, count: usize) -> Vec<NodeId> {
        let mut all: Vec<(super::node_id::Distance, NodeId)> = self
            .buckets
            .iter()
            .flatten()
            .map(|n| (n.distance(target), *n))
            .collect();
        all.sort_unstable();
        all.truncate(count);
        all.into_iter().map(|(_, n)| n).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &NodeId> {
        self.buckets.iter().flatten()
    }
}
