//! Client-side overlay operations: iterative lookup and the storage calls
//! built on it.
//!
//! The transport is an abstract request/response channel supplied by the
//! caller (an in-memory map in tests, the latency-modelled network in the
//! simulator). Replica fan-outs go through `request_batch` so a transport
//! can charge parallel requests the cost of the slowest leg.

use std::collections::BTreeSet;

use super::messages::{entry_digest, Message, MessageBody, RecordData, RecordFull};
use super::node_id::NodeId;
use super::routing::RoutingTable;
use crate::crypto::Signature;
use crate::objects::ObjectId;

/// Abstract request/response transport. `None` is a timeout: the peer is
/// gone, dropped the request, or never answered.
pub trait Channel {
    fn request(&mut self, from: NodeId, to: NodeId, msg: Message) -> Option<Message>;

    /// Requests issued concurrently. The default runs them sequentially;
    /// latency-aware transports override it.
    fn request_batch(
        &mut self,
        from: NodeId,
        batch: Vec<(NodeId, Message)>,
    ) -> Vec<Option<Message>> {
        batch
            .into_iter()
            .map(|(to, msg)| self.request(from, to, msg))
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DhtConfig {
    /// Closest-set size (k-bucket size and lookup width).
    pub k: usize,
    /// Lookup parallelism.
    pub alpha: usize,
    /// Replication factor R.
    pub replicas: usize,
}

impl Default for DhtConfig {
    fn default() -> Self {
        Self {
            k: 20,
            alpha: 3,
            replicas: 5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LookupOutcome {
    /// Responsive nodes closest to the target, nearest first.
    pub closest: Vec<NodeId>,
    /// Query rounds until the closest set stabilized.
    pub rounds: usize,
    /// Total FIND_NODE requests sent.
    pub queried: usize,
}

#[derive(Clone, Debug, Default)]
pub struct PutOutcome {
    pub acks: usize,
    pub refusals: usize,
    pub timeouts: usize,
}

#[derive(Clone, Debug)]
pub struct GetOutcome {
    /// Distinct record candidates, highest version first. The caller picks
    /// the freshest one whose body authenticates, since only the caller
    /// holds the keys.
    pub candidates: Vec<RecordFull>,
    /// Union of append entries across replicas, deduplicated by digest and
    /// ordered by first appearance (replicas visited nearest first).
    pub appends: Vec<Vec<u8>>,
    pub responders: usize,
}

/// Client handle bound to one node's identity and routing table.
pub struct DhtClient<'a, C: Channel> {
    pub chan: &'a mut C,
    pub self_id: NodeId,
    pub routing: &'a mut RoutingTable,
    pub cfg: DhtConfig,
    next_request_id: u64,
}

impl<'a, C: Channel> DhtClient<'a, C> {
    pub fn new(chan: &'a mut C, self_id: NodeId, routing: &'a mut RoutingTable, cfg: DhtConfig) -> Self {
        Self {
            chan,
            self_id,
            routing,
            cfg,
            next_request_id: 1,
        }
    }

    fn rid(&mut self) -> u64 {
        let id = self.next_request_id;
        self.next_request_id += 1;
        id
    }

    fn msg(&mut self, body: MessageBody) -> Message {
        Message {
            request_id: self.rid(),
            sender: self.self_id,
            body,
        }
    }

    /// Iterative lookup: alpha parallel FIND_NODE queries per round,
    /// terminating once the k closest responsive nodes have all been
    /// queried. Unresponsive peers are evicted from the routing table.
    pub fn lookup(&mut self, target: NodeId) -> LookupOutcome {
        let k = self.cfg.k;
        let mut shortlist: Vec<NodeId> = self.routing.closest(&target, k);
        let mut queried: BTreeSet<NodeId> = BTreeSet::new();
        let mut alive: BTreeSet<NodeId> = BTreeSet::new();
        let mut dead: BTreeSet<NodeId> = BTreeSet::new();
        let mut rounds = 0usize;
        let mut sent = 0usize;

        loop {
            shortlist.sort_unstable_by_key(|n| n.distance(&target));
            shortlist.dedup();
            let wave: Vec<NodeId> = shortlist
                .iter()
                .filter(|n| !queried.contains(*n) && !dead.contains(*n) && **n != self.self_id)
                .take(self.cfg.alpha)
                .copied()
                .collect();
            if wave.is_empty() {
                break;
            }
            rounds += 1;
            sent += wave.len();
            let batch: Vec<(NodeId, Message)> = wave
                .iter()
                .map(|to| (*to, self.msg(MessageBody::FindNode { target })))
                .collect();
            let replies = self.chan.request_batch(self.self_id, batch);
            for (to, reply) in wave.iter().zip(replies) {
                queried.insert(*to);
                match reply {
                    Some(Message {
                        body: MessageBody::Nodes { nodes },
                        sender,
                        ..
                    }) => {
                        alive.insert(sender);
                        self.routing.observe(sender);
                        for n in nodes {
                            if n != self.self_id && !dead.contains(&n) {
                                shortlist.push(n);
                            }
                        }
                    }
                    _ => {
                        dead.insert(*to);
                        self.routing.remove(to);
                        shortlist.retain(|n| n != to);
                    }
                }
            }
            // done once the best k known are all queried
            shortlist.sort_unstable_by_key(|n| n.distance(&target));
            shortlist.dedup();
            let best_unqueried = shortlist
                .iter()
                .filter(|n| !dead.contains(*n) && **n != self.self_id)
                .take(k)
                .any(|n| !queried.contains(n));
            if !best_unqueried {
                break;
            }
        }

        let mut closest: Vec<NodeId> = alive.into_iter().collect();
        closest.sort_unstable_by_key(|n| n.distance(&target));
        closest.truncate(k);
        LookupOutcome {
            closest,
            rounds,
            queried: sent,
        }
    }

    /// Replica set for an object: the R closest responsive nodes.
    pub fn replica_set(&mut self, obj_id: &ObjectId) -> (Vec<NodeId>, LookupOutcome) {
        let outcome = self.lookup(NodeId::for_object(obj_id));
        let replicas = outcome
            .closest
            .iter()
            .take(self.cfg.replicas)
            .copied()
            .collect();
        (replicas, outcome)
    }

    fn fanout(&mut self, targets: &[NodeId], body: MessageBody) -> PutOutcome {
        let batch: Vec<(NodeId, Message)> = targets
            .iter()
            .map(|to| (*to, self.msg(body.clone())))
            .collect();
        let replies = self.chan.request_batch(self.self_id, batch);
        let mut outcome = PutOutcome::default();
        for reply in replies {
            match reply {
                Some(Message {
                    body: MessageBody::Ack,
                    ..
                }) => outcome.acks += 1,
                Some(_) => outcome.refusals += 1,
                None => outcome.timeouts += 1,
            }
        }
        outcome
    }

    /// First insert: stores the record at the R closest nodes.
    pub fn put_new(&mut self, record: RecordFull) -> PutOutcome {
        let (replicas, _) = self.replica_set(&record.data.obj_id);
        self.fanout(&replicas, MessageBody::PutNew { record })
    }

    /// Write-authenticated overwrite; the record must carry its update
    /// signature.
    pub fn put_update(&mut self, record: RecordData) -> PutOutcome {
        let (replicas, _) = self.replica_set(&record.obj_id);
        self.fanout(&replicas, MessageBody::PutUpdate { record })
    }

    /// Adds an opaque entry at every reachable replica.
    pub fn append(&mut self, obj_id: ObjectId, entry: Vec<u8>) -> PutOutcome {
        let (replicas, _) = self.replica_set(&obj_id);
        self.fanout(&replicas, MessageBody::Append { obj_id, entry })
    }

    /// Write-authenticated removal.
    pub fn delete(&mut self, obj_id: ObjectId, signature: Signature) -> PutOutcome {
        let (replicas, _) = self.replica_set(&obj_id);
        self.fanout(&replicas, MessageBody::Delete { obj_id, signature })
    }

    /// Queries every replica candidate and returns all distinct record
    /// versions plus the append-list union.
    pub fn get_fresh(&mut self, obj_id: ObjectId) -> GetOutcome {
        let (replicas, _) = self.replica_set(&obj_id);
        let batch: Vec<(NodeId, Message)> = replicas
            .iter()
            .map(|to| (*to, self.msg(MessageBody::Get { obj_id })))
            .collect();
        let replies = self.chan.request_batch(self.self_id, batch);

        let mut responders = 0usize;
        let mut candidates: Vec<RecordFull> = Vec::new();
        let mut seen_digests: BTreeSet<[u8; 32]> = BTreeSet::new();
        let mut appends: Vec<Vec<u8>> = Vec::new();
        let mut seen_entries: BTreeSet<[u8; 32]> = BTreeSet::new();
        for reply in replies {
            let Some(Message {
                body: MessageBody::Record { record: Some(full) },
                ..
            }) = reply
            else {
                if reply.is_some() {
                    responders += 1;
                }
                continue;
            };
            responders += 1;
            for entry in &full.appends {
                if seen_entries.insert(entry_digest(entry)) {
                    appends.push(entry.clone());
                }
            }
            if seen_digests.insert(full.data.digest()) {
                candidates.push(full);
            }
        }
        candidates.sort_by(|a, b| {
            b.data
                .version
                .cmp(&a.data.version)
                .then_with(|| a.data.digest().cmp(&b.data.digest()))
        });
        GetOutcome {
            candidates,
            appends,
            responders,
        }
    }
}

/// Joins the overlay through a bootstrap contact: a self-lookup populates
/// the joiner's table and announces it to the nodes it touches.
pub fn bootstrap_join<C: Channel>(
    chan: &mut C,
    self_id: NodeId,
    routing: &mut RoutingTable,
    bootstrap: NodeId,
    cfg: DhtConfig,
) -> LookupOutcome {
    routing.observe(bootstrap);
    let mut client = DhtClient::new(chan, self_id, routing, cfg);
    client.lookup(self_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dht::node::{NodeRole, StorageNode};
    use crate::dht::InMemoryChannel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn build_overlay(rng: &mut ChaCha20Rng, n: usize) -> InMemoryChannel {
        let mut chan = InMemoryChannel::default();
        let ids: Vec<NodeId> = (0..n).map(|_| NodeId::random(rng)).collect();
        for id in &ids {
            chan.nodes
                .insert(*id, StorageNode::new(*id, 20, NodeRole::Honest));
        }
        // wire routing: each node joins via the first node
        let bootstrap = ids[0];
        for id in &ids[1..] {
            let mut routing = RoutingTable::new(*id, 20);
            bootstrap_join(&mut chan, *id, &mut routing, bootstrap, DhtConfig::default());
            chan.nodes.get_mut(id).unwrap().routing = routing;
        }
        chan
    }

    #[test]
    fn two_node_lookup_orders_by_distance() {
        let mut rng = ChaCha20Rng::seed_from_u64(140);
        let mut chan = build_overlay(&mut rng, 2);
        let ids: Vec<NodeId> = chan.nodes.keys().copied().collect();
        let me = ids[0];
        let mut routing = chan.nodes[&me].routing.clone();
        let mut client = DhtClient::new(&mut chan, me, &mut routing, DhtConfig::default());
        let target = NodeId::random(&mut rng);
        let outcome = client.lookup(target);
        // the other node responds; self is the client, not a respondent
        assert_eq!(outcome.closest.len(), 1);
    }

    #[test]
    fn lookup_finds_true_closest_set() {
        let mut rng = ChaCha20Rng::seed_from_u64(141);
        let mut chan = build_overlay(&mut rng, 120);
        let ids: Vec<NodeId> = chan.nodes.keys().copied().collect();
        let me = ids[7];
        let target = NodeId::random(&mut rng);

        let mut expected: Vec<NodeId> = ids.iter().filter(|n| **n != me).copied().collect();
        expected.sort_unstable_by_key(|n| n.distance(&target));
        expected.truncate(5);

        let mut routing = chan.nodes[&me].routing.clone();
        let mut client = DhtClient::new(&mut chan, me, &mut routing, DhtConfig::default());
        let outcome = client.lookup(target);
        assert_eq!(&outcome.closest[..5], &expected[..]);
        assert!(outcome.rounds >= 1);
    }

    #[test]
    fn lookup_of_own_id_converges() {
        let mut rng = ChaCha20Rng::seed_from_u64(142);
        let mut chan = build_overlay(&mut rng, 50);
        let ids: Vec<NodeId> = chan.nodes.keys().copied().collect();
        let me = ids[3];
        let mut routing = chan.nodes[&me].routing.clone();
        let mut client = DhtClient::new(&mut chan, me, &mut routing, DhtConfig::default());
        let outcome = client.lookup(me);
        // everyone else sorted by distance to me; self is implicitly closest
        assert!(!outcome.closest.contains(&me));
        assert!(!outcome.closest.is_empty());
    }

    #[test]
    fn dead_nodes_timed_out_and_evicted() {
        let mut rng = ChaCha20Rng::seed_from_u64(143);
        let mut chan = build_overlay(&mut rng, 30);
        let ids: Vec<NodeId> = chan.nodes.keys().copied().collect();
        let me = ids[0];
        let gone = ids[10];
        let mut routing = chan.nodes[&me].routing.clone();
        routing.observe(gone);
        chan.nodes.remove(&gone);
        let mut client = DhtClient::new(&mut chan, me, &mut routing, DhtConfig::default());
        let outcome = client.lookup(gone);
        assert!(!outcome.closest.contains(&gone));
        assert!(!routing.contains(&gone));
    }
}
