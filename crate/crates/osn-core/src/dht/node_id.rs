//! 160-bit node identifiers under the XOR metric.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::objects::ObjectId;

pub const NODE_ID_LEN: usize = 20;

/// Node identifier; object keys live in the same space.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub [u8; NODE_ID_LEN]);

/// XOR distance, ordered as a 160-bit big-endian integer.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Distance(pub [u8; NODE_ID_LEN]);

impl NodeId {
    pub fn random(rng: &mut impl RngCore) -> Self {
        let mut bytes = [0u8; NODE_ID_LEN];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }

    pub fn from_bytes(bytes: [u8; NODE_ID_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; NODE_ID_LEN] {
        &self.0
    }

    /// The DHT key an object is stored under.
    pub fn for_object(obj_id: &ObjectId) -> Self {
        Self(*obj_id.as_bytes())
    }

    pub fn distance(&self, other: &NodeId) -> Distance {
        let mut out = [0u8; NODE_ID_LEN];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            *o = a ^ b;
        }
        Distance(out)
    }
}

impl Distance {
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    /// Index of the highest set bit: distance in [2^i, 2^(i+1)) maps to i.
    /// `None` for the zero distance.
    pub fn bucket_index(&self) -> Option<usize> {
        for (byte_idx, &byte) in self.0.iter().enumerate() {
            if byte != 0 {
                let bit = 7 - byte.leading_zeros() as usize;
                return Some((NODE_ID_LEN - 1 - byte_idx) * 8 + bit);
            }
        }
        None
    }
}

impl std::fmt::Debug for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "node:")?;
        for b in &self.0[..5] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..")
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}
