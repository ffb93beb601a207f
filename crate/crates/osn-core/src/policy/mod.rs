//! Attribute-based access policies.
//!
//! A policy is a threshold formula over opaque attribute identifiers:
//! `Leaf(attr)` is satisfied when the attribute is held, and
//! `Threshold(k, children)` when at least `k` children are satisfied.
//! AND is `k = n`, OR is `k = 1`. There is no negation, so policies are
//! monotone: adding attributes never removes access.
//!
//! Identifiers are opaque 16-byte values issued by a key authority; a
//! contact learns which identifiers they hold but not what they mean.

mod text;

pub use text::{parse_policy, ParseError};

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wire::{Reader, WireError, Writer};

pub const ATTRIBUTE_ID_LEN: usize = 16;

/// Opaque attribute identifier, unique per (key authority, attribute).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttributeId([u8; ATTRIBUTE_ID_LEN]);

impl AttributeId {
    pub fn random(rng: &mut impl RngCore) -> Self {
        let mut bytes = [0u8; ATTRIBUTE_ID_LEN];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }

    pub fn from_bytes(bytes: [u8; ATTRIBUTE_ID_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; ATTRIBUTE_ID_LEN] {
        &self.0
    }
}

impl fmt::Debug for AttributeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "attr:")?;
        for b in &self.0[..4] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..")
    }
}

impl fmt::Display for AttributeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Identity-based write policy: exactly one allowed signer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityPolicy {
    pub signer: ed25519_dalek::VerifyingKey,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("threshold {k} exceeds child count {n}")]
    ThresholdTooLarge { k: u32, n: usize },
    #[error("threshold must be at least 1")]
    ThresholdZero,
    #[error("threshold node must have at least one child")]
    EmptyThreshold,
    #[error("policy depth {depth} exceeds limit {max}")]
    TooDeep { depth: usize, max: usize },
    #[error("node fan-out {n} exceeds limit {max}")]
    FanOutTooLarge { n: usize, max: usize },
    #[error("wire: {0}")]
    Wire(#[from] WireError),
}

/// Structural limits applied at construction and decode time.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PolicyLimits {
    pub max_depth: usize,
    pub max_fanout: usize,
}

impl Default for PolicyLimits {
    fn default() -> Self {
        Self {
            max_depth: 16,
            max_fanout: 64,
        }
    }
}

/// Threshold formula over attributes.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum PolicyTree {
    Leaf(AttributeId),
    Threshold { k: u32, children: Vec<PolicyTree> },
}

impl PolicyTree {
    pub fn leaf(attr: AttributeId) -> Self {
        PolicyTree::Leaf(attr)
    }

    pub fn and(children: Vec<PolicyTree>) -> Result<Self, PolicyError> {
        let k = children.len() as u32;
        Self::threshold(k, children)
    }

    pub fn or(children: Vec<PolicyTree>) -> Result<Self, PolicyError> {
        Self::threshold(1, children)
    }

    pub fn threshold(k: u32, children: Vec<PolicyTree>) -> Result<Self, PolicyError> {
        if children.is_empty() {
            return Err(PolicyError::EmptyThreshold);
        }
        if k == 0 {
            return Err(PolicyError::ThresholdZero);
        }
        if k as usize > children.len() {
            return Err(PolicyError::ThresholdTooLarge {
                k,
                n: children.len(),
            });
        }
        Ok(PolicyTree::Threshold { k, children })
    }

    /// Checks threshold bounds plus the configured depth and fan-out limits.
    pub fn validate(&self, limits: &PolicyLimits) -> Result<(), PolicyError> {
        self.validate_at(1, limits)
    }

    fn validate_at(&self, depth: usize, limits: &PolicyLimits) -> Result<(), PolicyError> {
        if depth > limits.max_depth {
            return Err(PolicyError::TooDeep {
                depth,
                max: limits.max_depth,
            });
        }
        match self {
            PolicyTree::Leaf(_) => Ok(()),
            PolicyTree::Threshold { k, children } => {
                if children.is_empty() {
                    return Err(PolicyError::EmptyThreshold);
                }
                if *k == 0 {
                    return Err(PolicyError::ThresholdZero);
                }
                if *k as usize > children.len() {
                    return Err(PolicyError::ThresholdTooLarge {
                        k: *k,
                        n: children.len(),
                    });
                }
                if children.len() > limits.max_fanout {
                    return Err(PolicyError::FanOutTooLarge {
                        n: children.len(),
                        max: limits.max_fanout,
                    });
                }
                for child in children {
                    child.validate_at(depth + 1, limits)?;
                }
                Ok(())
            }
        }
    }

    /// True iff `held` satisfies the formula. Pure, no side effects.
    pub fn evaluate(&self, held: &BTreeSet<AttributeId>) -> bool {
        match self {
            PolicyTree::Leaf(attr) => held.contains(attr),
            PolicyTree::Threshold { k, children } => {
                let satisfied = children.iter().filter(|c| c.evaluate(held)).count();
                satisfied >= *k as usize
            }
        }
    }

    /// Attribute ids at the leaves, in depth-first preorder. Duplicates kept.
    pub fn leaves(&self) -> Vec<AttributeId> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<AttributeId>) {
        match self {
            PolicyTree::Leaf(attr) => out.push(*attr),
            PolicyTree::Threshold { children, .. } => {
                for child in children {
                    child.collect_leaves(out);
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            PolicyTree::Leaf(_) => 1,
            PolicyTree::Threshold { children, .. } => {
                children.iter().map(PolicyTree::leaf_count).sum()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            PolicyTree::Leaf(_) => 1,
            PolicyTree::Threshold { children, .. } => {
                1 + children.iter().map(PolicyTree::depth).max().unwrap_or(0)
            }
        }
    }

    /// Picks a minimal satisfying leaf set and records, per threshold node on
    /// the way, which children participate. Returns `None` iff `evaluate` is
    /// false. The plan drives share reconstruction during decryption.
    pub fn select_satisfying(&self, held: &BTreeSet<AttributeId>) -> Option<SelectionPlan> {
        let mut next_slot = 0usize;
        self.plan(held, &mut next_slot).map(|(_, plan)| plan)
    }

    fn plan(
        &self,
        held: &BTreeSet<AttributeId>,
        next_slot: &mut usize,
    ) -> Option<(usize, SelectionPlan)> {
        match self {
            PolicyTree::Leaf(attr) => {
                let slot = *next_slot;
                *next_slot += 1;
                if held.contains(attr) {
                    Some((1, SelectionPlan::Leaf { slot, attr: *attr }))
                } else {
                    None
                }
            }
            PolicyTree::Threshold { k, children } => {
                let mut viable: Vec<(usize, u32, SelectionPlan)> = Vec::new();
                for (idx, child) in children.iter().enumerate() {
                    if let Some((cost, plan)) = child.plan(held, next_slot) {
                        viable.push((cost, idx as u32, plan));
                    }
                }
                if viable.len() < *k as usize {
                    return None;
                }
                // cheapest k children; ties broken by child index for determinism
                viable.sort_by_key(|(cost, idx, _)| (*cost, *idx));
                viable.truncate(*k as usize);
                viable.sort_by_key(|(_, idx, _)| *idx);
                let total: usize = viable.iter().map(|(c, _, _)| c).sum();
                let picks = viable
                    .into_iter()
                    .map(|(_, idx, plan)| (idx, plan))
                    .collect();
                Some((total, SelectionPlan::Node { picks }))
            }
        }
    }

    /// Canonical binary form: preorder, tag byte 0 = leaf / 1 = threshold,
    /// varint k and child count, raw 16-byte attribute ids.
    pub fn encode(&self, w: &mut Writer) {
        match self {
            PolicyTree::Leaf(attr) => {
                w.put_u8(0);
                w.put_fixed(attr.as_bytes());
            }
            PolicyTree::Threshold { k, children } => {
                w.put_u8(1);
                w.put_varint(u64::from(*k));
                w.put_varint(children.len() as u64);
                for child in children {
                    child.encode(w);
                }
            }
        }
    }

    pub fn decode(r: &mut Reader<'_>, limits: &PolicyLimits) -> Result<Self, PolicyError> {
        Self::decode_at(r, 1, limits)
    }

    fn decode_at(
        r: &mut Reader<'_>,
        depth: usize,
        limits: &PolicyLimits,
    ) -> Result<Self, PolicyError> {
        if depth > limits.max_depth {
            return Err(PolicyError::TooDeep {
                depth,
                max: limits.max_depth,
            });
        }
        match r.u8()? {
            0 => Ok(PolicyTree::Leaf(AttributeId::from_bytes(r.fixed()?))),
            1 => {
                let k = r.varint()?;
                let n = r.varint()? as usize;
                if n == 0 {
                    return Err(PolicyError::EmptyThreshold);
                }
                if n > limits.max_fanout {
                    return Err(PolicyError::FanOutTooLarge {
                        n,
                        max: limits.max_fanout,
                    });
                }
                let k = u32::try_from(k).map_err(|_| PolicyError::ThresholdTooLarge { k: u32::MAX, n })?;
                if k == 0 {
                    return Err(PolicyError::ThresholdZero);
                }
                if k as usize > n {
                    return Err(PolicyError::ThresholdTooLarge { k, n });
                }
                let children = (0..n)
                    .map(|_| Self::decode_at(r, depth + 1, limits))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(PolicyTree::Threshold { k, children })
            }
            _ => Err(PolicyError::Wire(WireError::Malformed("policy node tag"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PolicyError> {
        let mut r = Reader::new(bytes);
        let tree = Self::decode(&mut r, &PolicyLimits::default())?;
        r.finish().map_err(PolicyError::Wire)?;
        Ok(tree)
    }

    /// Renders the tree in the surface syntax. Returns `None` for trees the
    /// grammar cannot express (general thresholds over non-leaf children).
    pub fn to_text(&self, names: &BTreeMap<AttributeId, String>) -> Option<String> {
        self.render(names, 0)
    }

    // prec 0 = OR context, 1 = AND context (needs parens around OR)
    fn render(&self, names: &BTreeMap<AttributeId, String>, prec: u8) -> Option<String> {
        match self {
            PolicyTree::Leaf(attr) => names.get(attr).cloned(),
            PolicyTree::Threshold { k, children } => {
                let n = children.len();
                if *k == 1 && n > 1 {
                    let parts = children
                        .iter()
                        .map(|c| c.render(names, 0))
                        .collect::<Option<Vec<_>>>()?;
                    let joined = parts.join(" OR ");
                    Some(if prec > 0 { format!("({joined})") } else { joined })
                } else if *k as usize == n {
                    let parts = children
                        .iter()
                        .map(|c| c.render(names, 1))
                        .collect::<Option<Vec<_>>>()?;
                    Some(parts.join(" AND "))
                } else {
                    // k-of-n clause: grammar allows identifiers only
                    let parts = children
                        .iter()
                        .map(|c| match c {
                            PolicyTree::Leaf(attr) => names.get(attr).cloned(),
                            _ => None,
                        })
                        .collect::<Option<Vec<_>>>()?;
                    Some(format!("{k} of {{{}}}", parts.join(", ")))
                }
            }
        }
    }
}

/// Reconstruction plan produced by [`PolicyTree::select_satisfying`].
///
/// `slot` is the leaf's global preorder index; `picks` holds, for a threshold
/// node, the participating child indices (the Shamir x-coordinate of child
/// `i` is `i + 1`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SelectionPlan {
    Leaf { slot: usize, attr: AttributeId },
    Node { picks: Vec<(u32, SelectionPlan)> },
}

impl SelectionPlan {
    /// Leaves used by the plan, as (preorder slot, attribute).
    pub fn leaves(&self) -> Vec<(usize, AttributeId)> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<(usize, AttributeId)>) {
        match self {
            SelectionPlan::Leaf { slot, attr } => out.push((*slot, *attr)),
            SelectionPlan::Node { picks } => {
                for (_, sub) in picks {
                    sub.collect(out);
                }
            }
        }
    }
}

/// Random policy generator for randomized tests and experiments.
pub mod testing {
    use super::*;
    use rand::Rng;

    /// Builds a random tree over `attrs` with at most `max_depth` levels and
    /// roughly `max_leaves` leaves. Depth 1 yields a single leaf.
    pub fn random_tree(
        rng: &mut impl Rng,
        attrs: &[AttributeId],
        max_depth: usize,
        max_leaves: usize,
    ) -> PolicyTree {
        assert!(!attrs.is_empty());
        let budget = max_leaves.max(1);
        build(rng, attrs, max_depth.max(1), budget)
    }

    fn build(rng: &mut impl Rng, attrs: &[AttributeId], depth: usize, budget: usize) -> PolicyTree {
        if depth <= 1 || budget <= 1 || rng.gen_bool(0.3) {
            return PolicyTree::Leaf(attrs[rng.gen_range(0..attrs.len())]);
        }
        let n = rng.gen_range(2..=4usize.min(budget));
        let mut children = Vec::with_capacity(n);
        let mut remaining = budget - n;
        for i in 0..n {
            let slack = if i + 1 == n { remaining } else { rng.gen_range(0..=remaining) };
            remaining -= slack;
            children.push(build(rng, attrs, depth - 1, 1 + slack));
        }
        let k = rng.gen_range(1..=n as u32);
        PolicyTree::Threshold { k, children }
    }

    /// Picks a random subset of `attrs`, each attribute independently with
    /// probability `p`.
    pub fn random_subset(
        rng: &mut impl Rng,
        attrs: &[AttributeId],
        p: f64,
    ) -> BTreeSet<AttributeId> {
        attrs.iter().copied().filter(|_| rng.gen_bool(p)).collect()
    }
}
