//! Subsets of the node set `{0, .., n-1}` as bit masks.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported node count.
pub const MAX_NODES: usize = 63;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeSet(u64);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_NODES);
        NodeSet((1u64 << n) - 1)
    }

    pub fn from_bits(bits: u64) -> Self {
        NodeSet(bits)
    }

    pub fn singleton(i: usize) -> Self {
        NodeSet(1 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
        NodeSet(it.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    /// Parses one-based indices, as used by the text formats.
    pub fn from_one_based(indices: &[usize], n: usize) -> Result<Self> {
        let mut s = NodeSet::EMPTY;
        for &i in indices {
            if i == 0 || i > n {
                return Err(Error::InvalidArgument(format!("node {i} outside 1..={n}")));
            }
            s.insert(i - 1);
        }
        Ok(s)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 | other.0)
    }

    pub fn intersection(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & other.0)
    }

    pub fn complement(self, n: usize) -> NodeSet {
        NodeSet(!self.0 & NodeSet::full(n).0)
    }

    pub fn is_subset(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: NodeSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }

    pub fn least(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn one_based(self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }

    /// All nonempty subsets of `{0..n-1}` in increasing bit order.
    pub fn nonempty_subsets(n: usize) -> impl Iterator<Item = NodeSet> {
        (1..=NodeSet::full(n).0).map(NodeSet)
    }

    /// Nonempty proper subsets of `{0..n-1}`.
    pub fn proper_subsets(n: usize) -> impl Iterator<Item = NodeSet> {
        (1..NodeSet::full(n).0).map(NodeSet)
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// One-based set notation, e.g. `{1,3}`.
impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.one_based().iter().map(usize::to_string).collect();
        write!(f, "{{{}}}", items.join(","))
    }
}

impl Serialize for NodeSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for NodeSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        if v.iter().any(|&i| i == 0 || i > MAX_NODES) {
            return Err(serde::de::Error::custom("node indices are one-based"));
        }
        Ok(NodeSet::from_indices(v.into_iter().map(|i| i - 1)))
    }
}
