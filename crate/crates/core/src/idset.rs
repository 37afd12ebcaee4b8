use std::collections::BTreeSet;

use crate::codec::MessageId;

/// Set of message IDs stored as a dense prefix `1..=prefix` plus the sparse
/// IDs above it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdSet {
    prefix: u64,
    above: BTreeSet<u64>,
}

impl IdSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` if the ID was already present.
    pub fn insert(&mut self, id: MessageId) -> bool {
        let id = id.get();
        if id == 0 || id <= self.prefix {
            return false;
        }
        if !self.above.insert(id) {
            return false;
        }
        self.compact();
        true
    }

    pub fn contains(&self, id: MessageId) -> bool {
        let id = id.get();
        id != 0 && (id <= self.prefix || self.above.contains(&id))
    }

    /// Largest `k` such that all of `1..=k` are present.
    pub fn prefix(&self) -> MessageId {
        MessageId(self.prefix)
    }

    pub fn max(&self) -> MessageId {
        MessageId(self.above.last().copied().unwrap_or(self.prefix))
    }

    pub fn len(&self) -> u64 {
        self.prefix + self.above.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn compact(&mut self) {
        while self.above.first() == Some(&(self.prefix + 1)) {
            self.above.pop_first();
            self.prefix += 1;
        }
    }
}
