use std::collections::BTreeMap;

use super::outcome::CommitPosition;
use crate::model::{Key, PartitionId, Value};

/// One server's copy of the data it hosts. Every entry remembers the
/// commit position of the write that produced it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Store {
    data: BTreeMap<Key, (Value, CommitPosition)>,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    /// Last-writer-wins by position. Returns whether the write took effect.
    pub fn apply(&mut self, key: Key, value: Value, pos: CommitPosition) -> bool {
        match self.data.get(&key) {
            Some((_, cur)) if *cur >= pos => false,
            _ => {
                self.data.insert(key, (value, pos));
                true
            }
        }
    }

    pub fn get(&self, key: &Key) -> Option<&Value> {
        self.data.get(key).map(|(v, _)| v)
    }

    pub fn position(&self, key: &Key) -> Option<CommitPosition> {
        self.data.get(key).map(|(_, p)| *p)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Key, &Value, CommitPosition)> {
        self.data.iter().map(|(k, (v, p))| (k, v, *p))
    }

    /// Entries of partition `p`.
    pub fn partition(&self, p: PartitionId) -> Vec<(Key, Value, CommitPosition)> {
        let lo = Key::new(p.0, 0);
        let hi = Key::new(p.0, u64::MAX);
        self.data
            .range(lo..=hi)
            .map(|(k, (v, pos))| (*k, *v, *pos))
            .collect()
    }

    /// Plain key→value view.
    pub fn values(&self) -> BTreeMap<Key, Value> {
        self.data.iter().map(|(k, (v, _))| (*k, *v)).collect()
    }
}
