//! FIFO content store.

use std::collections::{BTreeMap, VecDeque};

use crate::name::Name;
use crate::packet::ContentObject;

#[derive(Debug, Clone, Default)]
pub struct ContentStore {
    capacity: usize,
    order: VecDeque<Name>,
    entries: BTreeMap<Name, ContentObject>,
}

impl ContentStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            ..Default::default()
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stores `obj`, evicting the oldest entry when full. Re-inserting a
    /// name replaces the object but keeps its queue position.
    pub fn insert(&mut self, obj: ContentObject) {
        if self.capacity == 0 {
            return;
        }
        if let Some(slot) = self.entries.get_mut(&obj.name) {
            *slot = obj;
            return;
        }
        if self.entries.len() == self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.entries.remove(&old);
            }
        }
        self.order.push_back(obj.name.clone());
        self.entries.insert(obj.name.clone(), obj);
    }

    /// Drops the entry stored under exactly `name`, if any.
    pub fn remove(&mut self, name: &Name) -> Option<ContentObject> {
        let obj = self.entries.remove(name)?;
        self.order.retain(|n| n != name);
        Some(obj)
    }

    /// Exact match first, else the smallest stored name that `name` prefixes.
    pub fn lookup(&self, name: &Name) -> Option<&ContentObject> {
        self.entries
            .range(name.clone()..)
            .next()
            .filter(|(stored, _)| name.is_prefix_of(stored))
            .map(|(_, obj)| obj)
    }
}
