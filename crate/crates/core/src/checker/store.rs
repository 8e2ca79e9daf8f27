use std::hash::BuildHasher;

use hashbrown::HashTable;
use rustc_hash::FxBuildHasher;

/// Deduplicating store of fixed-size packed states. Indices follow
/// insertion order.
pub struct StateStore {
    stride: usize,
    arena: Vec<u8>,
    table: HashTable<u32>,
    hasher: FxBuildHasher,
}

impl std::fmt::Debug for StateStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateStore").field("stride", &self.stride).field("len", &self.len()).finish()
    }
}

impl StateStore {
    pub fn new(stride: usize) -> Self {
        StateStore { stride: stride.max(1), arena: Vec::new(), table: HashTable::new(), hasher: FxBuildHasher }
    }

    pub fn len(&self) -> usize {
        self.arena.len() / self.stride
    }

    pub fn is_empty(&self) -> bool {
        self.arena.is_empty()
    }

    pub fn get(&self, idx: u32) -> &[u8] {
        let i = idx as usize * self.stride;
        &self.arena[i..i + self.stride]
    }

    fn hash(&self, key: &[u8]) -> u64 {
        self.hasher.hash_one(key)
    }

    pub fn find(&self, key: &[u8]) -> Option<u32> {
        let h = self.hash(key);
        self.table.find(h, |&i| self.get(i) == key).copied()
    }

    /// Returns the index of `key` and whether it was new.
    pub fn insert(&mut self, key: &[u8]) -> (u32, bool) {
        debug_assert_eq!(key.len(), self.stride);
        let h = self.hash(key);
        let arena = &self.arena;
        let stride = self.stride;
        let eq = |&i: &u32| &arena[i as usize * stride..(i as usize + 1) * stride] == key;
        if let Some(&i) = self.table.find(h, eq) {
            return (i, false);
        }
        let idx = u32::try_from(self.len()).expect("fewer than 2^32 states");
        self.arena.extend_from_slice(key);
        let (arena, hasher) = (&self.arena, &self.hasher);
        self.table.insert_unique(h, idx, |&i| hasher.hash_one(&arena[i as usize * stride..(i as usize + 1) * stride]));
        (idx, true)
    }

    /// Approximate heap usage in bytes.
    pub fn memory(&self) -> usize {
        self.arena.capacity() + self.table.capacity() * (std::mem::size_of::<u32>() + 1)
    }
}
