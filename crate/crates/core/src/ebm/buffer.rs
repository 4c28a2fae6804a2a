use std::collections::VecDeque;

use crate::geometry::Point3;

pub const DEFAULT_BUFFER_CAPACITY: usize = 8192;

/// Bounded FIFO store of past Langevin end states.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Point3>,
}

impl Default for ReplayBuffer {
    fn default() -> Self {
        Self::new(DEFAULT_BUFFER_CAPACITY)
    }
}

impl ReplayBuffer {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
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

    pub fn get(&self, i: usize) -> Option<&Point3> {
        self.entries.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point3> {
        self.entries.iter()
    }

    /// Appends states, evicting the oldest once full.
    pub fn extend(&mut self, states: impl IntoIterator<Item = Point3>) {
        for p in states {
            if self.entries.len() == self.capacity {
                self.entries.pop_front();
            }
            self.entries.push_back(p);
        }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}
