//! Fixed-length window with O(1) amortized max and min.

use std::collections::VecDeque;

/// Ring of the most recent `capacity` values with monotone max/min deques.
#[derive(Debug, Clone)]
pub struct MinMaxQueue<T> {
    capacity: usize,
    values: VecDeque<T>,
    /// (sequence, value), values non-increasing front to back
    maxq: VecDeque<(u64, T)>,
    /// (sequence, value), values non-decreasing front to back
    minq: VecDeque<(u64, T)>,
    next_seq: u64,
}

impl<T: PartialOrd + Copy> MinMaxQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        Self {
            capacity,
            values: VecDeque::with_capacity(capacity),
            maxq: VecDeque::new(),
            minq: VecDeque::new(),
            next_seq: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push(&mut self, v: T) {
        if self.values.len() == self.capacity {
            self.values.pop_front();
            let evicted = self.next_seq - self.capacity as u64;
            if self.maxq.front().is_some_and(|&(s, _)| s == evicted) {
                self.maxq.pop_front();
            }
            if self.minq.front().is_some_and(|&(s, _)| s == evicted) {
                self.minq.pop_front();
            }
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.values.push_back(v);
        while self.maxq.back().is_some_and(|&(_, b)| b <= v) {
            self.maxq.pop_back();
        }
        self.maxq.push_back((seq, v));
        while self.minq.back().is_some_and(|&(_, b)| b >= v) {
            self.minq.pop_back();
        }
        self.minq.push_back((seq, v));
    }

    pub fn clear(&mut self) {
        self.values.clear();
        self.maxq.clear();
        self.minq.clear();
    }

    pub fn max(&self) -> Option<T> {
        self.maxq.front().map(|&(_, v)| v)
    }

    pub fn min(&self) -> Option<T> {
        self.minq.front().map(|&(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.values.iter()
    }
}
