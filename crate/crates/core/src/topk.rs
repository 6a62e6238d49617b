//! Bounded top-k selection over streamed (id, distance) candidates.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// One search hit. Ordering is by distance, then by smaller id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub distance: f32,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Max-heap of the k best (smallest) candidates seen so far.
#[derive(Debug)]
pub struct TopK {
    k: usize,
    heap: BinaryHeap<Neighbor>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    pub fn push(&mut self, id: u32, distance: f32) {
        if self.k == 0 {
            return;
        }
        let candidate = Neighbor { id, distance };
        if self.heap.len() < self.k {
            self.heap.push(candidate);
        } else if candidate < *self.heap.peek().expect("non-empty at capacity") {
            self.heap.pop();
            self.heap.push(candidate);
        }
    }

    /// Ascending by (distance, id).
    pub fn into_sorted(self) -> Vec<Neighbor> {
        let mut v = self.heap.into_vec();
        v.sort_unstable();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_the_k_smallest() {
        let mut top = TopK::new(3);
        for (id, d) in [(0, 5.0), (1, 1.0), (2, 4.0), (3, 2.0), (4, 3.0)] {
            top.push(id, d);
        }
        let got: Vec<u32> = top.into_sorted().iter().map(|n| n.id).collect();
        assert_eq!(got, vec![1, 3, 4]);
    }

    #[test]
    fn ties_prefer_smaller_id() {
        let mut top = TopK::new(2);
        for id in [5u32, 2, 9, 1] {
            top.push(id, 1.0);
        }
        let got: Vec<u32> = top.into_sorted().iter().map(|n| n.id).collect();
        assert_eq!(got, vec![1, 2]);
    }

    #[test]
    fn shorter_streams_yield_fewer() {
        let mut top = TopK::new(10);
        top.push(3, 0.5);
        assert_eq!(top.into_sorted().len(), 1);
    }
}
