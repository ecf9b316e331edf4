use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::graph::EntityId;

/// Draws `n` distinct entities uniformly from the sorted `pool`, skipping
/// anything in `excluded`. Returns `None` when fewer than `n` remain.
pub(crate) fn choose_excluding<R: Rng + ?Sized>(
    pool: &[EntityId],
    excluded: &[EntityId],
    n: usize,
    rng: &mut R,
) -> Option<Vec<EntityId>> {
    let excluded: BTreeSet<EntityId> = excluded
        .iter()
        .copied()
        .filter(|e| pool.binary_search(e).is_ok())
        .collect();
    let available = pool.len() - excluded.len();
    if available < n {
        return None;
    }
    if n == 0 {
        return Some(Vec::new());
    }
    if available * 2 >= pool.len() {
        let mut chosen = Vec::with_capacity(n);
        while chosen.len() < n {
            let candidate = pool[rng.random_range(0..pool.len())];
            if !excluded.contains(&candidate) && !chosen.contains(&candidate) {
                chosen.push(candidate);
            }
        }
        Some(chosen)
    } else {
        let remaining: Vec<EntityId> = pool
            .iter()
            .copied()
            .filter(|e| !excluded.contains(e))
            .collect();
        Some(remaining.choose_multiple(rng, n).copied().collect())
    }
}

/// Uniform fixed-size sample of a stream, kept in arrival order.
pub(crate) struct Reservoir<T> {
    capacity: usize,
    seen: usize,
    items: Vec<(usize, T)>,
}

impl<T> Reservoir<T> {
    pub(crate) fn new(capacity: usize) -> Self {
        Reservoir {
            capacity,
            seen: 0,
            items: Vec::new(),
        }
    }

    pub(crate) fn offer<R: Rng + ?Sized>(&mut self, item: T, rng: &mut R) {
        let index = self.seen;
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push((index, item));
        } else {
            let j = rng.random_range(0..=index);
            if j < self.capacity {
                self.items[j] = (index, item);
            }
        }
    }

    pub(crate) fn seen(&self) -> usize {
        self.seen
    }

    pub(crate) fn into_sorted(mut self) -> Vec<T> {
        self.items.sort_unstable_by_key(|(i, _)| *i);
        self.items.into_iter().map(|(_, t)| t).collect()
    }
}
