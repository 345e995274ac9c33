//! Weighted sampling over sites.
//!
//! An array-backed sum tree: each internal node holds the sum of its two
//! children, recomputed from the children on every update, so the stored
//! sums are a pure function of the leaves and do not drift.

#[derive(Debug, Clone)]
pub struct RateIndex {
    len: usize,
    cap: usize,
    tree: Vec<f64>,
}

impl RateIndex {
    pub fn new(len: usize) -> Self {
        let cap = len.max(1).next_power_of_two();
        RateIndex {
            len,
            cap,
            tree: vec![0.0; 2 * cap],
        }
    }

    pub fn from_weights(weights: &[f64]) -> Self {
        let mut index = Self::new(weights.len());
        index.tree[index.cap..index.cap + weights.len()].copy_from_slice(weights);
        index.rebuild();
        index
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Recomputes every internal node from the leaves.
    pub fn rebuild(&mut self) {
        for node in (1..self.cap).rev() {
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.tree[self.cap + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, weight: f64) {
        debug_assert!(i < self.len);
        debug_assert!(weight >= 0.0);
        let mut node = self.cap + i;
        if self.tree[node] == weight {
            return;
        }
        self.tree[node] = weight;
        while node > 1 {
            node >>= 1;
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    /// The leaf `i` such that the prefix sum before `i` is at most `target`
    /// and the prefix sum through `i` exceeds it. `target` must lie in
    /// `[0, total)`. A branch with zero weight is never entered, so the
    /// returned leaf always has positive weight when the total does.
    #[inline]
    pub fn sample(&self, mut target: f64) -> usize {
        let mut node = 1;
        while node < self.cap {
            let left = 2 * node;
            let lw = self.tree[left];
            if target < lw {
                node = left;
            } else if self.tree[left + 1] > 0.0 {
                target -= lw;
                node = left + 1;
            } else {
                node = left;
            }
        }
        node - self.cap
    }

    pub fn weights(&self) -> &[f64] {
        &self.tree[self.cap..self.cap + self.len]
    }
}
