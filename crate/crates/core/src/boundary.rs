//! Mod-2 edge chains ordered by edge key.

use alloc::collections::BTreeSet;

use crate::grid::{SimplexId, TriangulatedGrid};
use crate::order::simplex_key;

/// Set of edges `(edge key, edge id)`; adding an edge twice removes it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Boundary {
    set: BTreeSet<(u64, u32)>,
}

impl Boundary {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn toggle(&mut self, key: u64, edge: u32) {
        if !self.set.remove(&(key, edge)) {
            self.set.insert((key, edge));
        }
    }

    pub fn max(&self) -> Option<(u64, u32)> {
        self.set.last().copied()
    }

    /// Symmetric difference in place.
    pub fn merge(&mut self, other: &Boundary) {
        for &(k, e) in &other.set {
            self.toggle(k, e);
        }
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.set.iter().copied()
    }

    /// Removes and returns all edges accepted by `take`.
    pub fn split_off_where(&mut self, mut take: impl FnMut(u32) -> bool) -> Boundary {
        let mut out = Boundary::new();
        self.set.retain(|&(k, e)| {
            if take(e) {
                out.set.insert((k, e));
                false
            } else {
                true
            }
        });
        out
    }
}

impl FromIterator<(u64, u32)> for Boundary {
    fn from_iter<I: IntoIterator<Item = (u64, u32)>>(iter: I) -> Self {
        let mut b = Boundary::new();
        for (k, e) in iter {
            b.toggle(k, e);
        }
        b
    }
}

#[inline]
pub fn edge_key(grid: &TriangulatedGrid, order: &[u32], e: u32) -> u64 {
    simplex_key(grid, order, SimplexId::new(1, e)).edge_key()
}

/// Boundary edges of triangle `t` with their keys.
pub fn triangle_edges(grid: &TriangulatedGrid, order: &[u32], t: u32) -> [(u64, u32); 3] {
    let f = grid.faces(SimplexId::new(2, t));
    [0, 1, 2].map(|i| (edge_key(grid, order, f[i]), f[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toggle_and_merge() {
        let mut a: Boundary = [(5, 1), (3, 2), (9, 0)].into_iter().collect();
        assert_eq!(a.max(), Some((9, 0)));
        a.toggle(9, 0);
        assert_eq!(a.max(), Some((5, 1)));
        let b: Boundary = [(5, 1), (7, 4)].into_iter().collect();
        a.merge(&b);
        assert_eq!(a.iter().collect::<alloc::vec::Vec<_>>(), [(3, 2), (7, 4)]);
        let low = a.split_off_where(|e| e == 2);
        assert_eq!(low.len(), 1);
        assert_eq!(a.len(), 1);
    }
}
