//! Persistence diagrams and their canonical form.

use alloc::vec::Vec;

use crate::grid::{SimplexId, TriangulatedGrid};
use crate::order::{max_vertex, simplex_key, SimplexKey};

/// A finite pair. Values are the field value at the highest vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair {
    pub dim: u8,
    pub birth: SimplexId,
    pub death: SimplexId,
    pub birth_key: SimplexKey,
    pub death_key: SimplexKey,
    pub birth_value: f64,
    pub death_value: f64,
}

/// A class that never dies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Essential {
    pub dim: u8,
    pub birth: SimplexId,
    pub birth_key: SimplexKey,
    pub birth_value: f64,
}

impl Pair {
    pub fn new(
        grid: &TriangulatedGrid,
        order: &[u32],
        values: &[f64],
        dim: u8,
        birth: SimplexId,
        death: SimplexId,
    ) -> Self {
        Pair {
            dim,
            birth,
            death,
            birth_key: simplex_key(grid, order, birth),
            death_key: simplex_key(grid, order, death),
            birth_value: values[max_vertex(grid, order, birth) as usize],
            death_value: values[max_vertex(grid, order, death) as usize],
        }
    }

    pub fn birth_order(&self) -> u32 {
        self.birth_key.max_order()
    }

    pub fn death_order(&self) -> u32 {
        self.death_key.max_order()
    }
}

impl Essential {
    pub fn new(grid: &TriangulatedGrid, order: &[u32], values: &[f64], birth: SimplexId) -> Self {
        Essential {
            dim: birth.dim,
            birth,
            birth_key: simplex_key(grid, order, birth),
            birth_value: values[max_vertex(grid, order, birth) as usize],
        }
    }

    pub fn birth_order(&self) -> u32 {
        self.birth_key.max_order()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub pairs: Vec<Pair>,
    pub essential: Vec<Essential>,
}

impl PersistenceDiagram {
    /// Sorts into the canonical order: by dimension, then birth key.
    pub fn canonicalize(&mut self) {
        self.pairs.sort_by_key(|p| (p.dim, p.birth_key, p.death_key));
        self.essential.sort_by_key(|e| (e.dim, e.birth_key));
    }

    pub fn finite_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for p in &self.pairs {
            c[p.dim as usize] += 1;
        }
        c
    }

    pub fn essential_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for e in &self.essential {
            c[e.dim as usize] += 1;
        }
        c
    }

    /// Multiset of `(dim, birth order, death order)`, with `None` death for
    /// essential classes, dropping pairs born and killed at the same vertex.
    pub fn signature(&self) -> Vec<(u8, u32, Option<u32>)> {
        let mut s: Vec<_> = self
            .pairs
            .iter()
            .filter(|p| p.birth_order() != p.death_order())
            .map(|p| (p.dim, p.birth_order(), Some(p.death_order())))
            .chain(self.essential.iter().map(|e| (e.dim, e.birth_order(), None)))
            .collect();
        s.sort_unstable();
        s
    }

    /// First violated sanity property, if any.
    pub fn check_invariants(&self) -> Option<&'static str> {
        for p in &self.pairs {
            if p.death_value < p.birth_value {
                return Some("death value below birth value");
            }
            if p.death_key <= p.birth_key {
                return Some("death precedes birth in the filtration");
            }
            if p.death.dim != p.birth.dim + 1 || p.birth.dim != p.dim {
                return Some("pair dimensions inconsistent");
            }
        }
        None
    }
}
