//! Vertex orders and lexicographic simplex keys.
//!
//! The vertex order is the rank of `(value, global vertex id)` in ascending
//! order, so equal values are broken by id. A simplex is compared by the
//! descending list of its vertex orders; [`SimplexKey`] packs that list into a
//! `u128` so the comparison is a single integer compare, and a face always
//! sorts before any simplex that extends it.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::Error;
use crate::grid::{SimplexId, TriangulatedGrid};

/// Vertex id to order rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalOrder {
    pub order: Vec<u32>,
}

/// Compares two `(value, id)` pairs the way the filtration does.
#[inline]
pub fn compare_values(a: f64, ia: u64, b: f64, ib: u64) -> Ordering {
    // +0.0 folds the two zeros together
    (a + 0.0).total_cmp(&(b + 0.0)).then(ia.cmp(&ib))
}

pub fn check_values(values: &[f64]) -> Result<(), Error> {
    match values.iter().position(|v| v.is_nan()) {
        Some(i) => Err(Error::NanValue { vertex: i as u64 }),
        None => Ok(()),
    }
}

impl GlobalOrder {
    /// Sorts all vertices once.
    pub fn sequential(values: &[f64]) -> Result<Self, Error> {
        check_values(values)?;
        let mut ids: Vec<u32> = (0..values.len() as u32).collect();
        ids.sort_unstable_by(|&a, &b| compare_values(values[a as usize], a as u64, values[b as usize], b as u64));
        let mut order = alloc::vec![0u32; values.len()];
        for (rank, &v) in ids.iter().enumerate() {
            order[v as usize] = rank as u32;
        }
        Ok(GlobalOrder { order })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = alloc::vec![false; self.order.len()];
        for &o in &self.order {
            match seen.get_mut(o as usize) {
                Some(s) if !*s => *s = true,
                _ => return false,
            }
        }
        true
    }
}

/// Descending vertex orders packed into 32-bit fields from the top, each
/// stored as `order + 1`, with zero fields for missing vertices.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimplexKey(pub u128);

impl SimplexKey {
    pub fn from_orders(orders: &[u32]) -> Self {
        let mut buf = [0u32; 4];
        buf[..orders.len()].copy_from_slice(orders);
        let buf = &mut buf[..orders.len()];
        buf.sort_unstable_by(|a, b| b.cmp(a));
        let mut k = 0u128;
        for (i, &o) in buf.iter().enumerate() {
            k |= ((o as u128) + 1) << (96 - 32 * i);
        }
        SimplexKey(k)
    }

    /// Descending vertex orders.
    pub fn orders(&self) -> impl Iterator<Item = u32> + '_ {
        (0..4).map_while(move |i| {
            let f = (self.0 >> (96 - 32 * i)) as u32;
            (f != 0).then(|| f - 1)
        })
    }

    /// Order of the highest vertex.
    pub fn max_order(&self) -> u32 {
        ((self.0 >> 96) as u32).wrapping_sub(1)
    }

    pub fn dim(&self) -> u8 {
        (self.orders().count() as u8).saturating_sub(1)
    }

    /// The first two fields, which is all an edge has.
    pub fn edge_key(&self) -> u64 {
        (self.0 >> 64) as u64
    }
}

impl fmt::Debug for SimplexKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.orders()).finish()
    }
}

/// Key of `s` given per-vertex orders indexed like the grid's vertices.
#[inline]
pub fn simplex_key(grid: &TriangulatedGrid, order: &[u32], s: SimplexId) -> SimplexKey {
    let verts = grid.vertices(s);
    let mut o = [0u32; 4];
    for (i, &v) in verts.iter().enumerate() {
        o[i] = order[v as usize];
    }
    SimplexKey::from_orders(&o[..verts.len()])
}

/// The vertex of `s` with the highest order.
pub fn max_vertex(grid: &TriangulatedGrid, order: &[u32], s: SimplexId) -> u32 {
    *grid
        .vertices(s)
        .iter()
        .max_by_key(|&&v| order[v as usize])
        .expect("simplices have vertices")
}
