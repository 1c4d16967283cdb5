//! Lower-star discrete gradient and v-path tracing.
//!
//! Each vertex pairs the simplices of its lower star independently, so the
//! gradient of a block is exact for every simplex whose highest vertex has its
//! full star inside the block.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::sync::atomic::{AtomicU32, Ordering::Relaxed};

use crate::error::Error;
use crate::grid::{SimplexId, TriangulatedGrid};

const UNSET: u32 = u32::MAX;
const CRITICAL: u32 = u32::MAX - 1;
const UP: u32 = 1 << 31;

/// State of one simplex in the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Unset,
    Critical,
    /// Paired with this cofacet.
    Up(u32),
    /// Paired with this facet.
    Down(u32),
}

impl Slot {
    #[inline]
    pub fn encode(self) -> u32 {
        match self {
            Slot::Unset => UNSET,
            Slot::Critical => CRITICAL,
            Slot::Up(i) => i | UP,
            Slot::Down(i) => i,
        }
    }

    #[inline]
    pub fn decode(raw: u32) -> Slot {
        match raw {
            UNSET => Slot::Unset,
            CRITICAL => Slot::Critical,
            r if r & UP != 0 => Slot::Up(r & !UP),
            r => Slot::Down(r),
        }
    }
}

/// One encoded slot per simplex, per dimension.
///
/// Slots are atomics so that disjoint lower stars can be written from several
/// threads through a shared reference; all accesses are relaxed.
#[derive(Debug)]
pub struct Gradient {
    slots: [Vec<AtomicU32>; 4],
}

impl Gradient {
    pub fn new(grid: &TriangulatedGrid) -> Self {
        Gradient {
            slots: [0u8, 1, 2, 3].map(|d| (0..grid.simplex_count(d)).map(|_| AtomicU32::new(UNSET)).collect()),
        }
    }

    #[inline]
    fn raw(&self, s: SimplexId) -> u32 {
        self.slots[s.dim as usize][s.index as usize].load(Relaxed)
    }

    #[inline]
    pub fn get(&self, s: SimplexId) -> Slot {
        Slot::decode(self.raw(s))
    }

    #[inline]
    pub fn set(&mut self, s: SimplexId, slot: Slot) {
        *self.slots[s.dim as usize][s.index as usize].get_mut() = slot.encode();
    }

    /// Writes a slot through a shared reference.
    #[inline]
    pub fn set_shared(&self, s: SimplexId, slot: Slot) {
        self.slots[s.dim as usize][s.index as usize].store(slot.encode(), Relaxed);
    }

    #[inline]
    pub fn is_critical(&self, s: SimplexId) -> bool {
        self.raw(s) == CRITICAL
    }

    /// Critical simplices of dimension `dim` accepted by `keep`.
    pub fn critical(&self, dim: u8, mut keep: impl FnMut(u32) -> bool) -> Vec<u32> {
        self.slots[dim as usize]
            .iter()
            .enumerate()
            .filter(|&(i, r)| r.load(Relaxed) == CRITICAL && keep(i as u32))
            .map(|(i, _)| i as u32)
            .collect()
    }

    pub fn len(&self, dim: u8) -> usize {
        self.slots[dim as usize].len()
    }

    /// Total number of slots.
    pub fn slot_count(&self) -> usize {
        self.slots.iter().map(Vec::len).sum()
    }

    /// Checks that every simplex is either critical or matched with exactly
    /// one face or cofacet that points back, and that the matched pair has
    /// the same highest vertex (zero persistence).
    pub fn validate(&self, grid: &TriangulatedGrid, order: &[u32]) -> Result<(), Error> {
        for d in 0..4u8 {
            for i in 0..grid.simplex_count(d) as u32 {
                let s = SimplexId::new(d, i);
                let (other, back) = match self.get(s) {
                    Slot::Unset => return Err(Error::Invariant("simplex without gradient slot")),
                    Slot::Critical => continue,
                    Slot::Up(c) => {
                        let c = SimplexId::new(d + 1, c);
                        if !grid.faces(c).as_slice().contains(&i) {
                            return Err(Error::Invariant("gradient pair is not a face relation"));
                        }
                        (c, Slot::Down(i))
                    }
                    Slot::Down(f) => {
                        if d == 0 || !grid.faces(s).as_slice().contains(&f) {
                            return Err(Error::Invariant("gradient pair is not a face relation"));
                        }
                        (SimplexId::new(d - 1, f), Slot::Up(i))
                    }
                };
                if self.get(other) != back {
                    return Err(Error::Invariant("gradient pair is not reciprocal"));
                }
                if crate::order::max_vertex(grid, order, s) != crate::order::max_vertex(grid, order, other) {
                    return Err(Error::Invariant("gradient pair spans two lower stars"));
                }
            }
        }
        Ok(())
    }
}

impl Clone for Gradient {
    fn clone(&self) -> Self {
        Gradient {
            slots: core::array::from_fn(|d| self.slots[d].iter().map(|a| AtomicU32::new(a.load(Relaxed))).collect()),
        }
    }
}

impl PartialEq for Gradient {
    fn eq(&self, other: &Self) -> bool {
        (0..4).all(|d| {
            self.slots[d].len() == other.slots[d].len()
                && self.slots[d].iter().zip(&other.slots[d]).all(|(a, b)| a.load(Relaxed) == b.load(Relaxed))
        })
    }
}

impl Eq for Gradient {}

#[derive(Clone, Copy, Default)]
struct Cell {
    dim: u8,
    index: u32,
    /// Orders of the other vertices, descending, stored as `order + 1`.
    key: [u32; 3],
    facets: [u8; 3],
    nfacets: u8,
    cof: [u8; 6],
    ncof: u8,
    state: u8,
}

const FREE: u8 = 0;
const DONE: u8 = 1;

type Heap = BinaryHeap<Reverse<([u32; 3], u8)>>;

/// Reusable buffers for processing lower stars one vertex at a time.
#[derive(Default)]
pub struct LowerStar {
    cells: Vec<Cell>,
    zero: Heap,
    one: Heap,
}

impl LowerStar {
    pub fn new() -> Self {
        Self::default()
    }

    fn collect(&mut self, grid: &TriangulatedGrid, order: &[u32], v: u32) {
        self.cells.clear();
        let ov = order[v as usize];
        for dim in 1..=3u8 {
            let first = self.cells.len();
            let cells = &mut self.cells;
            grid.for_each_star(v, dim, |index, verts| {
                let mut key = [0u32; 3];
                let mut n = 0;
                for &u in verts.iter() {
                    if u == v {
                        continue;
                    }
                    let o = order[u as usize];
                    if o > ov {
                        return;
                    }
                    key[n] = o + 1;
                    n += 1;
                }
                key[..n].sort_unstable_by(|a, b| b.cmp(a));
                cells.push(Cell { dim, index, key, ..Cell::default() });
            });
            if dim == 1 {
                continue;
            }
            // link every cell to its facets that contain v, matched by key
            let prev = self.cells[..first].iter().rposition(|c| c.dim != dim - 1).map_or(0, |p| p + 1);
            for c in first..self.cells.len() {
                let key = self.cells[c].key;
                let k = dim as usize;
                for drop in 0..k {
                    let mut fk = [0u32; 3];
                    let mut n = 0;
                    for (i, &o) in key[..k].iter().enumerate() {
                        if i != drop {
                            fk[n] = o;
                            n += 1;
                        }
                    }
                    let f = (prev..first)
                        .find(|&f| self.cells[f].key == fk)
                        .expect("facet of a lower-star simplex is in the lower star");
                    let cell = &mut self.cells[c];
                    cell.facets[cell.nfacets as usize] = f as u8;
                    cell.nfacets += 1;
                    let fc = &mut self.cells[f];
                    fc.cof[fc.ncof as usize] = c as u8;
                    fc.ncof += 1;
                }
            }
        }
    }

    fn unpaired_facets(&self, c: usize) -> (usize, u8) {
        let cell = &self.cells[c];
        let mut n = 0;
        let mut last = 0;
        for &f in &cell.facets[..cell.nfacets as usize] {
            if self.cells[f as usize].state == FREE {
                n += 1;
                last = f;
            }
        }
        (n, last)
    }

    fn push_ready_cofacets(&mut self, c: usize) {
        let cell = self.cells[c];
        for &a in &cell.cof[..cell.ncof as usize] {
            let a = a as usize;
            if self.cells[a].state == FREE && self.unpaired_facets(a).0 == 1 {
                self.zero.push(Reverse((self.cells[a].key, a as u8)));
            }
        }
    }

    /// Pairs the lower star of `v`, reporting each decided slot through `emit`.
    pub fn process(
        &mut self,
        grid: &TriangulatedGrid,
        order: &[u32],
        v: u32,
        mut emit: impl FnMut(SimplexId, Slot),
    ) {
        self.collect(grid, order, v);
        self.zero.clear();
        self.one.clear();
        let vs = SimplexId::new(0, v);
        let Some(delta) = (0..self.cells.len())
            .filter(|&c| self.cells[c].dim == 1)
            .min_by_key(|&c| self.cells[c].key)
        else {
            emit(vs, Slot::Critical);
            return;
        };
        let de = self.cells[delta].index;
        emit(vs, Slot::Up(de));
        emit(SimplexId::new(1, de), Slot::Down(v));
        self.cells[delta].state = DONE;
        for c in 0..self.cells.len() {
            if self.cells[c].dim == 1 && c != delta {
                self.one.push(Reverse((self.cells[c].key, c as u8)));
            }
        }
        self.push_ready_cofacets(delta);
        loop {
            while let Some(Reverse((_, a))) = self.zero.pop() {
                let a = a as usize;
                if self.cells[a].state != FREE {
                    continue;
                }
                let (n, f) = self.unpaired_facets(a);
                if n == 0 {
                    self.one.push(Reverse((self.cells[a].key, a as u8)));
                    continue;
                }
                let f = f as usize;
                let (fc, ac) = (self.cells[f], self.cells[a]);
                emit(SimplexId::new(fc.dim, fc.index), Slot::Up(ac.index));
                emit(SimplexId::new(ac.dim, ac.index), Slot::Down(fc.index));
                self.cells[a].state = DONE;
                self.cells[f].state = DONE;
                self.push_ready_cofacets(a);
                self.push_ready_cofacets(f);
            }
            let mut progressed = false;
            while let Some(Reverse((_, g))) = self.one.pop() {
                let g = g as usize;
                if self.cells[g].state != FREE {
                    continue;
                }
                let gc = self.cells[g];
                emit(SimplexId::new(gc.dim, gc.index), Slot::Critical);
                self.cells[g].state = DONE;
                self.push_ready_cofacets(g);
                progressed = true;
                break;
            }
            if !progressed && self.zero.is_empty() {
                break;
            }
        }
        debug_assert!(self.cells.iter().all(|c| c.state == DONE));
    }
}

/// Sequential gradient over every vertex accepted by `keep`.
pub fn compute_gradient(
    grid: &TriangulatedGrid,
    order: &[u32],
    mut keep: impl FnMut(u32) -> bool,
) -> Gradient {
    let mut g = Gradient::new(grid);
    let mut ls = LowerStar::new();
    for v in 0..grid.vertex_count() {
        if keep(v) {
            ls.process(grid, order, v, |s, slot| g.set(s, slot));
        }
    }
    g
}

/// Where a v-path ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceEnd {
    /// A critical vertex (descending) or critical top simplex (ascending).
    Extremum(u32),
    /// Left the domain through the boundary (ascending only).
    Infinity,
    /// Reached a simplex that `inside` rejected; resume there.
    Exit(u32),
}

/// Follows vertex-edge pairs downward from vertex `v`.
pub fn trace_min(
    grid: &TriangulatedGrid,
    grad: &Gradient,
    mut v: u32,
    inside: impl Fn(u32) -> bool,
) -> Result<TraceEnd, Error> {
    for _ in 0..=grid.vertex_count() {
        if !inside(v) {
            return Ok(TraceEnd::Exit(v));
        }
        match grad.get(SimplexId::new(0, v)) {
            Slot::Critical => return Ok(TraceEnd::Extremum(v)),
            Slot::Up(e) => {
                let verts = grid.vertices(SimplexId::new(1, e));
                v = if verts[0] == v { verts[1] } else { verts[0] };
            }
            _ => return Err(Error::Invariant("descending path reached an unpaired vertex")),
        }
    }
    Err(Error::Invariant("descending path does not terminate"))
}

/// Follows top-simplex/facet pairs upward from top simplex `t` of dimension `dim`.
pub fn trace_max(
    grid: &TriangulatedGrid,
    grad: &Gradient,
    dim: u8,
    mut t: u32,
    inside: impl Fn(u32) -> bool,
) -> Result<TraceEnd, Error> {
    for _ in 0..=grid.simplex_count(dim) {
        if !inside(t) {
            return Ok(TraceEnd::Exit(t));
        }
        match grad.get(SimplexId::new(dim, t)) {
            Slot::Critical => return Ok(TraceEnd::Extremum(t)),
            Slot::Down(f) => {
                let cof = grid.cofacets(SimplexId::new(dim - 1, f));
                match cof.iter().find(|&&c| c != t) {
                    Some(&c) => t = c,
                    None => return Ok(TraceEnd::Infinity),
                }
            }
            _ => return Err(Error::Invariant("ascending path reached an unpaired top simplex")),
        }
    }
    Err(Error::Invariant("ascending path does not terminate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridShape;
    use crate::order::GlobalOrder;

    fn lcg_values(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 40) as f64
            })
            .collect()
    }

    fn check_valid(grid: &TriangulatedGrid, order: &[u32], g: &Gradient) -> [usize; 4] {
        let mut crit = [0usize; 4];
        for d in 0..=3u8 {
            for i in 0..grid.simplex_count(d) as u32 {
                let s = SimplexId::new(d, i);
                match g.get(s) {
                    Slot::Unset => panic!("unset {s}"),
                    Slot::Critical => crit[d as usize] += 1,
                    Slot::Up(c) => {
                        assert!(grid.cofacets(s).contains(&c));
                        assert_eq!(g.get(SimplexId::new(d + 1, c)), Slot::Down(i));
                        // a pair shares its highest vertex
                        let m = |x: SimplexId| {
                            grid.vertices(x).iter().map(|&v| order[v as usize]).max().unwrap()
                        };
                        assert_eq!(m(s), m(SimplexId::new(d + 1, c)));
                    }
                    Slot::Down(f) => {
                        assert_eq!(g.get(SimplexId::new(d - 1, f)), Slot::Up(i));
                    }
                }
            }
        }
        crit
    }

    #[test]
    fn random_gradients_are_valid_matchings() {
        for (shape, seed) in [((4, 4, 4), 1), ((5, 3, 4), 2), ((6, 6, 1), 3), ((7, 1, 1), 4)] {
            let grid = TriangulatedGrid::new(GridShape::new(shape.0, shape.1, shape.2)).unwrap();
            let values = lcg_values(grid.vertex_count() as usize, seed);
            let order = GlobalOrder::sequential(&values).unwrap().order;
            let g = compute_gradient(&grid, &order, |_| true);
            let crit = check_valid(&grid, &order, &g);
            assert!(g.validate(&grid, &order).is_ok());
            let euler = crit[0] as i64 - crit[1] as i64 + crit[2] as i64 - crit[3] as i64;
            assert_eq!(euler, 1);
        }
    }

    #[test]
    fn validate_rejects_broken_matchings() {
        let grid = TriangulatedGrid::new(GridShape::new(3, 3, 2)).unwrap();
        let values = lcg_values(grid.vertex_count() as usize, 9);
        let order = GlobalOrder::sequential(&values).unwrap().order;
        let g = compute_gradient(&grid, &order, |_| true);
        let paired = (0..grid.simplex_count(1) as u32)
            .map(|e| SimplexId::new(1, e))
            .find(|&e| matches!(g.get(e), Slot::Up(_)))
            .unwrap();
        let mut broken = g.clone();
        broken.set(paired, Slot::Critical);
        assert!(broken.validate(&grid, &order).is_err());
        let mut unset = g.clone();
        unset.set(SimplexId::new(3, 0), Slot::Unset);
        assert!(unset.validate(&grid, &order).is_err());
    }

    #[test]
    fn elevation_is_perfect() {
        let grid = TriangulatedGrid::new(GridShape::new(5, 4, 3)).unwrap();
        let values: Vec<f64> = (0..grid.vertex_count())
            .map(|v| {
                let p = grid.vertex_coords(v);
                (p[0] + p[1] + p[2]) as f64
            })
            .collect();
        let order = GlobalOrder::sequential(&values).unwrap().order;
        let g = compute_gradient(&grid, &order, |_| true);
        assert_eq!(check_valid(&grid, &order, &g), [1, 0, 0, 0]);
    }

    #[test]
    fn traces_reach_critical_cells() {
        let grid = TriangulatedGrid::new(GridShape::new(5, 5, 5)).unwrap();
        let values = lcg_values(grid.vertex_count() as usize, 9);
        let order = GlobalOrder::sequential(&values).unwrap().order;
        let g = compute_gradient(&grid, &order, |_| true);
        for v in 0..grid.vertex_count() {
            match trace_min(&grid, &g, v, |_| true).unwrap() {
                TraceEnd::Extremum(m) => assert!(g.is_critical(SimplexId::new(0, m))),
                other => panic!("{other:?}"),
            }
        }
        for t in 0..grid.simplex_count(3) as u32 {
            match trace_max(&grid, &g, 3, t, |_| true).unwrap() {
                TraceEnd::Extremum(m) => assert!(g.is_critical(SimplexId::new(3, m))),
                TraceEnd::Infinity => {}
                TraceEnd::Exit(_) => panic!("exit without a boundary"),
            }
        }
        assert_eq!(trace_min(&grid, &g, 7, |v| v != 7).unwrap(), TraceEnd::Exit(7));
    }

    #[test]
    fn slot_roundtrip() {
        for s in [Slot::Unset, Slot::Critical, Slot::Up(0), Slot::Up((1 << 31) - 4), Slot::Down(5)] {
            assert_eq!(Slot::decode(s.encode()), s);
        }
    }
}
