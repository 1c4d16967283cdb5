//! Block decomposition of the grid into ranks.
//!
//! Cubes are split evenly along each axis. The owned box of a rank is the
//! closed vertex box of its cubes, so neighbouring boxes share one vertex
//! layer. A simplex belongs to the lowest rank whose owned box contains all
//! its vertices. The ghosted box adds one vertex layer on every side, clipped
//! to the grid; it contains the full star of every owned vertex, which is what
//! the gradient of owned simplices depends on.

use alloc::vec::Vec;

use crate::error::Error;
use crate::grid::{type_chain, GridShape, SimplexId, TriangulatedGrid};

/// Inclusive vertex box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VertexBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl VertexBox {
    pub fn shape(&self) -> GridShape {
        GridShape { dims: [0, 1, 2].map(|a| self.hi[a] - self.lo[a] + 1) }
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= p[a] && p[a] <= self.hi[a])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    shape: GridShape,
    splits: [usize; 3],
    bounds: [Vec<usize>; 3],
}

impl Partition {
    pub fn new(shape: GridShape, splits: [usize; 3]) -> Result<Self, Error> {
        let bad = || Error::InvalidLayout { splits, shape };
        let mut bounds: [Vec<usize>; 3] = Default::default();
        for a in 0..3 {
            let k = splits[a];
            let cells = shape.dims[a].saturating_sub(1);
            if k == 0 || shape.dims[a] == 0 {
                return Err(bad());
            }
            if cells == 0 {
                if k != 1 {
                    return Err(bad());
                }
                bounds[a] = alloc::vec![0, 0];
                continue;
            }
            if k > cells {
                return Err(bad());
            }
            bounds[a] = (0..=k).map(|i| (i * cells).div_ceil(k)).collect();
        }
        Ok(Partition { shape, splits, bounds })
    }

    /// A single block covering the whole grid.
    pub fn single(shape: GridShape) -> Self {
        Self::new(shape, [1, 1, 1]).expect("one block always fits")
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn splits(&self) -> [usize; 3] {
        self.splits
    }

    pub fn rank_count(&self) -> usize {
        self.splits.iter().product()
    }

    pub fn rank_of_parts(&self, p: [usize; 3]) -> usize {
        p[0] + self.splits[0] * (p[1] + self.splits[1] * p[2])
    }

    pub fn parts_of_rank(&self, rank: usize) -> [usize; 3] {
        let [sx, sy, _] = self.splits;
        [rank % sx, (rank / sx) % sy, rank / (sx * sy)]
    }

    pub fn owned_box(&self, rank: usize) -> VertexBox {
        let p = self.parts_of_rank(rank);
        VertexBox {
            lo: [0, 1, 2].map(|a| self.bounds[a][p[a]]),
            hi: [0, 1, 2].map(|a| self.bounds[a][p[a] + 1]),
        }
    }

    pub fn ghosted_box(&self, rank: usize) -> VertexBox {
        let o = self.owned_box(rank);
        VertexBox {
            lo: o.lo.map(|c| c.saturating_sub(1)),
            hi: [0, 1, 2].map(|a| (o.hi[a] + 1).min(self.shape.dims[a] - 1)),
        }
    }

    fn part_of_cell(&self, axis: usize, cell: usize) -> usize {
        let b = &self.bounds[axis];
        // last i with b[i] <= cell
        b.partition_point(|&x| x <= cell).saturating_sub(1).min(self.splits[axis] - 1)
    }

    /// Lowest part along `axis` whose closed range contains `[lo, hi]` (`hi - lo <= 1`).
    fn part_of_range(&self, axis: usize, lo: usize, hi: usize) -> usize {
        if hi > lo {
            self.part_of_cell(axis, lo)
        } else if lo == 0 {
            0
        } else {
            self.part_of_cell(axis, lo - 1)
        }
    }

    /// Owner of a simplex given its per-axis vertex coordinate ranges.
    pub fn owner_of_range(&self, lo: [usize; 3], hi: [usize; 3]) -> usize {
        self.rank_of_parts([0, 1, 2].map(|a| self.part_of_range(a, lo[a], hi[a])))
    }

    pub fn owner_of_vertex(&self, p: [usize; 3]) -> usize {
        self.owner_of_range(p, p)
    }

    /// Owner of a simplex of the global grid.
    pub fn owner(&self, grid: &TriangulatedGrid, s: SimplexId) -> usize {
        let (t, a) = grid.decode(s);
        let (lo, hi) = simplex_range(s.dim, t, a);
        self.owner_of_range(lo, hi)
    }

    pub fn block(&self, rank: usize) -> Result<GhostedBlock, Error> {
        GhostedBlock::new(self.clone(), rank)
    }
}

fn simplex_range(dim: u8, t: usize, anchor: [usize; 3]) -> ([usize; 3], [usize; 3]) {
    let (chain, len) = type_chain(dim, t);
    let top = chain[len - 1];
    let hi = [0, 1, 2].map(|a| anchor[a] + ((top >> a) & 1) as usize);
    (anchor, hi)
}

/// The part of the grid visible to one rank: its ghosted box, triangulated
/// with local indices, plus the translation to global indices and ownership.
#[derive(Clone, Debug)]
pub struct GhostedBlock {
    partition: Partition,
    rank: usize,
    owned: VertexBox,
    ghosted: VertexBox,
    global: TriangulatedGrid,
    local: TriangulatedGrid,
}

impl GhostedBlock {
    pub fn new(partition: Partition, rank: usize) -> Result<Self, Error> {
        let global = TriangulatedGrid::new(partition.shape())?;
        let owned = partition.owned_box(rank);
        let ghosted = partition.ghosted_box(rank);
        let local = TriangulatedGrid::new(ghosted.shape())?;
        Ok(GhostedBlock { partition, rank, owned, ghosted, global, local })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn owned_box(&self) -> VertexBox {
        self.owned
    }

    pub fn ghosted_box(&self) -> VertexBox {
        self.ghosted
    }

    pub fn local(&self) -> &TriangulatedGrid {
        &self.local
    }

    pub fn global(&self) -> &TriangulatedGrid {
        &self.global
    }

    fn to_global_anchor(&self, a: [usize; 3]) -> [usize; 3] {
        [0, 1, 2].map(|i| a[i] + self.ghosted.lo[i])
    }

    pub fn to_global(&self, s: SimplexId) -> SimplexId {
        let (t, a) = self.local.decode(s);
        self.global
            .encode(s.dim, t, self.to_global_anchor(a))
            .expect("local simplex lies inside the global grid")
    }

    pub fn to_local(&self, s: SimplexId) -> Option<SimplexId> {
        let (t, a) = self.global.decode(s);
        let mut la = [0usize; 3];
        for i in 0..3 {
            la[i] = a[i].checked_sub(self.ghosted.lo[i])?;
        }
        self.local.encode(s.dim, t, la)
    }

    pub fn vertex_to_global(&self, v: u32) -> u32 {
        self.global.vertex_index(self.to_global_anchor(self.local.vertex_coords(v)))
    }

    pub fn vertex_to_local(&self, v: u32) -> Option<u32> {
        self.to_local(SimplexId::new(0, v)).map(|s| s.index)
    }

    /// Owner rank of a local simplex.
    pub fn owner(&self, s: SimplexId) -> usize {
        let (t, a) = self.local.decode(s);
        let (lo, hi) = simplex_range(s.dim, t, self.to_global_anchor(a));
        self.partition.owner_of_range(lo, hi)
    }

    pub fn is_owned(&self, s: SimplexId) -> bool {
        self.owner(s) == self.rank
    }

    /// Whether the full star of local vertex `v` lies in this block.
    pub fn has_full_star(&self, v: u32) -> bool {
        let p = self.to_global_anchor(self.local.vertex_coords(v));
        (0..3).all(|a| {
            let d = self.global.dims()[a];
            (p[a] == 0 || p[a] > self.ghosted.lo[a]) && (p[a] + 1 == d || p[a] < self.ghosted.hi[a])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_way_split_boxes() {
        let p = Partition::new(GridShape::new(8, 2, 2), [2, 1, 1]).unwrap();
        assert_eq!(p.owned_box(0), VertexBox { lo: [0, 0, 0], hi: [4, 1, 1] });
        assert_eq!(p.owned_box(1), VertexBox { lo: [4, 0, 0], hi: [7, 1, 1] });
        assert_eq!(p.ghosted_box(0), VertexBox { lo: [0, 0, 0], hi: [5, 1, 1] });
        assert_eq!(p.ghosted_box(1), VertexBox { lo: [3, 0, 0], hi: [7, 1, 1] });
        let g = TriangulatedGrid::new(p.shape()).unwrap();
        for y in 0..2 {
            for z in 0..2 {
                assert_eq!(p.owner(&g, SimplexId::new(0, g.vertex_index([4, y, z]))), 0);
                assert_eq!(p.owner(&g, SimplexId::new(0, g.vertex_index([5, y, z]))), 1);
            }
        }
    }

    #[test]
    fn invalid_layouts() {
        let s = GridShape::new(4, 4, 1);
        assert!(Partition::new(s, [2, 2, 2]).is_err());
        assert!(Partition::new(s, [4, 1, 1]).is_err());
        assert!(Partition::new(s, [3, 3, 1]).is_ok());
        assert!(Partition::new(s, [0, 1, 1]).is_err());
    }

    #[test]
    fn every_simplex_has_one_owner_inside_its_box() {
        for (shape, splits) in [
            (GridShape::new(7, 5, 4), [2, 2, 2]),
            (GridShape::new(9, 4, 1), [3, 2, 1]),
            (GridShape::new(5, 5, 5), [2, 1, 3]),
        ] {
            let p = Partition::new(shape, splits).unwrap();
            let g = TriangulatedGrid::new(shape).unwrap();
            let blocks: alloc::vec::Vec<_> =
                (0..p.rank_count()).map(|r| p.block(r).unwrap()).collect();
            for d in 0..4u8 {
                let mut owned = vec![0usize; p.rank_count()];
                for i in 0..g.simplex_count(d) as u32 {
                    let s = SimplexId::new(d, i);
                    let r = p.owner(&g, s);
                    owned[r] += 1;
                    let verts = g.vertices(s);
                    // lowest rank containing all vertices
                    let containing: alloc::vec::Vec<usize> = (0..p.rank_count())
                        .filter(|&q| verts.iter().all(|&v| p.owned_box(q).contains(g.vertex_coords(v))))
                        .collect();
                    assert_eq!(containing.first(), Some(&r));
                    let b = &blocks[r];
                    let l = b.to_local(s).expect("owned simplex is in the ghosted block");
                    assert_eq!(b.to_global(l), s);
                    assert!(b.is_owned(l));
                    for (q, other) in blocks.iter().enumerate() {
                        if let Some(l) = other.to_local(s) {
                            assert_eq!(other.owner(l), r);
                            assert_eq!(other.is_owned(l), q == r);
                        }
                    }
                }
                assert_eq!(owned.iter().sum::<usize>() as u64, g.simplex_count(d));
            }
        }
    }

    #[test]
    fn owned_vertices_have_full_star() {
        let p = Partition::new(GridShape::new(9, 7, 5), [3, 2, 2]).unwrap();
        for r in 0..p.rank_count() {
            let b = p.block(r).unwrap();
            for v in 0..b.local().vertex_count() {
                if b.is_owned(SimplexId::new(0, v)) {
                    assert!(b.has_full_star(v));
                }
            }
        }
    }
}
