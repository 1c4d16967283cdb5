//! Implicit Freudenthal triangulation of a regular vertex grid.
//!
//! Every unit cube is split into six tetrahedra sharing the diagonal from its
//! lowest to its highest corner. A simplex is described by an *anchor* vertex
//! (its componentwise-lowest vertex) and a *type*: a strictly increasing chain
//! of corner masks `0 = c0 ⊂ c1 ⊂ ... ⊂ ck` inside the unit cube, where bit 0
//! of a mask is the x offset, bit 1 the y offset and bit 2 the z offset. The
//! simplex vertices are `anchor + ci`.
//!
//! Indices are dense per dimension: all simplices of one type form a box of
//! valid anchors, and the boxes are laid out back to back in type-table order.
//! Nothing proportional to the simplex count is stored.
//!
//! | dim | types | chains                                                |
//! |-----|-------|-------------------------------------------------------|
//! | 0   | 1     | `[0]`                                                 |
//! | 1   | 7     | `[0, m]` for `m` in 1..=7                             |
//! | 2   | 12    | `[0, a, b]` with `a ⊂ b`, listed in [`TRIANGLE_TYPES`] |
//! | 3   | 6     | `[0, a, b, 7]`, listed in [`TETRA_TYPES`]             |
//!
//! Degenerate axes (extent 1) make every type that moves along them empty, so
//! 2D and 1D grids need no special casing.

use core::fmt;

/// Largest admissible simplex index in any dimension.
pub const MAX_SIMPLEX_INDEX: u64 = (1 << 31) - 3;

/// Corner masks of edge types (second vertex; the first is always 0).
pub const EDGE_TYPES: [u8; 7] = [1, 2, 4, 3, 5, 6, 7];
/// Corner mask pairs `(a, b)` of triangle types.
pub const TRIANGLE_TYPES: [(u8, u8); 12] = [
    (1, 3),
    (2, 3),
    (1, 5),
    (4, 5),
    (2, 6),
    (4, 6),
    (1, 7),
    (2, 7),
    (4, 7),
    (3, 7),
    (5, 7),
    (6, 7),
];
/// Corner mask pairs `(a, b)` of tetrahedron types; the last corner is 7.
pub const TETRA_TYPES: [(u8, u8); 6] = [(1, 3), (1, 5), (2, 3), (2, 6), (4, 5), (4, 6)];

/// Vertex counts per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridShape {
    pub dims: [usize; 3],
}

impl GridShape {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        GridShape { dims: [nx, ny, nz] }
    }

    pub fn vertex_count(&self) -> u64 {
        self.dims.iter().map(|&d| d as u64).product()
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.dims[0], self.dims[1], self.dims[2])
    }
}

/// A simplex of the grid, identified by dimension and dense index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimplexId {
    pub dim: u8,
    pub index: u32,
}

impl SimplexId {
    pub const fn new(dim: u8, index: u32) -> Self {
        SimplexId { dim, index }
    }
}

impl fmt::Display for SimplexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.dim, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridError {
    EmptyAxis { axis: usize },
    TooLarge { dim: u8, count: u64 },
    InvalidSimplex { dim: u8, index: u64 },
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::EmptyAxis { axis } => write!(f, "grid axis {axis} has no vertices"),
            GridError::TooLarge { dim, count } => write!(
                f,
                "grid too large: {count} simplices of dimension {dim} exceed the id space ({MAX_SIMPLEX_INDEX})"
            ),
            GridError::InvalidSimplex { dim, index } => {
                write!(f, "invalid simplex {dim}:{index}")
            }
        }
    }
}

impl core::error::Error for GridError {}

/// Small inline list used for faces, cofacets and vertex sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inline<const N: usize> {
    items: [u32; N],
    len: u8,
}

impl<const N: usize> Inline<N> {
    pub const fn new() -> Self {
        Inline { items: [0; N], len: 0 }
    }

    #[inline]
    pub fn push(&mut self, v: u32) {
        self.items[self.len as usize] = v;
        self.len += 1;
    }

    #[inline]
    pub fn as_slice(&self) -> &[u32] {
        &self.items[..self.len as usize]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl<const N: usize> Default for Inline<N> {
    fn default() -> Self {
        Self::new()
    }
}

impl<const N: usize> core::ops::Deref for Inline<N> {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        self.as_slice()
    }
}

/// Vertex ids of a simplex, in chain order (lowest corner first).
pub type VertexList = Inline<4>;

#[derive(Clone, Copy, Debug)]
struct TypeBlock {
    start: u64,
    extent: [usize; 3],
}

impl TypeBlock {
    fn len(&self) -> u64 {
        self.extent.iter().map(|&e| e as u64).product()
    }
}

const NO_TYPE: u8 = u8::MAX;

/// Chain of masks for type `t` in dimension `dim`.
pub fn type_chain(dim: u8, t: usize) -> ([u8; 4], usize) {
    match dim {
        0 => ([0; 4], 1),
        1 => ([0, EDGE_TYPES[t], 0, 0], 2),
        2 => {
            let (a, b) = TRIANGLE_TYPES[t];
            ([0, a, b, 0], 3)
        }
        3 => {
            let (a, b) = TETRA_TYPES[t];
            ([0, a, b, 7], 4)
        }
        _ => panic!("dimension {dim} out of range"),
    }
}

pub const fn type_count(dim: u8) -> usize {
    match dim {
        0 => 1,
        1 => 7,
        2 => 12,
        3 => 6,
        _ => 0,
    }
}

#[inline]
fn chain_code(chain: &[u8]) -> usize {
    // chain[0] is always zero
    chain[1..]
        .iter()
        .enumerate()
        .fold(0usize, |acc, (i, &m)| acc | ((m as usize) << (3 * i)))
}

/// The implicit triangulated grid.
#[derive(Clone, Debug)]
pub struct TriangulatedGrid {
    shape: GridShape,
    blocks: [[TypeBlock; 12]; 4],
    counts: [u64; 4],
    lookup: [[u8; 512]; 4],
}

impl TriangulatedGrid {
    pub fn new(shape: GridShape) -> Result<Self, GridError> {
        for (axis, &d) in shape.dims.iter().enumerate() {
            if d == 0 {
                return Err(GridError::EmptyAxis { axis });
            }
        }
        let empty = TypeBlock { start: 0, extent: [0; 3] };
        let mut blocks = [[empty; 12]; 4];
        let mut counts = [0u64; 4];
        let mut lookup = [[NO_TYPE; 512]; 4];
        for dim in 0..4u8 {
            let mut start = 0u64;
            #[allow(clippy::needless_range_loop)]
            for t in 0..type_count(dim) {
                let (chain, len) = type_chain(dim, t);
                let top = chain[len - 1];
                let mut extent = [0usize; 3];
                for (axis, e) in extent.iter_mut().enumerate() {
                    let step = ((top >> axis) & 1) as usize;
                    *e = shape.dims[axis].saturating_sub(step);
                }
                let block = TypeBlock { start, extent };
                start += block.len();
                blocks[dim as usize][t] = block;
                lookup[dim as usize][chain_code(&chain[..len])] = t as u8;
            }
            if start > MAX_SIMPLEX_INDEX {
                return Err(GridError::TooLarge { dim, count: start });
            }
            counts[dim as usize] = start;
        }
        Ok(TriangulatedGrid { shape, blocks, counts, lookup })
    }

    #[inline]
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.shape.dims
    }

    /// Number of simplices of dimension `dim`.
    #[inline]
    pub fn simplex_count(&self, dim: u8) -> u64 {
        self.counts.get(dim as usize).copied().unwrap_or(0)
    }

    #[inline]
    pub fn vertex_count(&self) -> u32 {
        self.counts[0] as u32
    }

    /// Dimension of the top simplices: the number of axes with more than one vertex.
    pub fn top_dim(&self) -> u8 {
        self.shape.dims.iter().filter(|&&d| d > 1).count() as u8
    }

    pub fn euler_characteristic(&self) -> i64 {
        (0..4u8)
            .map(|d| {
                let c = self.simplex_count(d) as i64;
                if d % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .sum()
    }

    #[inline]
    pub fn vertex_index(&self, p: [usize; 3]) -> u32 {
        let [nx, ny, _] = self.shape.dims;
        (p[0] + nx * (p[1] + ny * p[2])) as u32
    }

    #[inline]
    pub fn vertex_coords(&self, v: u32) -> [usize; 3] {
        let [nx, ny, _] = self.shape.dims;
        let v = v as usize;
        [v % nx, (v / nx) % ny, v / (nx * ny)]
    }

    pub fn is_valid(&self, s: SimplexId) -> bool {
        (s.index as u64) < self.simplex_count(s.dim)
    }

    pub fn check(&self, s: SimplexId) -> Result<(), GridError> {
        if s.dim <= 3 && self.is_valid(s) {
            Ok(())
        } else {
            Err(GridError::InvalidSimplex { dim: s.dim, index: s.index as u64 })
        }
    }

    /// Type and anchor of a simplex.
    #[inline]
    pub fn decode(&self, s: SimplexId) -> (usize, [usize; 3]) {
        let dim = s.dim as usize;
        let idx = s.index as u64;
        let n = type_count(s.dim);
        let blocks = &self.blocks[dim];
        let mut t = 0;
        while t + 1 < n && blocks[t + 1].start <= idx {
            t += 1;
        }
        let b = &blocks[t];
        let local = (idx - b.start) as usize;
        let [ex, ey, _] = b.extent;
        (t, [local % ex, (local / ex) % ey, local / (ex * ey)])
    }

    /// Index of the simplex of type `t` at `anchor`, if it lies inside the grid.
    #[inline]
    pub fn encode(&self, dim: u8, t: usize, anchor: [usize; 3]) -> Option<SimplexId> {
        let b = &self.blocks[dim as usize][t];
        if anchor[0] >= b.extent[0] || anchor[1] >= b.extent[1] || anchor[2] >= b.extent[2] {
            return None;
        }
        let local = anchor[0] + b.extent[0] * (anchor[1] + b.extent[1] * anchor[2]);
        Some(SimplexId::new(dim, (b.start + local as u64) as u32))
    }

    /// Type index of the chain given by `masks` (first entry must be zero).
    #[inline]
    pub fn type_of_chain(&self, dim: u8, masks: &[u8]) -> Option<usize> {
        let t = self.lookup[dim as usize][chain_code(masks)];
        (t != NO_TYPE).then_some(t as usize)
    }

    /// Vertex ids of `s`, lowest corner first.
    pub fn vertices(&self, s: SimplexId) -> VertexList {
        let (t, a) = self.decode(s);
        let (chain, len) = type_chain(s.dim, t);
        let mut out = VertexList::new();
        for &m in &chain[..len] {
            out.push(self.vertex_index(offset(a, m)));
        }
        out
    }

    /// Facets of `s` (dimension `dim - 1`), one per removed vertex in chain order.
    pub fn faces(&self, s: SimplexId) -> Inline<4> {
        let mut out = Inline::new();
        if s.dim == 0 {
            return out;
        }
        let (t, a) = self.decode(s);
        let (chain, len) = type_chain(s.dim, t);
        let chain = &chain[..len];
        for skip in 0..len {
            let mut masks = [0u8; 4];
            let mut n = 0;
            let base = if skip == 0 { chain[1] } else { 0 };
            for (i, &m) in chain.iter().enumerate() {
                if i != skip {
                    masks[n] = m ^ base;
                    n += 1;
                }
            }
            let anchor = offset(a, base);
            let ft = self
                .type_of_chain(s.dim - 1, &masks[..n])
                .expect("facet of a Freudenthal simplex is a Freudenthal simplex");
            let f = self
                .encode(s.dim - 1, ft, anchor)
                .expect("facet of an in-grid simplex is in the grid");
            out.push(f.index);
        }
        out
    }

    /// Cofacets of `s` (dimension `dim + 1`) inside the grid, in a fixed order.
    pub fn cofacets(&self, s: SimplexId) -> Inline<14> {
        let mut out = Inline::new();
        if s.dim >= 3 {
            return out;
        }
        let (t, a) = self.decode(s);
        let (chain, len) = type_chain(s.dim, t);
        let chain = &chain[..len];
        let top = chain[len - 1];
        let d1 = s.dim + 1;
        let mut push = |anchor: Option<[usize; 3]>, masks: &[u8]| {
            if let Some(anchor) = anchor {
                if let Some(ct) = self.type_of_chain(d1, masks) {
                    if let Some(c) = self.encode(d1, ct, anchor) {
                        out.push(c.index);
                    }
                }
            }
        };
        // a new lowest corner
        for m in 1u8..8 {
            if m & top != 0 {
                continue;
            }
            let mut masks = [0u8; 4];
            masks[1] = m;
            for (i, &c) in chain.iter().enumerate().skip(1) {
                masks[i + 1] = c | m;
            }
            push(offset_back(a, m), &masks[..len + 1]);
        }
        // a corner strictly between two consecutive chain entries
        for i in 0..len - 1 {
            let (lo, hi) = (chain[i], chain[i + 1]);
            for m in 1u8..8 {
                if m & lo != lo || m & hi != m || m == lo || m == hi {
                    continue;
                }
                let mut masks = [0u8; 4];
                masks[..=i].copy_from_slice(&chain[..=i]);
                masks[i + 1] = m;
                masks[i + 2..len + 1].copy_from_slice(&chain[i + 1..]);
                push(Some(a), &masks[..len + 1]);
            }
        }
        // a new highest corner
        for m in 1u8..8 {
            if m & top != top || m == top {
                continue;
            }
            let mut masks = [0u8; 4];
            masks[..len].copy_from_slice(chain);
            masks[len] = m;
            push(Some(a), &masks[..len + 1]);
        }
        out
    }

    /// Calls `f` for every simplex of dimension `dim` containing vertex `v`,
    /// passing the simplex index and its vertex list.
    pub fn for_each_star(&self, v: u32, dim: u8, mut f: impl FnMut(u32, &VertexList)) {
        let p = self.vertex_coords(v);
        for t in 0..type_count(dim) {
            let (chain, len) = type_chain(dim, t);
            for &m in &chain[..len] {
                let Some(anchor) = offset_back(p, m) else { continue };
                let Some(s) = self.encode(dim, t, anchor) else { continue };
                let mut verts = VertexList::new();
                for &c in &chain[..len] {
                    verts.push(self.vertex_index(offset(anchor, c)));
                }
                f(s.index, &verts);
            }
        }
    }
}

#[inline]
fn offset(a: [usize; 3], m: u8) -> [usize; 3] {
    [
        a[0] + (m & 1) as usize,
        a[1] + ((m >> 1) & 1) as usize,
        a[2] + ((m >> 2) & 1) as usize,
    ]
}

#[inline]
fn offset_back(a: [usize; 3], m: u8) -> Option<[usize; 3]> {
    Some([
        a[0].checked_sub((m & 1) as usize)?,
        a[1].checked_sub(((m >> 1) & 1) as usize)?,
        a[2].checked_sub(((m >> 2) & 1) as usize)?,
    ])
}
