//! Sequential diagram computation.
//!
//! Dimension 0 pairs minima with critical edges. For a top dimension `D >= 2`
//! the diagram of dimension `D - 1` is computed on the dual side by pairing
//! critical `D`-simplices (plus the outside) with critical `(D-1)`-simplices.
//! In 3D the remaining critical edges and triangles are paired by
//! homologous propagation. Whatever critical simplex is left unpaired is an
//! essential class.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::diagram::{Essential, Pair, PersistenceDiagram};
use crate::error::Error;
use crate::gradient::{compute_gradient, trace_max, trace_min, Gradient, TraceEnd};
use crate::grid::{GridShape, SimplexId, TriangulatedGrid};
use crate::order::{simplex_key, GlobalOrder, SimplexKey};
use crate::pairing::{max_side_age, pair_extrema_saddles, Triplet, INFINITY, INFINITY_AGE};
pub use crate::propagation::ProcessingOrder;
use crate::propagation::{pair_saddles, SaddlePairs};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PipelineOptions {
    pub processing: ProcessingOrder,
}

/// Counts of critical simplices per dimension.
pub fn critical_counts(grid: &TriangulatedGrid, grad: &Gradient) -> [usize; 4] {
    [0u8, 1, 2, 3].map(|d| {
        (0..grid.simplex_count(d) as u32).filter(|&i| grad.is_critical(SimplexId::new(d, i))).count()
    })
}

fn key(grid: &TriangulatedGrid, order: &[u32], s: SimplexId) -> SimplexKey {
    simplex_key(grid, order, s)
}

fn ended(end: TraceEnd) -> Result<u32, Error> {
    match end {
        TraceEnd::Extremum(x) => Ok(x),
        TraceEnd::Infinity => Ok(INFINITY),
        TraceEnd::Exit(_) => Err(Error::Invariant("sequential trace left the domain")),
    }
}

/// Triplets `(edge, min, min)` for the given critical edges.
pub fn min_triplets(
    grid: &TriangulatedGrid,
    order: &[u32],
    grad: &Gradient,
    edges: &[u32],
) -> Result<Vec<Triplet>, Error> {
    edges
        .iter()
        .map(|&e| {
            let s = SimplexId::new(1, e);
            let v = grid.vertices(s);
            Ok(Triplet {
                saddle: e,
                saddle_age: key(grid, order, s).0,
                ends: [
                    ended(trace_min(grid, grad, v[0], |_| true)?)?,
                    ended(trace_min(grid, grad, v[1], |_| true)?)?,
                ],
            })
        })
        .collect()
}

/// Triplets `(saddle, max, max)` on the dual side for critical `(dim-1)`-simplices.
pub fn max_triplets(
    grid: &TriangulatedGrid,
    order: &[u32],
    grad: &Gradient,
    dim: u8,
    saddles: &[u32],
) -> Result<Vec<Triplet>, Error> {
    saddles
        .iter()
        .map(|&s| {
            let sid = SimplexId::new(dim - 1, s);
            let cof = grid.cofacets(sid);
            let mut ends = [INFINITY; 2];
            for (i, &c) in cof.iter().enumerate() {
                ends[i] = ended(trace_max(grid, grad, dim, c, |_| true)?)?;
            }
            Ok(Triplet { saddle: s, saddle_age: max_side_age(key(grid, order, sid).0), ends })
        })
        .collect()
}

/// Extremum age on the dual side.
pub fn max_node_age(grid: &TriangulatedGrid, order: &[u32], dim: u8, t: u32) -> u128 {
    if t == INFINITY {
        INFINITY_AGE
    } else {
        max_side_age(key(grid, order, SimplexId::new(dim, t)).0)
    }
}

/// All pairs found by the three stages, as simplex ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StagePairs {
    /// `(edge, vertex)`
    pub min_side: Vec<(u32, u32)>,
    /// `(saddle, top simplex)` of dimensions `top - 1` and `top`.
    pub max_side: Vec<(u32, u32)>,
    /// `(edge, triangle)`
    pub saddle: Vec<(u32, u32)>,
}

/// Builds the diagram from stage pairs; unpaired critical simplices become essential.
pub fn assemble(
    grid: &TriangulatedGrid,
    order: &[u32],
    values: &[f64],
    grad: &Gradient,
    pairs: &StagePairs,
) -> PersistenceDiagram {
    let top = grid.top_dim();
    let mut d = PersistenceDiagram::default();
    let mut used: BTreeSet<SimplexId> = BTreeSet::new();
    let mut add = |d: &mut PersistenceDiagram, birth: SimplexId, death: SimplexId| {
        used.insert(birth);
        used.insert(death);
        d.pairs.push(Pair::new(grid, order, values, birth.dim, birth, death));
    };
    for &(e, v) in &pairs.min_side {
        add(&mut d, SimplexId::new(0, v), SimplexId::new(1, e));
    }
    for &(s, t) in &pairs.max_side {
        add(&mut d, SimplexId::new(top - 1, s), SimplexId::new(top, t));
    }
    for &(e, t) in &pairs.saddle {
        add(&mut d, SimplexId::new(1, e), SimplexId::new(2, t));
    }
    for dim in 0..=3u8 {
        for i in 0..grid.simplex_count(dim) as u32 {
            let s = SimplexId::new(dim, i);
            if grad.is_critical(s) && !used.contains(&s) {
                d.essential.push(Essential::new(grid, order, values, s));
            }
        }
    }
    d.canonicalize();
    d
}

/// Runs the three pairing stages on a full-grid gradient.
pub fn pair_all(
    grid: &TriangulatedGrid,
    order: &[u32],
    grad: &Gradient,
    opts: &PipelineOptions,
) -> Result<StagePairs, Error> {
    let top = grid.top_dim();
    let mut out = StagePairs::default();
    if top == 0 {
        return Ok(out);
    }
    let c1 = grad.critical(1, |_| true);
    let trips = min_triplets(grid, order, grad, &c1)?;
    out.min_side = pair_extrema_saddles(&trips, |v| key(grid, order, SimplexId::new(0, v)).0);
    if top >= 2 {
        let saddles = grad.critical(top - 1, |_| true);
        let trips = max_triplets(grid, order, grad, top, &saddles)?;
        out.max_side = pair_extrema_saddles(&trips, |t| max_node_age(grid, order, top, t));
    }
    if top == 3 {
        let used1: BTreeSet<u32> = out.min_side.iter().map(|p| p.0).collect();
        let used2: BTreeSet<u32> = out.max_side.iter().map(|p| p.0).collect();
        let c1: Vec<u32> = c1.into_iter().filter(|e| !used1.contains(e)).collect();
        let c2 = grad.critical(2, |t| !used2.contains(&t));
        let SaddlePairs { pairs, .. } = pair_saddles(grid, order, grad, &c1, &c2, opts.processing)?;
        out.saddle = pairs;
    }
    Ok(out)
}

/// Full sequential pipeline: order, gradient, pairing, diagram.
pub fn compute_diagram(
    shape: GridShape,
    values: &[f64],
    opts: &PipelineOptions,
) -> Result<PersistenceDiagram, Error> {
    let grid = TriangulatedGrid::new(shape)?;
    if values.len() as u64 != shape.vertex_count() {
        return Err(Error::FieldSize { shape, expected: shape.vertex_count(), got: values.len() });
    }
    let order = GlobalOrder::sequential(values)?.order;
    let grad = compute_gradient(&grid, &order, |_| true);
    let pairs = pair_all(&grid, &order, &grad, opts)?;
    Ok(assemble(&grid, &order, values, &grad, &pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{d0_unionfind, reduce_matrix};

    fn lcg_values(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed ^ 0x9E37_79B9_7F4A_7C15;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 33) % 1000) as f64
            })
            .collect()
    }

    #[test]
    fn matches_matrix_oracle_on_small_grids() {
        for (i, dims) in [[4, 4, 4], [5, 3, 4], [7, 6, 1], [9, 1, 1], [1, 1, 1], [3, 3, 3]].iter().enumerate() {
            for seed in 0..6u64 {
                let shape = GridShape { dims: *dims };
                let values = lcg_values(shape.vertex_count() as usize, seed * 31 + i as u64);
                let grid = TriangulatedGrid::new(shape).unwrap();
                let order = GlobalOrder::sequential(&values).unwrap().order;
                let dms = compute_diagram(shape, &values, &PipelineOptions::default()).unwrap();
                let oracle = reduce_matrix(&grid, &order, &values).unwrap();
                assert_eq!(dms.signature(), oracle.signature(), "{dims:?} seed {seed}");
                assert_eq!(dms.check_invariants(), None);
                let d0 = d0_unionfind(&grid, &order, &values);
                let o0: Vec<_> = oracle.signature().into_iter().filter(|s| s.0 == 0).collect();
                assert_eq!(d0.signature(), o0);
            }
        }
    }
}
