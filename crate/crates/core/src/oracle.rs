//! Brute-force reference diagrams.
//!
//! Neither routine uses the gradient; both read only the grid, the vertex
//! order and the simplex key.

use alloc::vec::Vec;

use crate::diagram::{Essential, Pair, PersistenceDiagram};
use crate::error::Error;
use crate::grid::{SimplexId, TriangulatedGrid};
use crate::order::{simplex_key, SimplexKey};

/// Refuse filtrations larger than this many simplices.
pub const MATRIX_LIMIT: u64 = 200_000;

/// Left-to-right column reduction of the full boundary matrix over Z/2.
/// Pairs born and killed at the same vertex are dropped.
pub fn reduce_matrix(
    grid: &TriangulatedGrid,
    order: &[u32],
    values: &[f64],
) -> Result<PersistenceDiagram, Error> {
    let total: u64 = (0..4).map(|d| grid.simplex_count(d)).sum();
    if total > MATRIX_LIMIT {
        return Err(Error::Invariant("grid too large for the matrix oracle"));
    }
    let mut cells: Vec<(SimplexKey, SimplexId)> = Vec::with_capacity(total as usize);
    for d in 0..4u8 {
        for i in 0..grid.simplex_count(d) as u32 {
            let s = SimplexId::new(d, i);
            cells.push((simplex_key(grid, order, s), s));
        }
    }
    cells.sort_unstable();
    let mut pos: [Vec<usize>; 4] = [0u8, 1, 2, 3].map(|d| alloc::vec![0; grid.simplex_count(d) as usize]);
    for (p, &(_, s)) in cells.iter().enumerate() {
        pos[s.dim as usize][s.index as usize] = p;
    }

    let n = cells.len();
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut owner_of_low: Vec<Option<usize>> = alloc::vec![None; n];
    let mut paired = alloc::vec![false; n];
    let mut diagram = PersistenceDiagram::default();
    for (j, &(_, s)) in cells.iter().enumerate() {
        let mut col: Vec<usize> = if s.dim == 0 {
            Vec::new()
        } else {
            grid.faces(s).iter().map(|&f| pos[s.dim as usize - 1][f as usize]).collect()
        };
        col.sort_unstable();
        while let Some(&low) = col.last() {
            match owner_of_low[low] {
                Some(k) => col = xor_sorted(&col, &columns[k]),
                None => break,
            }
        }
        if let Some(&low) = col.last() {
            owner_of_low[low] = Some(j);
            paired[low] = true;
            paired[j] = true;
            let birth = cells[low].1;
            let pair = Pair::new(grid, order, values, birth.dim, birth, s);
            if pair.birth_order() != pair.death_order() {
                diagram.pairs.push(pair);
            }
        }
        columns.push(col);
    }
    for (j, &(_, s)) in cells.iter().enumerate() {
        if !paired[j] {
            diagram.essential.push(Essential::new(grid, order, values, s));
        }
    }
    diagram.canonicalize();
    Ok(diagram)
}

fn xor_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            core::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            core::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Dimension-0 diagram by union-find over edges in key order; the younger
/// component dies.
pub fn d0_unionfind(grid: &TriangulatedGrid, order: &[u32], values: &[f64]) -> PersistenceDiagram {
    let mut edges: Vec<(SimplexKey, u32)> = (0..grid.simplex_count(1) as u32)
        .map(|e| (simplex_key(grid, order, SimplexId::new(1, e)), e))
        .collect();
    edges.sort_unstable();
    let nv = grid.vertex_count() as usize;
    let mut parent: Vec<u32> = (0..nv as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let p = parent[x as usize];
            parent[x as usize] = parent[p as usize];
            x = p;
        }
        x
    }
    // each root's representative is its oldest vertex
    let mut diagram = PersistenceDiagram::default();
    for (_, e) in edges {
        let v = grid.vertices(SimplexId::new(1, e));
        let (a, b) = (find(&mut parent, v[0]), find(&mut parent, v[1]));
        if a == b {
            continue;
        }
        let (young, old) = if order[a as usize] > order[b as usize] { (a, b) } else { (b, a) };
        parent[young as usize] = old;
        let pair = Pair::new(grid, order, values, 0, SimplexId::new(0, young), SimplexId::new(1, e));
        if pair.birth_order() != pair.death_order() {
            diagram.pairs.push(pair);
        }
    }
    for v in 0..nv as u32 {
        if find(&mut parent, v) == v {
            diagram.essential.push(Essential::new(grid, order, values, SimplexId::new(0, v)));
        }
    }
    diagram.canonicalize();
    diagram
}
