//! Extremum-saddle pairing on the extremum graph.
//!
//! Nodes are extrema (or the virtual node at infinity), arcs are saddles with
//! their two v-path endpoints. Both the minimum side and the dual maximum side
//! use the same routine once everything is expressed as *ages*: a smaller age
//! means earlier in the sweep.

use alloc::vec::Vec;

/// Node id of the virtual extremum outside the domain.
pub const INFINITY: u32 = u32::MAX;

/// Age of the virtual node: older than everything.
pub const INFINITY_AGE: u128 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triplet {
    pub saddle: u32,
    pub saddle_age: u128,
    pub ends: [u32; 2],
}

/// Age of a simplex on the minimum side: its key.
#[inline]
pub fn min_side_age(key: u128) -> u128 {
    key
}

/// Age of a simplex on the maximum side: reversed key, so the sweep runs downward.
#[inline]
pub fn max_side_age(key: u128) -> u128 {
    u128::MAX - key
}

/// Pairs saddles with extrema. `age` gives the age of an extremum node and
/// must return [`INFINITY_AGE`] for [`INFINITY`]. Returns `(saddle, extremum)`
/// in processing order.
pub fn pair_extrema_saddles(triplets: &[Triplet], age: impl Fn(u32) -> u128) -> Vec<(u32, u32)> {
    pair_extrema_saddles_traced(triplets, age).0
}

/// Like [`pair_extrema_saddles`], also returning the final representative
/// link `(node, representative)` of every node that has one.
#[allow(clippy::type_complexity)]
pub fn pair_extrema_saddles_traced(
    triplets: &[Triplet],
    age: impl Fn(u32) -> u128,
) -> (Vec<(u32, u32)>, Vec<(u32, u32)>) {
    let mut sorted: Vec<&Triplet> = triplets.iter().filter(|t| t.ends[0] != t.ends[1]).collect();
    sorted.sort_unstable_by_key(|t| (t.saddle_age, t.saddle));

    let mut nodes: Vec<u32> = sorted.iter().flat_map(|t| t.ends).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let node_age: Vec<u128> = nodes.iter().map(|&n| age(n)).collect();
    let idx = |n: u32| nodes.binary_search(&n).expect("endpoint registered");
    let mut rep: Vec<usize> = (0..nodes.len()).collect();
    let find = |rep: &[usize], mut i: usize| {
        while rep[i] != i {
            i = rep[i];
        }
        i
    };

    let mut pairs = Vec::new();
    for t in sorted {
        let (t0, t1) = (idx(t.ends[0]), idx(t.ends[1]));
        let mut r0 = find(&rep, t0);
        let mut r1 = find(&rep, t1);
        if r0 == r1 {
            continue;
        }
        if node_age[r0] < node_age[r1] {
            core::mem::swap(&mut r0, &mut r1);
        }
        pairs.push((t.saddle, nodes[r0]));
        rep[r0] = r1;
        rep[t0] = r1;
    }
    let links = (0..nodes.len()).filter(|&i| rep[i] != i).map(|i| (nodes[i], nodes[rep[i]])).collect();
    (pairs, links)
}
