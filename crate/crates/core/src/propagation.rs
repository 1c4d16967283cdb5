//! Saddle-saddle pairing by homologous propagation.
//!
//! Each critical triangle expands its boundary along the gradient: the
//! highest edge of the boundary is either paired with a triangle (whose
//! boundary is added) or is a critical edge. A free critical edge is claimed;
//! an edge already claimed by an older triangle lets the younger one absorb
//! the older boundary; an edge claimed by a younger triangle is taken over and
//! the younger triangle is resumed.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boundary::{triangle_edges, Boundary};
use crate::error::Error;
use crate::gradient::{Gradient, Slot};
use crate::grid::{SimplexId, TriangulatedGrid};
use crate::order::{simplex_key, SimplexKey};

/// Order in which critical triangles are started.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ProcessingOrder {
    #[default]
    Ascending,
    /// Seeded shuffle; the result does not depend on it.
    Shuffled(u64),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SaddlePairs {
    /// `(edge, triangle)` sorted by triangle key.
    pub pairs: Vec<(u32, u32)>,
    /// Critical triangles whose boundary vanished.
    pub unpaired: Vec<u32>,
}

/// Expands `b` along the gradient until its highest edge is critical.
/// Returns that edge, or `None` if the chain vanished.
pub fn expand_to_critical(
    grid: &TriangulatedGrid,
    order: &[u32],
    grad: &Gradient,
    b: &mut Boundary,
) -> Result<Option<(u64, u32)>, Error> {
    loop {
        let Some((k, e)) = b.max() else { return Ok(None) };
        match grad.get(SimplexId::new(1, e)) {
            Slot::Critical => return Ok(Some((k, e))),
            Slot::Up(t) => {
                for (fk, f) in triangle_edges(grid, order, t) {
                    b.toggle(fk, f);
                }
            }
            _ => return Err(Error::Invariant("highest boundary edge is paired with a vertex")),
        }
    }
}

struct State<'a> {
    grid: &'a TriangulatedGrid,
    order: &'a [u32],
    grad: &'a Gradient,
    key: BTreeMap<u32, SimplexKey>,
    /// Critical edge available for pairing -> triangle claiming it.
    claim: BTreeMap<u32, Option<u32>>,
    stored: BTreeMap<u32, Boundary>,
    unpaired: Vec<u32>,
}

impl State<'_> {
    fn propagate(&mut self, sigma: u32, work: &mut Vec<u32>) -> Result<(), Error> {
        let mut b = match self.stored.remove(&sigma) {
            Some(b) => b,
            None => triangle_edges(self.grid, self.order, sigma).into_iter().collect(),
        };
        loop {
            let Some((_, tau)) = expand_to_critical(self.grid, self.order, self.grad, &mut b)? else {
                self.unpaired.push(sigma);
                return Ok(());
            };
            let slot = self
                .claim
                .get_mut(&tau)
                .ok_or(Error::Invariant("boundary reached a critical edge paired on the minimum side"))?;
            match *slot {
                None => {
                    *slot = Some(sigma);
                    self.stored.insert(sigma, b);
                    return Ok(());
                }
                Some(other) if self.key[&other] < self.key[&sigma] => {
                    b.merge(&self.stored[&other]);
                }
                Some(other) => {
                    *slot = Some(sigma);
                    self.stored.insert(sigma, b);
                    work.push(other);
                    return Ok(());
                }
            }
        }
    }
}

/// Pairs critical edges `c1` with critical triangles `c2`.
pub fn pair_saddles(
    grid: &TriangulatedGrid,
    order: &[u32],
    grad: &Gradient,
    c1: &[u32],
    c2: &[u32],
    processing: ProcessingOrder,
) -> Result<SaddlePairs, Error> {
    let key: BTreeMap<u32, SimplexKey> =
        c2.iter().map(|&t| (t, simplex_key(grid, order, SimplexId::new(2, t)))).collect();
    let mut seq: Vec<u32> = c2.to_vec();
    seq.sort_unstable_by_key(|t| key[t]);
    if let ProcessingOrder::Shuffled(seed) = processing {
        seq.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut st = State {
        grid,
        order,
        grad,
        key,
        claim: c1.iter().map(|&e| (e, None)).collect(),
        stored: BTreeMap::new(),
        unpaired: Vec::new(),
    };
    let mut work = Vec::new();
    for sigma in seq {
        work.push(sigma);
        while let Some(s) = work.pop() {
            st.propagate(s, &mut work)?;
        }
    }
    let mut pairs: Vec<(u32, u32)> =
        st.claim.iter().filter_map(|(&e, &t)| t.map(|t| (e, t))).collect();
    pairs.sort_unstable_by_key(|&(_, t)| st.key[&t]);
    let mut unpaired = st.unpaired;
    unpaired.sort_unstable_by_key(|t| st.key[t]);
    Ok(SaddlePairs { pairs, unpaired })
}
