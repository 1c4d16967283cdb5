//! Distributed v-path tracing and extremum node ownership.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use dms_core::gradient::{trace_max, trace_min, TraceEnd};
use dms_core::pairing::{max_side_age, min_side_age};
use dms_core::SimplexId;

use super::{drive, AbstractSaddle, Ctx, NodeRef, Payload, Side, NO_RANK};
use crate::transport::Endpoint;
use crate::Error;

/// Owner of an extremum node: the rank owning the extremum simplex if it
/// references the node, otherwise the lowest referencing rank.
pub fn assign_owner(simplex_owner: u32, referencing: &BTreeSet<u32>) -> u32 {
    if referencing.contains(&simplex_owner) {
        simplex_owner
    } else {
        *referencing.first().expect("a node is referenced by at least one rank")
    }
}

enum Step {
    Done(NodeRef),
    Forward(u32, u32),
}

fn extremum_dim(ctx: &Ctx, side: Side) -> u8 {
    match side {
        Side::Min => 0,
        Side::Max => ctx.block.local().top_dim(),
    }
}

/// Continues a v-path at local simplex `at` of the side's extremum dimension.
fn follow(ctx: &Ctx, side: Side, at: u32) -> Result<Step, Error> {
    let local = ctx.block.local();
    let dim = extremum_dim(ctx, side);
    let inside = |x: u32| ctx.block.is_owned(SimplexId::new(dim, x));
    let end = match side {
        Side::Min => trace_min(local, ctx.grad, at, inside)?,
        Side::Max => trace_max(local, ctx.grad, dim, at, inside)?,
    };
    Ok(match end {
        TraceEnd::Extremum(x) => {
            let s = SimplexId::new(dim, x);
            let key = ctx.key(s);
            let age = match side {
                Side::Min => min_side_age(key),
                Side::Max => max_side_age(key),
            };
            Step::Done(NodeRef { id: ctx.global(s), owner: NO_RANK, age })
        }
        TraceEnd::Infinity => Step::Done(NodeRef::INFINITY),
        TraceEnd::Exit(x) => {
            let g = ctx.global(SimplexId::new(dim, x));
            Step::Forward(ctx.owner_of(dim, g), g)
        }
    })
}

/// Extremum graphs of one rank, nodes resolved to owners.
pub(crate) struct Graphs {
    pub saddles: [Vec<AbstractSaddle>; 2],
    pub owned: [Vec<NodeRef>; 2],
    pub trace_rounds: u64,
    pub ownership_rounds: u64,
    pub nodes: Vec<NodeInfo>,
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Min => 0,
        Side::Max => 1,
    }
}

struct TraceState {
    ends: HashMap<(Side, u32), [Option<NodeRef>; 2]>,
    out: Vec<(u32, Payload)>,
}

impl TraceState {
    fn emit(&mut self, ctx: &Ctx, side: Side, saddle: u32, slot: u8, origin: u32, step: Step) {
        match step {
            Step::Done(end) if origin == ctx.rank() => {
                self.ends.get_mut(&(side, saddle)).expect("own saddle")[slot as usize] = Some(end);
            }
            Step::Done(end) => self.out.push((origin, Payload::TraceDone { side, saddle, slot, end })),
            Step::Forward(dst, at) => self.out.push((dst, Payload::Trace { side, saddle, slot, origin, at })),
        }
    }
}

#[derive(Default)]
struct Ownership {
    phase: u32,
    out: Vec<(u32, Payload)>,
    seen: BTreeMap<(Side, u32), BTreeSet<u32>>,
    owners: HashMap<(Side, u32), u32>,
    owned_ids: Vec<(Side, u32)>,
    info: Vec<NodeInfo>,
}

/// An extremum node held by its owner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeInfo {
    pub side: Side,
    pub id: u32,
    /// Rank owning the extremum simplex itself.
    pub simplex_owner: u32,
    /// Other ranks with saddles reaching this node.
    pub ghosts: Vec<u32>,
}

fn flush(out: &mut Vec<(u32, Payload)>, ep: &mut Endpoint<Payload>) -> Result<(), Error> {
    for (dst, p) in out.drain(..) {
        ep.send(dst as usize, p)?;
    }
    Ok(())
}

/// Traces both extremum graphs from the owned critical saddles (local ids)
/// and assigns every referenced node an owner. Collective.
pub(crate) fn build_graphs(
    ep: &mut Endpoint<Payload>,
    ctx: &Ctx,
    min_saddles: &[u32],
    max_saddles: &[u32],
) -> Result<Graphs, Error> {
    let local = ctx.block.local();
    let top = local.top_dim();
    let me = ctx.rank();
    let mut st = TraceState { ends: HashMap::new(), out: Vec::new() };
    let mut ages: HashMap<(Side, u32), u128> = HashMap::new();

    for &e in min_saddles {
        let s = SimplexId::new(1, e);
        let g = ctx.global(s);
        ages.insert((Side::Min, g), min_side_age(ctx.key(s)));
        st.ends.insert((Side::Min, g), [None; 2]);
        let v = local.vertices(s);
        for slot in 0..2u8 {
            let step = follow(ctx, Side::Min, v[slot as usize])?;
            st.emit(ctx, Side::Min, g, slot, me, step);
        }
    }
    for &f in max_saddles {
        let s = SimplexId::new(top - 1, f);
        let g = ctx.global(s);
        ages.insert((Side::Max, g), max_side_age(ctx.key(s)));
        st.ends.insert((Side::Max, g), [None; 2]);
        let cof = local.cofacets(s);
        for slot in 0..2u8 {
            let step = match cof.as_slice().get(slot as usize) {
                Some(&c) => follow(ctx, Side::Max, c)?,
                None => Step::Done(NodeRef::INFINITY),
            };
            st.emit(ctx, Side::Max, g, slot, me, step);
        }
    }

    let path_limit = ctx.block.global().simplex_count(top) + 4;
    let trace_rounds = drive(
        ep,
        path_limit,
        &mut st,
        |st, _, m| {
            match m.payload {
                Payload::Trace { side, saddle, slot, origin, at } => {
                    let l = ctx.local(extremum_dim(ctx, side), at)?;
                    let step = follow(ctx, side, l.index)?;
                    st.emit(ctx, side, saddle, slot, origin, step);
                }
                Payload::TraceDone { side, saddle, slot, end } => {
                    let e = st
                        .ends
                        .get_mut(&(side, saddle))
                        .ok_or_else(|| Error::Protocol(format!("trace result for foreign saddle {saddle}")))?;
                    e[slot as usize] = Some(end);
                }
                other => return Err(Error::Protocol(format!("unexpected message while tracing: {other:?}"))),
            }
            Ok(())
        },
        |st, ep| flush(&mut st.out, ep),
    )?;

    // ownership: every referencing rank reports to the extremum's simplex owner
    let mut referenced: BTreeSet<(Side, u32)> = BTreeSet::new();
    for (&(side, _), ends) in &st.ends {
        for end in ends {
            let end = end.ok_or_else(|| Error::Protocol("unfinished trace".into()))?;
            if !end.is_infinity() {
                referenced.insert((side, end.id));
            }
        }
    }
    let mut own = Ownership { phase: 0, ..Default::default() };
    for &(side, node) in &referenced {
        own.out.push((ctx.owner_of(extremum_dim(ctx, side), node), Payload::NodeSeen { side, node }));
    }
    let ownership_rounds = drive(
        ep,
        4,
        &mut own,
        |own, _, m| {
            match m.payload {
                Payload::NodeSeen { side, node } => {
                    own.seen.entry((side, node)).or_default().insert(m.src as u32);
                }
                Payload::NodeOwner { side, node, owner, ghosts } => {
                    own.owners.insert((side, node), owner);
                    if owner == me {
                        own.owned_ids.push((side, node));
                        let simplex_owner = ctx.owner_of(extremum_dim(ctx, side), node);
                        own.info.push(NodeInfo { side, id: node, simplex_owner, ghosts });
                    }
                }
                other => return Err(Error::Protocol(format!("unexpected message in node ownership: {other:?}"))),
            }
            Ok(())
        },
        |own, ep| {
            if own.phase == 1 {
                for (&(side, node), refs) in &own.seen {
                    let owner = assign_owner(me, refs);
                    let ghosts: Vec<u32> = refs.iter().copied().filter(|&r| r != owner).collect();
                    for &r in refs {
                        own.out.push((r, Payload::NodeOwner { side, node, owner, ghosts: ghosts.clone() }));
                    }
                }
            }
            own.phase += 1;
            flush(&mut own.out, ep)
        },
    )?;
    let Ownership { owners, mut owned_ids, mut info, .. } = own;
    owned_ids.sort_unstable();
    info.sort_unstable_by_key(|n| (n.side, n.id));

    let mut saddles: [Vec<AbstractSaddle>; 2] = [Vec::new(), Vec::new()];
    let mut known: HashMap<(Side, u32), NodeRef> = HashMap::new();
    for ((side, id), ends) in st.ends {
        let ends = ends.map(|e| {
            let mut e = e.expect("checked above");
            if !e.is_infinity() {
                e.owner = owners[&(side, e.id)];
                known.insert((side, e.id), e);
            }
            e
        });
        saddles[side_index(side)].push(AbstractSaddle { id, age: ages[&(side, id)], ends });
    }
    for s in &mut saddles {
        s.sort_unstable_by_key(|s| (s.age, s.id));
    }
    // the owner references every node it owns, so the ages are known here
    let mut owned: [Vec<NodeRef>; 2] = [Vec::new(), Vec::new()];
    for key in owned_ids {
        let n = known.get(&key).ok_or_else(|| Error::Protocol(format!("owned node {} is not referenced", key.1)))?;
        owned[side_index(key.0)].push(*n);
    }
    Ok(Graphs { saddles, owned, trace_rounds, ownership_rounds, nodes: info })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ownership_rule() {
        // t0: simplex owned by rank 1, referenced by ranks 0 and 2 only
        let refs: BTreeSet<u32> = [0, 2].into();
        assert_eq!(assign_owner(1, &refs), 0);
        // t1: simplex owned by rank 2, which references it through its own saddle
        let refs: BTreeSet<u32> = [1, 2].into();
        assert_eq!(assign_owner(2, &refs), 2);
    }
}
