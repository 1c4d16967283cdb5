//! Frozen fixtures shared by the fixture tests and the acceptance gate.
#![allow(dead_code)]

use std::collections::BTreeSet;

use ddms::distributed::{
    assign_owner, compute_diagram_distributed, run_abstract, AbstractSaddle, D1Trace, DistConfig, DistOutput,
    NodeRef, Side, TraceEvent,
};
use ddms::fields::{generate, FieldKind};
use dms_core::pairing::{pair_extrema_saddles_traced, Triplet};
use dms_core::{compute_diagram, GridShape, PipelineOptions};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

fn run(dims: [usize; 3], seed: u64, splits: [usize; 3], anticipation: bool, budget: Option<usize>) -> Result<DistOutput, String> {
    let shape = GridShape { dims };
    let values = generate(FieldKind::Random(seed), shape);
    let cfg = DistConfig { splits, anticipation, anticipation_budget: budget, ..Default::default() };
    let out = compute_diagram_distributed(shape, &values, &cfg).map_err(|e| e.to_string())?;
    let seq = compute_diagram(shape, &values, &PipelineOptions::default()).map_err(|e| e.to_string())?;
    ensure!(out.diagram == seq, "distributed diagram differs from the sequential one");
    Ok(out)
}

/// One saddle joining two minima pairs the younger one and links it to the older.
pub fn extremum_graph_pairing() -> Check {
    let (t0, t1, sigma) = (7u32, 3u32, 20u32);
    let age = |n: u32| if n == t0 { 50 } else { 10 };
    let trip = [Triplet { saddle: sigma, saddle_age: 60, ends: [t0, t1] }];
    let (pairs, links) = pair_extrema_saddles_traced(&trip, age);
    ensure!(pairs == [(sigma, t0)], "pairs {pairs:?}");
    ensure!(links == [(t0, t1)], "links {links:?}");
    Ok(())
}

/// Node ownership on a three-way split: an extremum whose own rank has no
/// saddle reaching it goes to the lowest referencing rank, one reached from
/// its own rank stays there.
pub fn ownership() -> Check {
    let out = run([7, 3, 1], 173, [3, 1, 1], false, None)?;
    let find = |rank: usize, id: u32| out.ranks[rank].graph_nodes.iter().find(|n| n.side == Side::Min && n.id == id).cloned();
    let t0 = find(0, 3).ok_or("node 3 is not owned by rank 0")?;
    ensure!(t0.simplex_owner == 1 && t0.ghosts == [2], "node 3: {t0:?}");
    let t1 = find(2, 19).ok_or("node 19 is not owned by rank 2")?;
    ensure!(t1.simplex_owner == 2 && t1.ghosts == [1], "node 19: {t1:?}");
    for r in &out.ranks {
        for n in &r.graph_nodes {
            let mut refs: BTreeSet<u32> = n.ghosts.iter().copied().collect();
            let owner = out.ranks.iter().position(|o| std::ptr::eq(o, r)).unwrap() as u32;
            refs.insert(owner);
            ensure!(assign_owner(n.simplex_owner, &refs) == owner, "rule violated for {n:?}");
        }
    }
    Ok(())
}

/// A v-path crossing one interface is finished in two computation rounds.
pub fn trace_continuation() -> Check {
    let out = run([6, 3, 1], 4, [2, 1, 1], false, None)?;
    let rounds: Vec<u64> = out.ranks.iter().map(|r| r.stats.rounds[0]).collect();
    ensure!(rounds.iter().all(|&r| r == 2), "trace rounds {rounds:?}");
    let single = run([6, 3, 1], 4, [1, 1, 1], false, None)?;
    ensure!(single.ranks[0].stats.rounds[0] == 0, "single rank needed trace rounds");
    Ok(())
}

fn node(id: u32, owner: u32) -> NodeRef {
    NodeRef { id, owner, age: id as u128 + 1 }
}

fn saddle(id: u32, age: u128, a: NodeRef, b: NodeRef) -> AbstractSaddle {
    AbstractSaddle { id, age, ends: [a, b] }
}

/// Three ranks. Rank 2 first pairs `s3` with `t3` from its partial view; the
/// links made on rank 1 arrive later and the pairing ends at `(s3, t1)`.
pub fn correction_cascade() -> Check {
    let t: Vec<NodeRef> = [2, 0, 1, 1, 2].iter().enumerate().map(|(i, &o)| node(i as u32, o)).collect();
    let (s1, sx, s2, s3) = (101, 102, 103, 104);
    let graph = || {
        vec![
            (vec![], vec![t[1]]),
            (vec![saddle(s1, 10, t[3], t[2]), saddle(sx, 11, t[2], t[1])], vec![t[2], t[3]]),
            (vec![saddle(s2, 12, t[4], t[0]), saddle(s3, 13, t[3], t[4])], vec![t[0], t[4]]),
        ]
    };
    for seed in 0..16 {
        let res = run_abstract(graph(), seed).map_err(|e| e.to_string())?;
        let provisional = TraceEvent::Provisional { rank: 2, saddle: s3, extremum: Some(3) };
        ensure!(res[2].trace.contains(&provisional), "no provisional (s3, t3): {:?}", res[2].trace);
        let mut pairs: Vec<(u32, u32)> = res.iter().flat_map(|r| r.pairs.iter().copied()).collect();
        pairs.sort_unstable();
        ensure!(pairs == [(s1, 3), (sx, 2), (s2, 4), (s3, 1)], "seed {seed}: {pairs:?}");
        ensure!(res[2].pairs.contains(&(s3, 1)), "(s3, t1) not on rank 2");
    }
    let empty = run_abstract(vec![(vec![], vec![]); 3], 0).map_err(|e| e.to_string())?;
    ensure!(empty.iter().all(|r| r.rounds == 0 && r.pairs.is_empty()), "empty graph was not quiet");
    Ok(())
}

fn d1_events(out: &DistOutput) -> Vec<D1Trace> {
    out.ranks.iter().flat_map(|r| r.d1_trace.iter().copied()).collect()
}

/// The only propagation crossing ranks hands its token once, from rank 1 to
/// rank 0, where the pair is stored.
pub fn token_handoff() -> Check {
    let out = run([4, 3, 3], 61, [2, 1, 1], false, None)?;
    let ev = d1_events(&out);
    let sends: Vec<_> = ev.iter().filter(|e| matches!(e, D1Trace::TokenSent { .. })).collect();
    ensure!(sends.len() == 1, "token sends {sends:?}");
    let D1Trace::TokenSent { sigma, from, to } = *sends[0] else { unreachable!() };
    ensure!((from, to) == (1, 0), "token went {from} -> {to}");
    let paired = ev.iter().any(|e| matches!(*e, D1Trace::Paired { sigma: s, rank: 0, .. } if s == sigma));
    ensure!(paired, "pair not created on rank 0: {ev:?}");
    Ok(())
}

/// Without anticipation the token of the one crossing propagation bounces
/// eight times; with it, it moves exactly twice.
pub fn anticipation() -> Check {
    let tokens = |o: &DistOutput| o.ranks.iter().map(|r| r.stats.tokens_sent).sum::<u64>();
    let off = run([4, 3, 3], 100, [2, 1, 1], false, None)?;
    ensure!(tokens(&off) == 8, "without anticipation: {} sends", tokens(&off));
    let on = run([4, 3, 3], 100, [2, 1, 1], true, Some(64))?;
    ensure!(tokens(&on) == 2, "with anticipation: {} sends", tokens(&on));
    Ok(())
}

pub fn all() -> Vec<(&'static str, Check)> {
    vec![
        ("extremum graph pairing", extremum_graph_pairing()),
        ("node ownership", ownership()),
        ("trace continuation", trace_continuation()),
        ("correction cascade", correction_cascade()),
        ("token hand-off", token_handoff()),
        ("anticipation", anticipation()),
    ]
}
