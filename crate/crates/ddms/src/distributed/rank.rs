//! Per-rank pipeline and the driver that runs all ranks.

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use dms_core::order::check_values;
use dms_core::pipeline::StagePairs;
use dms_core::{
    Essential, GhostedBlock, GridShape, Pair, Partition, PersistenceDiagram, SimplexId, TriangulatedGrid,
};

use super::graph::{build_graphs, NodeInfo};
use super::saddle::{pair_saddles_distributed, D1Settings};
use super::selfcorrect::{round_limit, SelfCorrecting, TraceEvent};
use super::{drive, Ctx, D1Trace, DistConfig, Payload, Side};
use crate::parallel;
use crate::transport::{Endpoint, Network, TransportError, TransportStats};
use crate::Error;

#[derive(Clone, Debug, Default)]
pub struct RankStats {
    pub rank: usize,
    pub transport: TransportStats,
    /// Non-empty message rounds of tracing, node ownership, extremum
    /// pairing and the token stage.
    pub rounds: [u64; 4],
    pub tokens_sent: u64,
    pub recomputes: u64,
    /// Largest number of simplex-sized records held at once: gradient
    /// slots, vertex data, graph links and boundary edges.
    pub peak_simplex_state: usize,
    pub timings: Vec<(&'static str, Duration)>,
}

#[derive(Clone, Debug, Default)]
pub struct RankOutput {
    /// `(global vertex, order)` for owned vertices.
    pub owned_orders: Vec<(u32, u32)>,
    /// Owned critical simplices per dimension, global ids.
    pub critical: [Vec<u32>; 4],
    /// Pairs decided on this rank, global ids.
    pub pairs: StagePairs,
    /// Extremum nodes owned here.
    pub graph_nodes: Vec<NodeInfo>,
    pub trace: Vec<TraceEvent>,
    pub d1_trace: Vec<D1Trace>,
    pub stats: RankStats,
}

#[derive(Clone, Debug)]
pub struct DistOutput {
    pub diagram: PersistenceDiagram,
    /// Global vertex order gathered from the owners.
    pub order: Vec<u32>,
    pub ranks: Vec<RankOutput>,
}

impl DistOutput {
    pub fn transport(&self) -> TransportStats {
        let mut t = TransportStats::default();
        for r in &self.ranks {
            t.merge(&r.stats.transport);
        }
        t
    }
}

struct Timer {
    at: Instant,
    out: Vec<(&'static str, Duration)>,
}

impl Timer {
    fn lap(&mut self, name: &'static str) {
        let now = Instant::now();
        self.out.push((name, now - self.at));
        self.at = now;
    }
}

fn run_rank(ep: &mut Endpoint<Payload>, block: &GhostedBlock, global_values: &[f64], cfg: &DistConfig) -> Result<RankOutput, Error> {
    let mut timer = Timer { at: Instant::now(), out: Vec::new() };
    let local = block.local();
    let values: Vec<f64> = (0..local.vertex_count()).map(|v| global_values[block.vertex_to_global(v) as usize]).collect();
    let order = super::order_distributed(ep, block, &values)?;
    timer.lap("preconditioning");

    let owned = block.owned_box();
    let lo = block.ghosted_box().lo;
    let grad = parallel::gradient(local, &order, cfg.workers, |v| {
        let c = local.vertex_coords(v);
        owned.contains([c[0] + lo[0], c[1] + lo[1], c[2] + lo[2]])
    });
    let ctx = Ctx { block, order: &order, grad: &grad };
    let top = local.top_dim();
    let critical: [Vec<u32>; 4] = [0u8, 1, 2, 3].map(|d| {
        if d > top {
            Vec::new()
        } else {
            grad.critical(d, |i| block.is_owned(SimplexId::new(d, i)))
        }
    });
    timer.lap("gradient");

    let mut out = RankOutput::default();
    let static_state = (0..=3).map(|d| local.simplex_count(d) as usize).sum::<usize>() + 2 * values.len();
    let mut dynamic_peak = 0usize;
    if top >= 1 {
        let empty = Vec::new();
        let max_saddles = if top >= 2 { &critical[top as usize - 1] } else { &empty };
        let graphs = build_graphs(ep, &ctx, &critical[1], max_saddles)?;
        out.stats.rounds[0] = graphs.trace_rounds;
        out.stats.rounds[1] = graphs.ownership_rounds;
        out.graph_nodes = graphs.nodes;
        timer.lap("extract");

        let [min_s, max_s] = graphs.saddles;
        let [min_o, max_o] = graphs.owned;
        let me = block.rank() as u32;
        let mut sides = [SelfCorrecting::new(Side::Min, me, min_s, min_o), SelfCorrecting::new(Side::Max, me, max_s, max_o)];
        let saddles = ep.allreduce_sum(sides.iter().map(|s| s.saddle_count() as i64).sum())? as u64;
        for sc in &mut sides {
            sc.start()?;
        }
        let flush = |sides: &mut [SelfCorrecting; 2], ep: &mut Endpoint<Payload>| -> Result<(), Error> {
            for sc in sides.iter_mut() {
                for (dst, p) in sc.take_outbox() {
                    ep.send(dst as usize, p)?;
                }
            }
            Ok(())
        };
        out.stats.rounds[2] = drive(
            ep,
            round_limit(saddles, ep.size()),
            &mut sides,
            |sides, _, m| {
                let side = match &m.payload {
                    Payload::Walk { side, .. }
                    | Payload::WalkDone { side, .. }
                    | Payload::Claim { side, .. }
                    | Payload::Retract { side, .. }
                    | Payload::Recompute { side, .. } => *side,
                    other => return Err(Error::Protocol(format!("unexpected message in extremum pairing: {other:?}"))),
                };
                sides[side as usize].handle(m.payload)
            },
            flush,
        )?;
        dynamic_peak = sides.iter().map(SelfCorrecting::state_size).sum();
        out.pairs.min_side = sides[0].pairs();
        if top >= 2 {
            out.pairs.max_side = sides[1].pairs();
        }
        out.stats.recomputes = sides.iter().map(|s| s.recomputes).sum();
        out.trace = sides.iter().flat_map(|s| s.trace().iter().copied()).collect();
        timer.lap("d0_d2");
    }

    if top == 3 {
        let used1: HashSet<u32> = out.pairs.min_side.iter().map(|p| p.0).collect();
        let used2: HashSet<u32> = out.pairs.max_side.iter().map(|p| p.0).collect();
        let c1: Vec<u32> =
            critical[1].iter().copied().filter(|&e| !used1.contains(&ctx.global(SimplexId::new(1, e)))).collect();
        let c2: Vec<u32> =
            critical[2].iter().copied().filter(|&t| !used2.contains(&ctx.global(SimplexId::new(2, t)))).collect();
        let triangles = local.simplex_count(2) as f64;
        let budget = cfg.anticipation_budget.unwrap_or(((cfg.anticipation_ratio * triangles).round() as usize).max(1));
        let settings = D1Settings {
            mode: cfg.mode,
            workers: cfg.workers,
            anticipation: cfg.anticipation,
            budget,
            threshold_ratio: cfg.threshold_ratio,
        };
        let d1 = pair_saddles_distributed(ep, &ctx, &c1, &c2, settings)?;
        out.pairs.saddle = d1.pairs;
        out.d1_trace = d1.events;
        out.stats.tokens_sent = d1.tokens_sent;
        out.stats.rounds[3] = d1.rounds;
        dynamic_peak = dynamic_peak.max(d1.peak_boundary);
        timer.lap("d1");
    }

    out.owned_orders = (0..local.vertex_count())
        .filter(|&v| block.is_owned(SimplexId::new(0, v)))
        .map(|v| (block.vertex_to_global(v), order[v as usize]))
        .collect();
    out.critical = [0usize, 1, 2, 3].map(|d| critical[d].iter().map(|&i| ctx.global(SimplexId::new(d as u8, i))).collect());
    out.stats.rank = block.rank();
    out.stats.transport = ep.stats().clone();
    out.stats.peak_simplex_state = static_state + dynamic_peak;
    out.stats.timings = timer.out;
    Ok(out)
}

/// Runs the distributed pipeline with one thread per rank and gathers the
/// diagram.
pub fn compute_diagram_distributed(shape: GridShape, values: &[f64], cfg: &DistConfig) -> Result<DistOutput, Error> {
    let grid = TriangulatedGrid::new(shape).map_err(dms_core::Error::from)?;
    if values.len() as u64 != shape.vertex_count() {
        return Err(dms_core::Error::FieldSize { shape, expected: shape.vertex_count(), got: values.len() }.into());
    }
    check_values(values)?;
    let partition = Partition::new(shape, cfg.splits)?;
    let blocks: Vec<GhostedBlock> =
        (0..partition.rank_count()).map(|r| partition.block(r)).collect::<Result<_, _>>()?;
    let net: Network<Payload> = Network::new(blocks.len(), cfg.seed, cfg.timeout);
    let results: Vec<Result<RankOutput, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = net
            .endpoints()
            .into_iter()
            .zip(&blocks)
            .map(|(mut ep, block)| {
                s.spawn(move || {
                    let r = run_rank(&mut ep, block, values, cfg);
                    if r.is_err() {
                        ep.abort();
                    }
                    r
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rank thread panicked")).collect()
    });
    let mut ranks = Vec::with_capacity(results.len());
    let mut first_err = None;
    for r in results {
        match r {
            Ok(o) => ranks.push(o),
            Err(Error::Transport(TransportError::Aborted)) => {}
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    if ranks.len() != blocks.len() {
        return Err(TransportError::Aborted.into());
    }

    let mut order = vec![u32::MAX; values.len()];
    for r in &ranks {
        for &(v, o) in &r.owned_orders {
            order[v as usize] = o;
        }
    }
    let diagram = assemble(&grid, &order, values, &ranks)?;
    Ok(DistOutput { diagram, order, ranks })
}

fn assemble(grid: &TriangulatedGrid, order: &[u32], values: &[f64], ranks: &[RankOutput]) -> Result<PersistenceDiagram, Error> {
    if !(dms_core::GlobalOrder { order: order.to_vec() }).is_permutation() {
        return Err(Error::Protocol("gathered vertex order is not a permutation".into()));
    }
    let top = grid.top_dim();
    let mut d = PersistenceDiagram::default();
    let mut used: BTreeSet<SimplexId> = BTreeSet::new();
    let mut add = |birth: SimplexId, death: SimplexId| {
        used.insert(birth);
        used.insert(death);
        d.pairs.push(Pair::new(grid, order, values, birth.dim, birth, death));
    };
    for r in ranks {
        for &(e, v) in &r.pairs.min_side {
            add(SimplexId::new(0, v), SimplexId::new(1, e));
        }
        for &(s, t) in &r.pairs.max_side {
            add(SimplexId::new(top - 1, s), SimplexId::new(top, t));
        }
        for &(e, t) in &r.pairs.saddle {
            add(SimplexId::new(1, e), SimplexId::new(2, t));
        }
    }
    let mut seen = BTreeSet::new();
    for r in ranks {
        for (dim, list) in r.critical.iter().enumerate() {
            for &i in list {
                let s = SimplexId::new(dim as u8, i);
                if !seen.insert(s) {
                    return Err(Error::Protocol(format!("critical simplex {s} reported twice")));
                }
                if !used.contains(&s) {
                    d.essential.push(Essential::new(grid, order, values, s));
                }
            }
        }
    }
    if let Some(s) = used.iter().find(|s| !seen.contains(s)) {
        return Err(Error::Protocol(format!("paired simplex {s} is not critical")));
    }
    d.canonicalize();
    Ok(d)
}
