//! Distributed pipeline over simulated ranks.
//!
//! Each rank sees only its ghosted block. The phases run in lockstep and each
//! ends when a round passes with no message sent anywhere:
//!
//! 1. global vertex order by sample sort,
//! 2. gradient on the owned box,
//! 3. v-path tracing for both extremum graphs, continued across ranks,
//! 4. extremum node ownership,
//! 5. self-correcting extremum-saddle pairing (both sides at once),
//! 6. saddle-saddle pairing with computation tokens (3D only).

mod graph;
mod order;
mod rank;
mod saddle;
mod selfcorrect;

use std::time::Duration;

use dms_core::gradient::Gradient;
use dms_core::order::simplex_key;
use dms_core::pairing::INFINITY;
use dms_core::partition::GhostedBlock;
use dms_core::SimplexId;

use crate::transport::{Classify, Endpoint, Message, MessageKind};
use crate::Error;

pub use graph::{assign_owner, NodeInfo};
pub use selfcorrect::AbstractResult;
pub use order::order_distributed;
pub use rank::{compute_diagram_distributed, DistOutput, RankOutput, RankStats};
pub use saddle::D1Trace;
pub use selfcorrect::{run_abstract, AbstractSaddle, SelfCorrecting, TraceEvent};

/// Which extremum graph a message belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// Minima and critical edges.
    Min,
    /// Top simplices (and the outside) and critical `(top-1)`-simplices.
    Max,
}

/// No rank: used for the node at infinity.
pub const NO_RANK: u32 = u32::MAX;

/// An extremum node as seen from anywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeRef {
    pub id: u32,
    pub owner: u32,
    pub age: u128,
}

impl NodeRef {
    pub const INFINITY: NodeRef = NodeRef { id: INFINITY, owner: NO_RANK, age: 0 };

    pub fn is_infinity(&self) -> bool {
        self.id == INFINITY
    }
}

/// A saddle with the rank that owns it; ordered by age.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SaddleRef {
    pub age: u128,
    pub id: u32,
    pub owner: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    // global order
    Samples(Vec<(f64, u32)>),
    Splitters(Vec<(f64, u32)>),
    Items(Vec<(f64, u32)>),
    BucketSize(u64),
    Orders(Vec<(u32, u32)>),
    // v-path tracing: resume at `at`, report to `origin`
    Trace { side: Side, saddle: u32, slot: u8, origin: u32, at: u32 },
    TraceDone { side: Side, saddle: u32, slot: u8, end: NodeRef },
    // extremum graph ownership
    NodeSeen { side: Side, node: u32 },
    NodeOwner { side: Side, node: u32, owner: u32, ghosts: Vec<u32> },
    // self-correcting pairing
    Walk { side: Side, saddle: SaddleRef, epoch: u32, slot: u8, node: NodeRef },
    WalkDone { side: Side, saddle: u32, epoch: u32, slot: u8, root: NodeRef },
    Claim { side: Side, saddle: SaddleRef, node: u32, lo: NodeRef },
    Retract { side: Side, saddle: SaddleRef, node: u32 },
    /// Walks of `saddle` must be redone; `(σ, -1, -1)` in triplet form.
    Recompute { side: Side, saddle: u32 },
    // saddle-saddle pairing
    AddEdge { sigma: u32, edge: u32, key: u64 },
    Merge { sigma: u32, from: u32 },
    Token(Token),
}

impl Classify for Payload {
    fn kind(&self) -> MessageKind {
        match self {
            Payload::Samples(_)
            | Payload::Splitters(_)
            | Payload::Items(_)
            | Payload::BucketSize(_)
            | Payload::Orders(_) => MessageKind::OrderExchange,
            Payload::Trace { .. } | Payload::TraceDone { .. } => MessageKind::SetContinuation,
            Payload::NodeSeen { .. }
            | Payload::NodeOwner { .. }
            | Payload::Walk { .. }
            | Payload::WalkDone { .. }
            | Payload::Claim { .. }
            | Payload::Retract { .. } => MessageKind::GraphTriplet,
            Payload::Recompute { .. } => MessageKind::Recompute,
            Payload::AddEdge { .. } | Payload::Merge { .. } => MessageKind::BoundaryUpdate,
            Payload::Token(_) => MessageKind::Token,
        }
    }
}

/// Computation token of one propagation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub sigma: u32,
    pub key: u128,
    /// Upper bound of the highest edge key held by each other rank.
    pub map: Vec<(u32, u64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    /// Compute until idle, then exchange; single-threaded.
    #[default]
    Round,
    /// A coordinator exchanges as soon as enough messages are queued while
    /// workers keep propagating.
    Eager,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "round" => Ok(Mode::Round),
            "eager" => Ok(Mode::Eager),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistConfig {
    pub splits: [usize; 3],
    pub mode: Mode,
    /// Seed of the delivery interleaving.
    pub seed: u64,
    /// Worker threads per rank (gradient and eager propagation).
    pub workers: usize,
    pub anticipation: bool,
    /// Anticipation budget as a fraction of the block's triangle count.
    pub anticipation_ratio: f64,
    /// Absolute anticipation budget, overriding the ratio.
    pub anticipation_budget: Option<usize>,
    /// Eager send threshold as a fraction of unpaired critical triangles.
    pub threshold_ratio: f64,
    pub timeout: Duration,
}

impl Default for DistConfig {
    fn default() -> Self {
        DistConfig {
            splits: [1, 1, 1],
            mode: Mode::Round,
            seed: 0,
            workers: 1,
            anticipation: true,
            anticipation_ratio: 0.0001,
            anticipation_budget: None,
            threshold_ratio: 0.0001,
            timeout: Duration::from_secs(600),
        }
    }
}

impl DistConfig {
    pub fn ranks(&self) -> usize {
        self.splits.iter().product()
    }
}

/// Runs message rounds until one passes with nothing sent by any rank.
/// `flush` moves locally produced messages to the endpoint before each
/// exchange. Returns the number of non-empty rounds; more than `limit` is
/// reported as a protocol failure.
pub(crate) fn drive<S>(
    ep: &mut Endpoint<Payload>,
    limit: u64,
    st: &mut S,
    mut handle: impl FnMut(&mut S, &mut Endpoint<Payload>, Message<Payload>) -> Result<(), Error>,
    mut flush: impl FnMut(&mut S, &mut Endpoint<Payload>) -> Result<(), Error>,
) -> Result<u64, Error> {
    let mut rounds = 0;
    loop {
        flush(st, ep)?;
        let queued = ep.queued() as i64;
        let (inbox, sent) = ep.exchange(queued)?;
        if sent == 0 {
            return Ok(rounds);
        }
        rounds += 1;
        if rounds > limit {
            return Err(Error::Protocol(format!("no quiescence after {limit} rounds")));
        }
        for m in inbox {
            handle(st, ep, m)?;
        }
    }
}

/// What a rank knows after the gradient step.
pub(crate) struct Ctx<'a> {
    pub block: &'a GhostedBlock,
    /// Global order of every local vertex.
    pub order: &'a [u32],
    pub grad: &'a Gradient,
}

impl Ctx<'_> {
    pub fn rank(&self) -> u32 {
        self.block.rank() as u32
    }

    pub fn key(&self, local: SimplexId) -> u128 {
        simplex_key(self.block.local(), self.order, local).0
    }

    pub fn global(&self, local: SimplexId) -> u32 {
        self.block.to_global(local).index
    }

    pub fn local(&self, dim: u8, global: u32) -> Result<SimplexId, Error> {
        self.block
            .to_local(SimplexId::new(dim, global))
            .ok_or_else(|| Error::Protocol(format!("simplex {dim}:{global} is outside rank {}", self.rank())))
    }

    /// Owner rank of a global simplex.
    pub fn owner_of(&self, dim: u8, global: u32) -> u32 {
        self.block.partition().owner(self.block.global(), SimplexId::new(dim, global)) as u32
    }
}
