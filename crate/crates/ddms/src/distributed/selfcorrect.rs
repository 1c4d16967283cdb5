//! Self-correcting extremum-saddle pairing.
//!
//! Every node of the extremum graph lives on one owner rank, which keeps the
//! claims made on it: a claim `(σ, lo)` says saddle `σ` merged this node into
//! `lo`. The oldest claim is the node's effective link. A saddle finds its two
//! roots by walking links of saddles older than itself, possibly across ranks,
//! and then claims the younger root. Walks register the saddle as a reader of
//! every node they pass, and whenever a node's effective link changes, its
//! younger readers are told to walk again. Older saddles settle first, so
//! every claim converges to the sequential result.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::ops::Bound;
use std::time::Duration;

use super::{drive, NodeRef, Payload, SaddleRef, Side};
use crate::transport::Network;
use crate::Error;

/// A saddle with both endpoints resolved to nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AbstractSaddle {
    pub id: u32,
    pub age: u128,
    pub ends: [NodeRef; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    /// Decision a rank would take on its own, treating foreign nodes as roots.
    Provisional { rank: u32, saddle: u32, extremum: Option<u32> },
    /// The saddle's claim changed.
    Claimed { rank: u32, saddle: u32, extremum: Option<u32> },
}

struct SaddleState {
    age: u128,
    ends: [NodeRef; 2],
    epoch: u32,
    roots: [Option<NodeRef>; 2],
    /// `(hi, lo)`
    claim: Option<(NodeRef, NodeRef)>,
}

struct NodeState {
    node: NodeRef,
    claims: BTreeMap<(u128, u32), NodeRef>,
    readers: BTreeSet<SaddleRef>,
}

impl NodeState {
    fn effective(&self) -> Option<((u128, u32), u32)> {
        self.claims.first_key_value().map(|(&k, lo)| (k, lo.id))
    }
}

/// One rank's share of the pairing for one side.
pub struct SelfCorrecting {
    side: Side,
    rank: u32,
    saddles: BTreeMap<u32, SaddleState>,
    nodes: HashMap<u32, NodeState>,
    local: VecDeque<Payload>,
    outbox: Vec<(u32, Payload)>,
    trace: Vec<TraceEvent>,
    pub recomputes: u64,
}

impl SelfCorrecting {
    /// `owned` lists the nodes this rank owns.
    pub fn new(side: Side, rank: u32, saddles: Vec<AbstractSaddle>, owned: impl IntoIterator<Item = NodeRef>) -> Self {
        let nodes = owned
            .into_iter()
            .map(|n| (n.id, NodeState { node: n, claims: BTreeMap::new(), readers: BTreeSet::new() }))
            .collect();
        let saddles = saddles
            .into_iter()
            .map(|s| (s.id, SaddleState { age: s.age, ends: s.ends, epoch: 0, roots: [None; 2], claim: None }))
            .collect();
        SelfCorrecting {
            side,
            rank,
            saddles,
            nodes,
            local: VecDeque::new(),
            outbox: Vec::new(),
            trace: Vec::new(),
            recomputes: 0,
        }
    }

    fn send(&mut self, dst: u32, p: Payload) {
        if dst == self.rank {
            self.local.push_back(p);
        } else {
            self.outbox.push((dst, p));
        }
    }

    pub fn take_outbox(&mut self) -> Vec<(u32, Payload)> {
        std::mem::take(&mut self.outbox)
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    /// Number of links and readers held, for memory accounting.
    pub fn saddle_count(&self) -> usize {
        self.saddles.len()
    }

    pub fn state_size(&self) -> usize {
        self.saddles.len() + self.nodes.values().map(|n| 1 + n.claims.len() + n.readers.len()).sum::<usize>()
    }

    /// Launches every saddle in age order, finishing local work in between.
    pub fn start(&mut self) -> Result<(), Error> {
        let mut order: Vec<(u128, u32)> = self.saddles.iter().map(|(&id, s)| (s.age, id)).collect();
        order.sort_unstable();
        for (_, id) in order {
            self.provisional(id);
            self.begin(id);
            self.drain()?;
        }
        Ok(())
    }

    pub fn handle(&mut self, p: Payload) -> Result<(), Error> {
        self.local.push_back(p);
        self.drain()
    }

    /// `(saddle, extremum)` for every saddle of this rank that holds a claim.
    pub fn pairs(&self) -> Vec<(u32, u32)> {
        self.saddles.iter().filter_map(|(&id, s)| s.claim.map(|(hi, _)| (id, hi.id))).collect()
    }

    fn drain(&mut self) -> Result<(), Error> {
        while let Some(p) = self.local.pop_front() {
            self.step(p)?;
        }
        Ok(())
    }

    fn sref(&self, id: u32) -> SaddleRef {
        SaddleRef { age: self.saddles[&id].age, id, owner: self.rank }
    }

    fn local_root(&self, mut cur: NodeRef, age: u128, id: u32) -> NodeRef {
        loop {
            let Some(n) = self.nodes.get(&cur.id) else { return cur };
            match n.claims.first_key_value() {
                Some((&k, &lo)) if k < (age, id) => cur = lo,
                _ => return cur,
            }
        }
    }

    fn provisional(&mut self, id: u32) {
        let s = &self.saddles[&id];
        let roots = s.ends.map(|e| self.local_root(e, s.age, id));
        if roots.iter().any(|r| !r.is_infinity() && !self.nodes.contains_key(&r.id)) {
            let extremum = decide(roots[0], roots[1]).map(|(hi, _)| hi.id);
            self.trace.push(TraceEvent::Provisional { rank: self.rank, saddle: id, extremum });
        }
    }

    fn begin(&mut self, id: u32) {
        let saddle = self.sref(id);
        let s = self.saddles.get_mut(&id).expect("own saddle");
        s.epoch += 1;
        s.roots = [None; 2];
        let (epoch, ends) = (s.epoch, s.ends);
        for (slot, node) in ends.into_iter().enumerate() {
            self.local.push_back(Payload::Walk { side: self.side, saddle, epoch, slot: slot as u8, node });
        }
    }

    fn step(&mut self, p: Payload) -> Result<(), Error> {
        match p {
            Payload::Walk { saddle, epoch, slot, node, .. } => self.walk(saddle, epoch, slot, node),
            Payload::WalkDone { saddle, epoch, slot, root, .. } => {
                let s = self.saddle_mut(saddle)?;
                if s.epoch == epoch {
                    s.roots[slot as usize] = Some(root);
                    if let [Some(a), Some(b)] = s.roots {
                        self.settle(saddle, a, b);
                    }
                }
                Ok(())
            }
            Payload::Claim { saddle, node, lo, .. } => {
                self.update(node, |n| {
                    n.claims.insert((saddle.age, saddle.id), lo);
                })
            }
            Payload::Retract { saddle, node, .. } => {
                self.update(node, |n| {
                    n.claims.remove(&(saddle.age, saddle.id));
                })
            }
            Payload::Recompute { saddle, .. } => {
                self.saddle_mut(saddle)?;
                self.recomputes += 1;
                self.begin(saddle);
                Ok(())
            }
            other => Err(Error::Protocol(format!("unexpected message in extremum pairing: {other:?}"))),
        }
    }

    fn saddle_mut(&mut self, id: u32) -> Result<&mut SaddleState, Error> {
        self.saddles.get_mut(&id).ok_or_else(|| Error::Protocol(format!("saddle {id} is not owned here")))
    }

    fn walk(&mut self, saddle: SaddleRef, epoch: u32, slot: u8, mut cur: NodeRef) -> Result<(), Error> {
        loop {
            if !cur.is_infinity() && cur.owner != self.rank {
                self.send(cur.owner, Payload::Walk { side: self.side, saddle, epoch, slot, node: cur });
                return Ok(());
            }
            let next = if cur.is_infinity() {
                None
            } else {
                let n = self
                    .nodes
                    .get_mut(&cur.id)
                    .ok_or_else(|| Error::Protocol(format!("node {} is not owned here", cur.id)))?;
                n.readers.insert(saddle);
                cur = n.node;
                match n.claims.first_key_value() {
                    Some((&k, &lo)) if k < (saddle.age, saddle.id) => Some(lo),
                    _ => None,
                }
            };
            match next {
                Some(lo) => cur = lo,
                None => {
                    let done = Payload::WalkDone { side: self.side, saddle: saddle.id, epoch, slot, root: cur };
                    self.send(saddle.owner, done);
                    return Ok(());
                }
            }
        }
    }

    fn settle(&mut self, id: u32, a: NodeRef, b: NodeRef) {
        let saddle = self.sref(id);
        let new = decide(a, b);
        let s = self.saddles.get_mut(&id).expect("own saddle");
        let old = s.claim;
        let same = |x: Option<(NodeRef, NodeRef)>, y: Option<(NodeRef, NodeRef)>| {
            x.map(|(h, l)| (h.id, l.id)) == y.map(|(h, l)| (h.id, l.id))
        };
        if same(old, new) {
            return;
        }
        s.claim = new;
        if let Some((ohi, _)) = old {
            if new.is_none_or(|(hi, _)| hi.id != ohi.id) {
                self.send(ohi.owner, Payload::Retract { side: self.side, saddle, node: ohi.id });
            }
        }
        if let Some((hi, lo)) = new {
            self.send(hi.owner, Payload::Claim { side: self.side, saddle, node: hi.id, lo });
        }
        self.trace.push(TraceEvent::Claimed { rank: self.rank, saddle: id, extremum: new.map(|(hi, _)| hi.id) });
    }

    fn update(&mut self, node: u32, f: impl FnOnce(&mut NodeState)) -> Result<(), Error> {
        let n = self.nodes.get_mut(&node).ok_or_else(|| Error::Protocol(format!("node {node} is not owned here")))?;
        let before = n.effective();
        f(n);
        let after = n.effective();
        if before == after {
            return Ok(());
        }
        let threshold = match (before, after) {
            (Some((a, _)), Some((b, _))) => a.min(b),
            (Some((a, _)), None) | (None, Some((a, _))) => a,
            (None, None) => unreachable!(),
        };
        let from = SaddleRef { age: threshold.0, id: threshold.1, owner: u32::MAX };
        let targets: Vec<SaddleRef> = n.readers.range((Bound::Excluded(from), Bound::Unbounded)).copied().collect();
        for r in targets {
            self.send(r.owner, Payload::Recompute { side: self.side, saddle: r.id });
        }
        Ok(())
    }
}

/// Watchdog bound on pairing rounds: saddles times ranks.
pub(crate) fn round_limit(saddles: u64, ranks: usize) -> u64 {
    saddles.max(1) * ranks as u64 + 2
}

/// `(hi, lo)`: the younger root is merged into the older one.
fn decide(a: NodeRef, b: NodeRef) -> Option<(NodeRef, NodeRef)> {
    if a.id == b.id {
        None
    } else if a.age > b.age {
        Some((a, b))
    } else {
        Some((b, a))
    }
}

/// Per-rank result of [`run_abstract`].
#[derive(Clone, Debug, Default)]
pub struct AbstractResult {
    pub pairs: Vec<(u32, u32)>,
    pub trace: Vec<TraceEvent>,
    pub rounds: u64,
}

/// Runs the pairing on an explicitly distributed extremum graph: for each
/// rank, its saddles and the nodes it owns.
pub fn run_abstract(ranks: Vec<(Vec<AbstractSaddle>, Vec<NodeRef>)>, seed: u64) -> Result<Vec<AbstractResult>, Error> {
    let net: Network<Payload> = Network::new(ranks.len(), seed, Duration::from_secs(60));
    let results: Vec<Result<AbstractResult, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = net
            .endpoints()
            .into_iter()
            .zip(ranks)
            .map(|(mut ep, (saddles, owned))| {
                s.spawn(move || {
                    let r = (|| {
                        let mut sc = SelfCorrecting::new(Side::Min, ep.rank() as u32, saddles, owned);
                        let total = ep.allreduce_sum(sc.saddles.len() as i64)? as u64;
                        sc.start()?;
                        let limit = round_limit(total, ep.size());
                        let rounds = drive(&mut ep, limit, &mut sc, |sc, ep, m| {
                            sc.handle(m.payload)?;
                            for (dst, p) in sc.take_outbox() {
                                ep.send(dst as usize, p)?;
                            }
                            Ok(())
                        }, |sc, ep| {
                            for (dst, p) in sc.take_outbox() {
                                ep.send(dst as usize, p)?;
                            }
                            Ok(())
                        })?;
                        Ok(AbstractResult { pairs: sc.pairs(), trace: sc.trace().to_vec(), rounds })
                    })();
                    if r.is_err() {
                        ep.abort();
                    }
                    r
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rank thread panicked")).collect()
    });
    results.into_iter().collect()
}
