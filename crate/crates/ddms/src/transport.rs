//! Simulated message passing between logical processes.
//!
//! Every rank runs on its own thread and talks to the others only through an
//! [`Endpoint`]. Point-to-point sends are buffered locally and delivered at the
//! next collective exchange, which acts as a barrier. Messages from one sender
//! to one receiver arrive in send order; messages from different senders are
//! interleaved by a seeded shuffle so tests can fuzz delivery schedules.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rank = usize;

/// Message classes, used for accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    SetContinuation,
    GraphTriplet,
    Recompute,
    BoundaryUpdate,
    Token,
    OrderExchange,
}

impl MessageKind {
    pub const ALL: [MessageKind; 6] = [
        MessageKind::SetContinuation,
        MessageKind::GraphTriplet,
        MessageKind::Recompute,
        MessageKind::BoundaryUpdate,
        MessageKind::Token,
        MessageKind::OrderExchange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::SetContinuation => "set_continuation",
            MessageKind::GraphTriplet => "graph_triplet",
            MessageKind::Recompute => "recompute",
            MessageKind::BoundaryUpdate => "boundary_update",
            MessageKind::Token => "token",
            MessageKind::OrderExchange => "order_exchange",
        }
    }
}

pub trait Classify {
    fn kind(&self) -> MessageKind;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message<P> {
    pub src: Rank,
    pub dst: Rank,
    /// Per `(src, dst)` sequence number, starting at 0.
    pub seq: u64,
    pub payload: P,
}

impl<P: Classify> Message<P> {
    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("collective did not complete within {0:?}; some rank never joined")]
    Deadlock(Duration),
    #[error("another rank aborted the run")]
    Aborted,
    #[error("destination rank {0} does not exist")]
    BadRank(Rank),
}

/// Per-rank message counters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransportStats {
    pub sent: [u64; 6],
    pub collectives: u64,
}

impl TransportStats {
    pub fn sent_of(&self, kind: MessageKind) -> u64 {
        self.sent[kind as usize]
    }

    pub fn total_sent(&self) -> u64 {
        self.sent.iter().sum()
    }

    pub fn merge(&mut self, other: &TransportStats) {
        for (a, b) in self.sent.iter_mut().zip(other.sent) {
            *a += b;
        }
        self.collectives = self.collectives.max(other.collectives);
    }
}

struct State<P> {
    generation: u64,
    arrived: usize,
    pending: Vec<Vec<Message<P>>>,
    sum: i64,
    inboxes: Vec<Vec<Message<P>>>,
    result: i64,
    aborted: bool,
}

struct Shared<P> {
    size: usize,
    seed: u64,
    timeout: Duration,
    state: Mutex<State<P>>,
    cv: Condvar,
}

/// The set of ranks of one run.
pub struct Network<P> {
    shared: Arc<Shared<P>>,
}

impl<P: Send> Network<P> {
    pub fn new(size: usize, seed: u64, timeout: Duration) -> Self {
        assert!(size > 0, "a network needs at least one rank");
        let state = State {
            generation: 0,
            arrived: 0,
            pending: (0..size).map(|_| Vec::new()).collect(),
            sum: 0,
            inboxes: (0..size).map(|_| Vec::new()).collect(),
            result: 0,
            aborted: false,
        };
        Network {
            shared: Arc::new(Shared { size, seed, timeout, state: Mutex::new(state), cv: Condvar::new() }),
        }
    }

    pub fn size(&self) -> usize {
        self.shared.size
    }

    /// Endpoints for every rank, in rank order.
    pub fn endpoints(&self) -> Vec<Endpoint<P>> {
        (0..self.shared.size)
            .map(|rank| Endpoint {
                rank,
                shared: Arc::clone(&self.shared),
                next_seq: vec![0; self.shared.size],
                outbox: Vec::new(),
                stats: TransportStats::default(),
            })
            .collect()
    }
}

fn lock<P>(shared: &Shared<P>) -> MutexGuard<'_, State<P>> {
    shared.state.lock().unwrap_or_else(|e| e.into_inner())
}

/// One rank's handle on the network.
pub struct Endpoint<P> {
    rank: Rank,
    shared: Arc<Shared<P>>,
    next_seq: Vec<u64>,
    outbox: Vec<Message<P>>,
    stats: TransportStats,
}

impl<P: Send + Classify> Endpoint<P> {
    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.shared.size
    }

    pub fn stats(&self) -> &TransportStats {
        &self.stats
    }

    /// Buffers a message for the next exchange.
    pub fn send(&mut self, dst: Rank, payload: P) -> Result<(), TransportError> {
        if dst >= self.shared.size {
            return Err(TransportError::BadRank(dst));
        }
        let seq = self.next_seq[dst];
        self.next_seq[dst] += 1;
        self.stats.sent[payload.kind() as usize] += 1;
        self.outbox.push(Message { src: self.rank, dst, seq, payload });
        Ok(())
    }

    /// Number of buffered messages.
    pub fn queued(&self) -> usize {
        self.outbox.len()
    }

    /// Collective: delivers every buffered message and sums `contribution`
    /// over all ranks. Returns this rank's incoming messages and the sum.
    pub fn exchange(&mut self, contribution: i64) -> Result<(Vec<Message<P>>, i64), TransportError> {
        let outgoing = std::mem::take(&mut self.outbox);
        self.stats.collectives += 1;
        let shared = &*self.shared;
        let mut st = lock(shared);
        if st.aborted {
            return Err(TransportError::Aborted);
        }
        st.pending[self.rank].extend(outgoing);
        st.sum += contribution;
        st.arrived += 1;
        let generation = st.generation;
        if st.arrived == shared.size {
            deliver(shared, &mut st);
            shared.cv.notify_all();
        } else {
            let deadline = Instant::now() + shared.timeout;
            while st.generation == generation && !st.aborted {
                let now = Instant::now();
                if now >= deadline {
                    st.aborted = true;
                    shared.cv.notify_all();
                    return Err(TransportError::Deadlock(shared.timeout));
                }
                st = shared.cv.wait_timeout(st, deadline - now).unwrap_or_else(|e| e.into_inner()).0;
            }
            if st.generation == generation {
                return Err(TransportError::Aborted);
            }
        }
        let inbox = std::mem::take(&mut st.inboxes[self.rank]);
        Ok((inbox, st.result))
    }

    /// Collective sum without sending the buffered messages.
    pub fn allreduce_sum(&mut self, value: i64) -> Result<i64, TransportError> {
        let held = std::mem::take(&mut self.outbox);
        let r = self.exchange(value);
        self.outbox = held;
        let (inbox, sum) = r?;
        debug_assert!(inbox.is_empty());
        Ok(sum)
    }

    /// Marks the run as failed so that every rank waiting in a collective returns.
    pub fn abort(&self) {
        let mut st = lock(&self.shared);
        st.aborted = true;
        self.shared.cv.notify_all();
    }
}

fn deliver<P>(shared: &Shared<P>, st: &mut State<P>) {
    let n = shared.size;
    let mut queues: Vec<Vec<VecDeque<Message<P>>>> =
        (0..n).map(|_| (0..n).map(|_| VecDeque::new()).collect()).collect();
    for (src, msgs) in st.pending.iter_mut().enumerate() {
        for m in msgs.drain(..) {
            queues[m.dst][src].push_back(m);
        }
    }
    for (dst, per_src) in queues.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(
            shared.seed ^ st.generation.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (dst as u64).wrapping_mul(0xD1B5_4A32_D192_ED03),
        );
        let mut per_src: Vec<VecDeque<Message<P>>> = per_src.into_iter().filter(|q| !q.is_empty()).collect();
        let inbox = &mut st.inboxes[dst];
        while !per_src.is_empty() {
            let i = rng.gen_range(0..per_src.len());
            inbox.push(per_src[i].pop_front().expect("non-empty queue"));
            if per_src[i].is_empty() {
                per_src.swap_remove(i);
            }
        }
    }
    st.result = st.sum;
    st.sum = 0;
    st.arrived = 0;
    st.generation += 1;
}

/// Flush policy of the overlap mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EagerChannel {
    pub threshold: usize,
}

impl EagerChannel {
    pub fn new(threshold: usize) -> Self {
        EagerChannel { threshold: threshold.max(1) }
    }

    /// Join the next exchange once enough messages are queued, or whenever
    /// there is no local work left.
    pub fn should_flush(&self, queued: usize, tasks_pending: bool) -> bool {
        queued >= self.threshold || !tasks_pending
    }
}
