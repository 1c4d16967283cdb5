//! Saddle-saddle pairing with computation tokens.
//!
//! Every propagation starts on the rank owning its critical triangle `σ` and
//! keeps one boundary part per rank, made of the edges that rank owns. The
//! propagation can only advance on the rank holding the highest edge, so a
//! token carrying an upper bound of every other rank's highest edge moves
//! between ranks. Parts on other ranks change through `AddEdge` and `Merge`
//! updates, which receivers apply before looking at tokens.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::thread;

use dms_core::boundary::{triangle_edges, Boundary};
use dms_core::gradient::Slot;
use dms_core::SimplexId;

use super::selfcorrect::round_limit;
use super::{Ctx, Mode, Payload, Token};
use crate::transport::{EagerChannel, Endpoint, Message};
use crate::Error;

/// Observable events of the token protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum D1Trace {
    TokenSent { sigma: u32, from: u32, to: u32 },
    /// `(edge, triangle)` stored on `rank`.
    Paired { sigma: u32, tau: u32, rank: u32 },
    Exhausted { sigma: u32, rank: u32 },
}

struct PairRec {
    sigma: u32,
    key: u128,
    map: Vec<(u32, u64)>,
}

#[derive(Default)]
struct State {
    parts: HashMap<u32, Boundary>,
    /// By local edge.
    pairs: HashMap<u32, PairRec>,
    exhausted: usize,
    tasks: VecDeque<Token>,
    outbox: Vec<(u32, Payload)>,
    active: usize,
    stop: bool,
    error: Option<Error>,
    events: Vec<D1Trace>,
    tokens_sent: u64,
}

impl State {
    fn settled(&self) -> usize {
        self.pairs.len() + self.exhausted
    }

    fn boundary_size(&self) -> usize {
        self.parts.values().map(Boundary::len).sum()
    }

    fn apply_update(&mut self, ctx: &Ctx, p: Payload) -> Result<(), Error> {
        match p {
            Payload::AddEdge { sigma, edge, key } => {
                let e = ctx.local(1, edge)?;
                self.parts.entry(sigma).or_default().toggle(key, e.index);
            }
            Payload::Merge { sigma, from } => {
                if let Some(other) = self.parts.remove(&from) {
                    self.parts.entry(sigma).or_default().merge(&other);
                    self.parts.insert(from, other);
                }
            }
            other => return Err(Error::Protocol(format!("unexpected update: {other:?}"))),
        }
        Ok(())
    }
}

fn raise(map: &mut Vec<(u32, u64)>, rank: u32, key: u64) {
    match map.iter_mut().find(|(r, _)| *r == rank) {
        Some((_, k)) => *k = (*k).max(key),
        None => {
            map.push((rank, key));
            map.sort_unstable();
        }
    }
}

fn remove(map: &mut Vec<(u32, u64)>, rank: u32) {
    map.retain(|(r, _)| *r != rank);
}

/// Settings of the token stage.
#[derive(Clone, Copy, Debug)]
pub(crate) struct D1Settings {
    pub mode: Mode,
    pub workers: usize,
    pub anticipation: bool,
    /// Local steps a token may take while a higher edge sits on another rank.
    pub budget: usize,
    pub threshold_ratio: f64,
}

pub(crate) struct D1Output {
    /// `(edge, triangle)`, global ids, stored on this rank.
    pub pairs: Vec<(u32, u32)>,
    pub events: Vec<D1Trace>,
    pub tokens_sent: u64,
    pub rounds: u64,
    pub peak_boundary: usize,
}

struct Env<'a, 'b> {
    ctx: &'a Ctx<'b>,
    c1: HashSet<u32>,
    settings: D1Settings,
    state: Mutex<State>,
    cv: Condvar,
}

impl Env<'_, '_> {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn edge_owner(&self, e: u32) -> u32 {
        self.ctx.block.owner(SimplexId::new(1, e)) as u32
    }

    /// Parks the part and hands the token to `dst`.
    fn send_token(&self, st: &mut State, tok: Token, part: Boundary, dst: u32) {
        let me = self.ctx.rank();
        let Token { sigma, key, mut map } = tok;
        remove(&mut map, dst);
        if let Some((k, _)) = part.max() {
            raise(&mut map, me, k);
        }
        st.parts.insert(sigma, part);
        st.outbox.push((dst, Payload::Token(Token { sigma, key, map })));
        st.tokens_sent += 1;
        st.events.push(D1Trace::TokenSent { sigma, from: me, to: dst });
    }

    /// Advances one propagation as far as this rank allows.
    fn propagate(&self, tok: Token) -> Result<(), Error> {
        let ctx = self.ctx;
        let me = ctx.rank();
        let local = ctx.block.local();
        let mut part = self.lock().parts.remove(&tok.sigma).unwrap_or_default();
        let mut tok = tok;
        let mut budget = self.settings.budget;
        loop {
            let local_max = part.max();
            let remote = tok.map.iter().copied().max_by_key(|&(r, k)| (k, std::cmp::Reverse(r)));
            let Some((k, tau)) = local_max else {
                let mut st = self.lock();
                match remote {
                    Some((dst, _)) => self.send_token(&mut st, tok, part, dst),
                    None => {
                        st.parts.insert(tok.sigma, part);
                        st.exhausted += 1;
                        st.events.push(D1Trace::Exhausted { sigma: tok.sigma, rank: me });
                    }
                }
                return Ok(());
            };
            let mut ahead = None;
            if let Some((dst, rk)) = remote {
                if rk > k {
                    if !self.settings.anticipation || budget == 0 {
                        let mut st = self.lock();
                        self.send_token(&mut st, tok, part, dst);
                        return Ok(());
                    }
                    budget -= 1;
                    ahead = Some(dst);
                }
            }
            let yield_to = |part: Boundary, tok: Token, what: &'static str| -> Result<(), Error> {
                match ahead {
                    Some(dst) => {
                        let mut st = self.lock();
                        self.send_token(&mut st, tok, part, dst);
                        Ok(())
                    }
                    None => Err(Error::Protocol(format!("{what} at the highest edge of a boundary"))),
                }
            };
            match ctx.grad.get(SimplexId::new(1, tau)) {
                Slot::Up(t) => {
                    for (ek, e) in triangle_edges(local, ctx.order, t) {
                        let owner = self.edge_owner(e);
                        if owner == me {
                            part.toggle(ek, e);
                        } else {
                            let edge = ctx.global(SimplexId::new(1, e));
                            raise(&mut tok.map, owner, ek);
                            let mut st = self.lock();
                            st.outbox.push((owner, Payload::AddEdge { sigma: tok.sigma, edge, key: ek }));
                        }
                    }
                }
                Slot::Down(_) => return yield_to(part, tok, "edge paired with a vertex"),
                Slot::Critical if !self.c1.contains(&tau) => {
                    return yield_to(part, tok, "critical edge already paired in dimension 0")
                }
                Slot::Critical => {
                    let mut st = self.lock();
                    let (older, rec_sigma) = match st.pairs.get(&tau) {
                        None => (None, 0),
                        Some(rec) => (Some(rec.key < tok.key), rec.sigma),
                    };
                    match older {
                        Some(true) => {
                            // merge the older propagation's boundary
                            let st = &mut *st;
                            if let Some(other) = st.parts.get(&rec_sigma) {
                                part.merge(other);
                            }
                            let rec = &st.pairs[&tau];
                            for &(q, kq) in &rec.map {
                                st.outbox.push((q, Payload::Merge { sigma: tok.sigma, from: rec_sigma }));
                                raise(&mut tok.map, q, kq);
                            }
                        }
                        _ if ahead.is_some() => {
                            drop(st);
                            return yield_to(part, tok, "");
                        }
                        None => {
                            let Token { sigma, key, map } = tok;
                            st.parts.insert(sigma, part);
                            st.pairs.insert(tau, PairRec { sigma, key, map });
                            st.events.push(D1Trace::Paired { sigma, tau: ctx.global(SimplexId::new(1, tau)), rank: me });
                            return Ok(());
                        }
                        Some(false) => {
                            let Token { sigma, key, map } = tok;
                            st.parts.insert(sigma, part);
                            let old = st.pairs.insert(tau, PairRec { sigma, key, map }).expect("present");
                            st.events.push(D1Trace::Paired { sigma, tau: ctx.global(SimplexId::new(1, tau)), rank: me });
                            st.tasks.push_back(Token { sigma: old.sigma, key: old.key, map: old.map });
                            self.cv.notify_all();
                            return Ok(());
                        }
                    }
                }
                Slot::Unset => return Err(Error::Protocol(format!("edge {tau} has no gradient slot"))),
            }
        }
    }

    fn apply_inbox(&self, st: &mut State, inbox: Vec<Message<Payload>>) -> Result<(), Error> {
        let mut tokens = Vec::new();
        for m in inbox {
            match m.payload {
                Payload::Token(t) => tokens.push(t),
                p => st.apply_update(self.ctx, p)?,
            }
        }
        st.tasks.extend(tokens);
        Ok(())
    }
}

/// Pairs the remaining critical edges and triangles. `c1` and `c2` are owned
/// local ids. Collective.
pub(crate) fn pair_saddles_distributed(
    ep: &mut Endpoint<Payload>,
    ctx: &Ctx,
    c1: &[u32],
    c2: &[u32],
    settings: D1Settings,
) -> Result<D1Output, Error> {
    let local = ctx.block.local();
    let me = ctx.rank();
    let total = ep.allreduce_sum(c2.len() as i64)? as usize;
    let env = Env { ctx, c1: c1.iter().copied().collect(), settings, state: Mutex::new(State::default()), cv: Condvar::new() };
    {
        let mut st = env.lock();
        let mut start: Vec<(u128, u32)> = c2.iter().map(|&t| (ctx.key(SimplexId::new(2, t)), t)).collect();
        start.sort_unstable();
        for (key, t) in start {
            let sigma = ctx.global(SimplexId::new(2, t));
            let mut part = Boundary::new();
            let mut map = Vec::new();
            for (ek, e) in triangle_edges(local, ctx.order, t) {
                let owner = env.edge_owner(e);
                if owner == me {
                    part.toggle(ek, e);
                } else {
                    raise(&mut map, owner, ek);
                    st.outbox.push((owner, Payload::AddEdge { sigma, edge: ctx.global(SimplexId::new(1, e)), key: ek }));
                }
            }
            st.parts.insert(sigma, part);
            st.tasks.push_back(Token { sigma, key, map });
        }
    }

    let ranks = ep.size();
    let threshold = |remaining: usize| {
        let per_rank = remaining as f64 / ranks as f64;
        ((settings.threshold_ratio * per_rank).ceil() as usize).max(1)
    };
    let mut channel = EagerChannel::new(threshold(c2.len() * ranks));
    let mut watch = Watch { total, limit: round_limit(total as u64, ranks) * 8 + 64, busy_rounds: 0, rounds: 0 };
    let mut peak = 0usize;

    let result = match settings.mode {
        Mode::Round => loop {
            loop {
                let tok = env.lock().tasks.pop_front();
                match tok {
                    Some(t) => env.propagate(t)?,
                    None => break,
                }
            }
            let (outbox, settled) = {
                let mut st = env.lock();
                peak = peak.max(st.boundary_size());
                (std::mem::take(&mut st.outbox), st.settled())
            };
            let (inbox, sum) = exchange(ep, outbox, settled)?;
            if watch.tick(sum)? {
                break Ok(());
            }
            let mut st = env.lock();
            env.apply_inbox(&mut st, inbox)?;
        },
        Mode::Eager => thread::scope(|s| {
            let workers = settings.workers.max(1);
            for _ in 0..workers {
                s.spawn(|| loop {
                    let tok = {
                        let mut st = env.lock();
                        while st.tasks.is_empty() && !st.stop {
                            st = env.cv.wait(st).unwrap_or_else(|e| e.into_inner());
                        }
                        if st.stop {
                            return;
                        }
                        st.active += 1;
                        st.tasks.pop_front().expect("non-empty")
                    };
                    let r = env.propagate(tok);
                    let mut st = env.lock();
                    st.active -= 1;
                    if let Err(e) = r {
                        st.error.get_or_insert(e);
                        st.stop = true;
                    }
                    env.cv.notify_all();
                });
            }
            let r = (|| -> Result<(), Error> {
                loop {
                    let (outbox, settled) = {
                        let mut st = env.lock();
                        loop {
                            if let Some(e) = st.error.take() {
                                return Err(e);
                            }
                            let busy = !st.tasks.is_empty() || st.active > 0;
                            if channel.should_flush(st.outbox.len(), busy) {
                                break;
                            }
                            st = env
                                .cv
                                .wait_timeout(st, std::time::Duration::from_millis(1))
                                .unwrap_or_else(|e| e.into_inner())
                                .0;
                        }
                        peak = peak.max(st.boundary_size());
                        (std::mem::take(&mut st.outbox), st.settled())
                    };
                    let (inbox, sum) = exchange(ep, outbox, settled)?;
                    if watch.tick(sum)? {
                        return Ok(());
                    }
                    channel = EagerChannel::new(threshold(total - sum.settled));
                    let mut st = env.lock();
                    env.apply_inbox(&mut st, inbox)?;
                    env.cv.notify_all();
                }
            })();
            let mut st = env.lock();
            st.stop = true;
            env.cv.notify_all();
            drop(st);
            r
        }),
    };
    result?;
    let st = env.state.into_inner().unwrap_or_else(|e| e.into_inner());
    let mut pairs: Vec<(u32, u32)> =
        st.pairs.iter().map(|(&tau, rec)| (ctx.global(SimplexId::new(1, tau)), rec.sigma)).collect();
    pairs.sort_unstable();
    Ok(D1Output { pairs, events: st.events, tokens_sent: st.tokens_sent, rounds: watch.rounds, peak_boundary: peak })
}

#[derive(Clone, Copy)]
struct Sums {
    settled: usize,
    messages: u64,
}

/// Sends the outbox and sums settled propagations and message counts.
fn exchange(ep: &mut Endpoint<Payload>, outbox: Vec<(u32, Payload)>, settled: usize) -> Result<(Vec<Message<Payload>>, Sums), Error> {
    let messages = outbox.len() as i64;
    for (dst, p) in outbox {
        ep.send(dst as usize, p)?;
    }
    let (inbox, sum) = ep.exchange(settled as i64 | messages << 32)?;
    Ok((inbox, Sums { settled: (sum & 0xFFFF_FFFF) as usize, messages: (sum >> 32) as u64 }))
}

struct Watch {
    total: usize,
    limit: u64,
    /// Rounds that carried messages; idle exchanges are not counted.
    busy_rounds: u64,
    rounds: u64,
}

impl Watch {
    /// True once every propagation has settled.
    fn tick(&mut self, s: Sums) -> Result<bool, Error> {
        self.rounds += 1;
        if s.settled == self.total {
            return Ok(true);
        }
        if s.messages > 0 {
            self.busy_rounds += 1;
            if self.busy_rounds > self.limit {
                return Err(Error::Protocol(format!("token stage did not settle within {} rounds", self.limit)));
            }
        }
        Ok(false)
    }
}
