//! Global vertex order by sample sort.

use std::cmp::Ordering;

use dms_core::order::compare_values;
use dms_core::partition::GhostedBlock;
use dms_core::SimplexId;

use super::Payload;
use crate::transport::{Endpoint, Message};
use crate::Error;

type Item = (f64, u32);

fn cmp(a: &Item, b: &Item) -> Ordering {
    compare_values(a.0, a.1 as u64, b.0, b.1 as u64)
}

/// Computes the global order of every vertex in the ghosted block.
/// `values` are indexed by local vertex. Collective.
pub fn order_distributed(ep: &mut Endpoint<Payload>, block: &GhostedBlock, values: &[f64]) -> Result<Vec<u32>, Error> {
    let local = block.local();
    let p = ep.size();
    let me = ep.rank();
    if let Some(v) = values.iter().position(|x| x.is_nan()) {
        return Err(dms_core::Error::NanValue { vertex: block.vertex_to_global(v as u32) as u64 }.into());
    }

    let mut items: Vec<Item> = (0..local.vertex_count())
        .filter(|&v| block.is_owned(SimplexId::new(0, v)))
        .map(|v| (values[v as usize], block.vertex_to_global(v)))
        .collect();
    items.sort_unstable_by(cmp);

    let samples: Vec<Item> = if items.is_empty() { Vec::new() } else { (0..p).map(|i| items[i * items.len() / p]).collect() };
    ep.send(0, Payload::Samples(samples))?;
    let (inbox, _) = ep.exchange(0)?;
    if me == 0 {
        let mut all: Vec<Item> = Vec::new();
        for m in inbox {
            if let Payload::Samples(s) = m.payload {
                all.extend(s);
            }
        }
        all.sort_unstable_by(cmp);
        let splitters: Vec<Item> = if all.is_empty() { Vec::new() } else { (1..p).map(|i| all[i * all.len() / p]).collect() };
        for r in 0..p {
            ep.send(r, Payload::Splitters(splitters.clone()))?;
        }
    }
    let (inbox, _) = ep.exchange(0)?;
    let splitters = inbox
        .into_iter()
        .find_map(|m| match m.payload {
            Payload::Splitters(s) => Some(s),
            _ => None,
        })
        .ok_or_else(|| Error::Protocol("splitters missing".into()))?;

    let mut buckets: Vec<Vec<Item>> = vec![Vec::new(); p];
    for it in items {
        let b = splitters.partition_point(|s| cmp(s, &it) != Ordering::Greater);
        buckets[b].push(it);
    }
    for (r, b) in buckets.into_iter().enumerate() {
        if !b.is_empty() {
            ep.send(r, Payload::Items(b))?;
        }
    }
    let (inbox, _) = ep.exchange(0)?;
    let mut mine: Vec<Item> = collect(inbox, |pl| match pl {
        Payload::Items(v) => Some(v),
        _ => None,
    });
    mine.sort_unstable_by(cmp);

    for r in 0..p {
        ep.send(r, Payload::BucketSize(mine.len() as u64))?;
    }
    let (inbox, _) = ep.exchange(0)?;
    let offset: u64 = inbox
        .iter()
        .filter(|m| m.src < me)
        .map(|m| match m.payload {
            Payload::BucketSize(n) => n,
            _ => 0,
        })
        .sum();

    let part = block.partition();
    let grid = block.global();
    let mut to_owner: Vec<Vec<(u32, u32)>> = vec![Vec::new(); p];
    for (k, &(_, id)) in mine.iter().enumerate() {
        let owner = part.owner_of_vertex(grid.vertex_coords(id));
        to_owner[owner].push((id, (offset + k as u64) as u32));
    }
    send_groups(ep, to_owner)?;
    let (inbox, _) = ep.exchange(0)?;
    let owned_orders = collect(inbox, |pl| match pl {
        Payload::Orders(v) => Some(v),
        _ => None,
    });

    // forward to every rank whose ghosted box holds the vertex
    let mut to_ghosts: Vec<Vec<(u32, u32)>> = vec![Vec::new(); p];
    for &(id, o) in &owned_orders {
        let c = grid.vertex_coords(id);
        for (r, group) in to_ghosts.iter_mut().enumerate() {
            if part.ghosted_box(r).contains(c) {
                group.push((id, o));
            }
        }
    }
    send_groups(ep, to_ghosts)?;
    let (inbox, _) = ep.exchange(0)?;
    let mut order = vec![u32::MAX; local.vertex_count() as usize];
    for (id, o) in collect(inbox, |pl| match pl {
        Payload::Orders(v) => Some(v),
        _ => None,
    }) {
        let v = block.vertex_to_local(id).ok_or_else(|| Error::Protocol(format!("order for foreign vertex {id}")))?;
        order[v as usize] = o;
    }
    if order.contains(&u32::MAX) {
        return Err(Error::Protocol("a ghosted vertex received no order".into()));
    }
    Ok(order)
}

fn send_groups(ep: &mut Endpoint<Payload>, groups: Vec<Vec<(u32, u32)>>) -> Result<(), Error> {
    for (r, g) in groups.into_iter().enumerate() {
        if !g.is_empty() {
            ep.send(r, Payload::Orders(g))?;
        }
    }
    Ok(())
}

fn collect<T>(inbox: Vec<Message<Payload>>, f: impl Fn(Payload) -> Option<Vec<T>>) -> Vec<T> {
    inbox.into_iter().filter_map(|m| f(m.payload)).flatten().collect()
}
