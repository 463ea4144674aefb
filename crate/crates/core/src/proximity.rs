//! EAI distances: capped multi-source BFS from exchange wallets along transfer direction.
//!
//! A wallet's distance is the fewest hops along directed edges from any exchange wallet.
//! Exchanges sit at 0, their direct recipients at 1, and both count as EAIs. Anything past
//! `max_hops`, or unreachable, is [`Distance::Beyond`]. Sending funds *to* an exchange does
//! not make a wallet closer.

use std::fmt;
use std::io::{self, Write};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::graph::TransactionGraph;
use crate::ingest::{Address, AddressList};

pub const DEFAULT_MAX_HOPS: u8 = 5;

const BEYOND: u8 = u8::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProximityError {
    #[error("no exchange sources remain after exclusions and graph lookup")]
    NoSources,
    #[error("max_hops must be between 1 and 254, got {0}")]
    InvalidMaxHops(u32),
    #[error("address {0} is not in the graph")]
    UnknownAddress(Address),
}

/// Hop count from the nearest exchange, ordered `0 < 1 < … < max_hops < Beyond`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Hops(u8),
    Beyond,
}

impl Distance {
    pub fn hops(self) -> Option<u8> {
        match self {
            Distance::Hops(h) => Some(h),
            Distance::Beyond => None,
        }
    }

    pub fn is_eai(self) -> bool {
        self <= Distance::Hops(1)
    }

    fn from_raw(raw: u8) -> Distance {
        if raw == BEYOND {
            Distance::Beyond
        } else {
            Distance::Hops(raw)
        }
    }

    /// Text form used in exports: the hop count, or `{max_hops}+` for Beyond.
    pub fn label(self, max_hops: u8) -> String {
        match self {
            Distance::Hops(h) => h.to_string(),
            Distance::Beyond => format!("{max_hops}+"),
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Hops(h) => write!(f, "{h}"),
            Distance::Beyond => f.write_str("beyond"),
        }
    }
}

impl Serialize for Distance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Distance::Hops(h) => s.serialize_u8(*h),
            Distance::Beyond => s.serialize_none(),
        }
    }
}

/// Per-node EAI distances over a borrowed graph.
#[derive(Debug, Clone)]
pub struct DistanceMap<'g> {
    graph: &'g TransactionGraph,
    distances: Vec<u8>,
    max_hops: u8,
    source_count: usize,
}

impl PartialEq for DistanceMap<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.distances == other.distances && self.max_hops == other.max_hops && self.source_count == other.source_count
    }
}

/// Single-threaded multi-source BFS.
pub fn compute_distances<'g>(
    graph: &'g TransactionGraph,
    exchanges: &AddressList,
    exclusions: &AddressList,
    max_hops: u32,
) -> Result<DistanceMap<'g>, ProximityError> {
    compute_distances_threaded(graph, exchanges, exclusions, max_hops, 1)
}

/// Multi-source BFS with each frontier expanded by up to `threads` workers. The result
/// does not depend on the worker count.
pub fn compute_distances_threaded<'g>(
    graph: &'g TransactionGraph,
    exchanges: &AddressList,
    exclusions: &AddressList,
    max_hops: u32,
    threads: usize,
) -> Result<DistanceMap<'g>, ProximityError> {
    if !(1..BEYOND as u32).contains(&max_hops) {
        return Err(ProximityError::InvalidMaxHops(max_hops));
    }
    let max_hops = max_hops as u8;
    let mut sources: Vec<usize> =
        exchanges.iter().filter(|a| !exclusions.contains(a)).filter_map(|a| graph.id_of(a)).collect();
    sources.sort_unstable();
    sources.dedup();
    if sources.is_empty() {
        return Err(ProximityError::NoSources);
    }
    let source_count = sources.len();
    let distances = bfs(graph, sources, max_hops, threads.max(1));
    Ok(DistanceMap { graph, distances, max_hops, source_count })
}

#[cfg(feature = "parallel")]
fn bfs(graph: &TransactionGraph, sources: Vec<usize>, max_hops: u8, threads: usize) -> Vec<u8> {
    if threads <= 1 {
        return bfs_sequential(graph, sources, max_hops);
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| bfs_parallel(graph, sources, max_hops)),
        Err(_) => bfs_sequential(graph, sources, max_hops),
    }
}

#[cfg(not(feature = "parallel"))]
fn bfs(graph: &TransactionGraph, sources: Vec<usize>, max_hops: u8, _threads: usize) -> Vec<u8> {
    bfs_sequential(graph, sources, max_hops)
}

fn bfs_sequential(graph: &TransactionGraph, sources: Vec<usize>, max_hops: u8) -> Vec<u8> {
    let mut dist = vec![BEYOND; graph.node_count()];
    for &s in &sources {
        dist[s] = 0;
    }
    let mut frontier = sources;
    let mut next = Vec::new();
    for level in 1..=max_hops {
        for &u in &frontier {
            for v in graph.neighbors_unchecked(u) {
                if dist[v] == BEYOND {
                    dist[v] = level;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        std::mem::swap(&mut frontier, &mut next);
        next.clear();
    }
    dist
}

#[cfg(feature = "parallel")]
fn bfs_parallel(graph: &TransactionGraph, sources: Vec<usize>, max_hops: u8) -> Vec<u8> {
    use rayon::prelude::*;
    use std::sync::atomic::{AtomicU8, Ordering};

    let dist: Vec<AtomicU8> = (0..graph.node_count()).map(|_| AtomicU8::new(BEYOND)).collect();
    for &s in &sources {
        dist[s].store(0, Ordering::Relaxed);
    }
    let mut frontier = sources;
    for level in 1..=max_hops {
        // A node is claimed by exactly one worker; all claimants write the same level.
        let mut next: Vec<usize> = frontier
            .par_chunks(1024)
            .flat_map_iter(|chunk| {
                let mut found = Vec::new();
                for &u in chunk {
                    for v in graph.neighbors_unchecked(u) {
                        if dist[v].load(Ordering::Relaxed) == BEYOND
                            && dist[v].compare_exchange(BEYOND, level, Ordering::Relaxed, Ordering::Relaxed).is_ok()
                        {
                            found.push(v);
                        }
                    }
                }
                found
            })
            .collect();
        if next.is_empty() {
            break;
        }
        next.par_sort_unstable();
        frontier = next;
    }
    dist.into_iter().map(AtomicU8::into_inner).collect()
}

impl<'g> DistanceMap<'g> {
    pub fn graph(&self) -> &'g TransactionGraph {
        self.graph
    }

    pub fn max_hops(&self) -> u8 {
        self.max_hops
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    /// Distance of node `id`; out-of-range ids read as Beyond.
    pub fn by_id(&self, id: usize) -> Distance {
        self.distances.get(id).map_or(Distance::Beyond, |&d| Distance::from_raw(d))
    }

    pub fn distance(&self, addr: &Address) -> Result<Distance, ProximityError> {
        self.graph.id_of(addr).map(|id| self.by_id(id)).ok_or(ProximityError::UnknownAddress(*addr))
    }

    /// Like [`DistanceMap::distance`], with addresses missing from the graph read as Beyond.
    pub fn distance_or_beyond(&self, addr: &Address) -> Distance {
        self.distance(addr).unwrap_or(Distance::Beyond)
    }

    pub fn is_eai(&self, addr: &Address) -> Result<bool, ProximityError> {
        Ok(self.distance(addr)?.is_eai())
    }

    /// True iff the wallet is within `k` hops of some EAI, i.e. `d ≤ 1 + k`.
    pub fn within_hops_of_eai(&self, addr: &Address, k: u32) -> Result<bool, ProximityError> {
        Ok(match self.distance(addr)? {
            Distance::Hops(h) => u32::from(h) <= 1 + k,
            Distance::Beyond => false,
        })
    }

    pub fn txn_distance(&self, sender: &Address, receiver: &Address) -> Result<Distance, ProximityError> {
        Ok(self.distance(sender)?.min(self.distance(receiver)?))
    }

    pub fn txn_is_eai(&self, sender: &Address, receiver: &Address) -> Result<bool, ProximityError> {
        Ok(self.distance(sender)?.is_eai() || self.distance(receiver)?.is_eai())
    }

    /// `(address, distance)` in node-id order.
    pub fn iter(&self) -> impl Iterator<Item = (Address, Distance)> + '_ {
        self.graph.addresses().iter().zip(&self.distances).map(|(a, &d)| (*a, Distance::from_raw(d)))
    }

    /// Node counts per distance: indices `0..=max_hops`, then Beyond last.
    pub fn histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; self.max_hops as usize + 2];
        for &d in &self.distances {
            let col = if d == BEYOND { self.max_hops as usize + 1 } else { d as usize };
            h[col] += 1;
        }
        h
    }

    /// Exports `address,distance` rows in node-id order, Beyond as `{max_hops}+`.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        writeln!(out, "address,distance")?;
        for (a, d) in self.iter() {
            writeln!(out, "{a},{}", d.label(self.max_hops))?;
        }
        out.flush()
    }
}
