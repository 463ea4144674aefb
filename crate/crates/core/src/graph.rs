//! Immutable directed transaction graph in compressed sparse row layout.
//!
//! An edge `u → v` exists iff the aggregated amount of all `u → v` transfers reaches the
//! [`EdgeThreshold`]. Self-transfers never produce edges. Node ids are dense and assigned in
//! order of first appearance (sender before receiver within a record).
//!
//! Cache file layout (`EAIG1`), all integers little-endian:
//!
//! ```text
//! magic        5 bytes  "EAIG1"
//! id_width     u8       4 or 8
//! node_count   u64
//! edge_count   u64
//! addresses    20 × node_count, id order
//! offsets      u64 × (node_count + 1)
//! targets      id_width × edge_count
//! totals       u64 × edge_count, micro-USD
//! ```

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::sync::OnceLock;

use serde::Serialize;
use thiserror::Error;

use crate::amount::Usd;
use crate::ingest::{Address, TransferRecord};

pub const CACHE_MAGIC: &[u8; 5] = b"EAIG1";

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{what} count {count} exceeds the id capacity {limit}")]
    CapacityExceeded { what: &'static str, count: u64, limit: u64 },
    #[error("node id {id} out of range (node count {node_count})")]
    OutOfRange { id: usize, node_count: usize },
    #[error("invalid graph cache: {0}")]
    InvalidCache(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// Minimum aggregated USD per ordered pair for an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct EdgeThreshold(pub Usd);

impl Default for EdgeThreshold {
    fn default() -> Self {
        EdgeThreshold(Usd::from_dollars(10))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum IdWidth {
    #[default]
    U32,
    U64,
}

impl IdWidth {
    pub fn bytes(self) -> u8 {
        match self {
            IdWidth::U32 => 4,
            IdWidth::U64 => 8,
        }
    }

    pub fn max_ids(self) -> u64 {
        match self {
            IdWidth::U32 => u64::from(u32::MAX),
            IdWidth::U64 => u64::MAX,
        }
    }

    fn from_bytes(b: u8) -> Option<IdWidth> {
        match b {
            4 => Some(IdWidth::U32),
            8 => Some(IdWidth::U64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Targets {
    Narrow(Vec<u32>),
    Wide(Vec<u64>),
}

impl Targets {
    fn len(&self) -> usize {
        match self {
            Targets::Narrow(t) => t.len(),
            Targets::Wide(t) => t.len(),
        }
    }

    fn slice(&self, lo: usize, hi: usize) -> Neighbors<'_> {
        match self {
            Targets::Narrow(t) => Neighbors::Narrow(t[lo..hi].iter()),
            Targets::Wide(t) => Neighbors::Wide(t[lo..hi].iter()),
        }
    }

    fn get(&self, i: usize) -> usize {
        match self {
            Targets::Narrow(t) => t[i] as usize,
            Targets::Wide(t) => t[i] as usize,
        }
    }
}

/// Iterator over the sorted successor ids of a node.
#[derive(Debug, Clone)]
pub enum Neighbors<'a> {
    Narrow(std::slice::Iter<'a, u32>),
    Wide(std::slice::Iter<'a, u64>),
}

impl Iterator for Neighbors<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        match self {
            Neighbors::Narrow(it) => it.next().map(|&v| v as usize),
            Neighbors::Wide(it) => it.next().map(|&v| v as usize),
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = match self {
            Neighbors::Narrow(it) => it.len(),
            Neighbors::Wide(it) => it.len(),
        };
        (n, Some(n))
    }
}

impl ExactSizeIterator for Neighbors<'_> {}

/// Predecessor lists, built lazily from the forward adjacency.
#[derive(Debug, Clone)]
struct ReverseCsr {
    offsets: Vec<u64>,
    sources: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub node_count: u64,
    pub edge_count: u64,
    /// Sum of aggregated totals over edges present in the graph.
    pub total_volume_usd: Usd,
}

#[derive(Debug)]
pub struct TransactionGraph {
    id_width: IdWidth,
    addresses: Vec<Address>,
    index: HashMap<Address, usize>,
    offsets: Vec<u64>,
    targets: Targets,
    totals: Vec<u64>,
    reverse: OnceLock<ReverseCsr>,
}

impl PartialEq for TransactionGraph {
    fn eq(&self, other: &Self) -> bool {
        self.id_width == other.id_width
            && self.addresses == other.addresses
            && self.offsets == other.offsets
            && self.targets == other.targets
            && self.totals == other.totals
    }
}

impl TransactionGraph {
    pub fn node_count(&self) -> usize {
        self.addresses.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn id_width(&self) -> IdWidth {
        self.id_width
    }

    pub fn addresses(&self) -> &[Address] {
        &self.addresses
    }

    pub fn address(&self, id: usize) -> Option<Address> {
        self.addresses.get(id).copied()
    }

    pub fn id_of(&self, addr: &Address) -> Option<usize> {
        self.index.get(addr).copied()
    }

    fn check(&self, v: usize) -> Result<(), GraphError> {
        if v < self.node_count() {
            Ok(())
        } else {
            Err(GraphError::OutOfRange { id: v, node_count: self.node_count() })
        }
    }

    /// Successors of `v` in ascending id order.
    pub fn neighbors(&self, v: usize) -> Result<Neighbors<'_>, GraphError> {
        self.check(v)?;
        Ok(self.neighbors_unchecked(v))
    }

    #[inline]
    pub(crate) fn neighbors_unchecked(&self, v: usize) -> Neighbors<'_> {
        let lo = self.offsets[v] as usize;
        let hi = self.offsets[v + 1] as usize;
        self.targets.slice(lo, hi)
    }

    pub fn out_degree(&self, v: usize) -> Result<usize, GraphError> {
        self.check(v)?;
        Ok((self.offsets[v + 1] - self.offsets[v]) as usize)
    }

    /// Aggregated amount on edge `u → v`, if the edge exists.
    pub fn edge_total(&self, u: usize, v: usize) -> Option<Usd> {
        if u >= self.node_count() {
            return None;
        }
        let lo = self.offsets[u] as usize;
        let hi = self.offsets[u + 1] as usize;
        let pos = match &self.targets {
            Targets::Narrow(t) => t[lo..hi].binary_search(&(v as u32)).ok(),
            Targets::Wide(t) => t[lo..hi].binary_search(&(v as u64)).ok(),
        }?;
        Some(Usd::from_micros(self.totals[lo + pos]))
    }

    /// All edges as `(source, target, total)`, ordered by source then target.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, Usd)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            let lo = self.offsets[u] as usize;
            let hi = self.offsets[u + 1] as usize;
            (lo..hi).map(move |i| (u, self.targets.get(i), Usd::from_micros(self.totals[i])))
        })
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            node_count: self.node_count() as u64,
            edge_count: self.edge_count() as u64,
            total_volume_usd: self.totals.iter().map(|&m| Usd::from_micros(m)).sum(),
        }
    }

    /// Predecessors of `v` in ascending id order. The reverse index is built on first use.
    pub fn predecessors(&self, v: usize) -> Result<&[usize], GraphError> {
        self.check(v)?;
        let rev = self.reverse.get_or_init(|| self.build_reverse());
        Ok(&rev.sources[rev.offsets[v] as usize..rev.offsets[v + 1] as usize])
    }

    fn build_reverse(&self) -> ReverseCsr {
        let n = self.node_count();
        let mut counts = vec![0u64; n + 1];
        for (_, v, _) in self.edges() {
            counts[v + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut sources = vec![0usize; self.edge_count()];
        // Sources are visited in ascending order, so each list comes out sorted.
        for (u, v, _) in self.edges() {
            sources[cursor[v] as usize] = u;
            cursor[v] += 1;
        }
        ReverseCsr { offsets: counts, sources }
    }

    pub fn write_cache<W: Write>(&self, out: W) -> Result<(), GraphError> {
        let mut out = io::BufWriter::new(out);
        out.write_all(CACHE_MAGIC)?;
        out.write_all(&[self.id_width.bytes()])?;
        out.write_all(&(self.node_count() as u64).to_le_bytes())?;
        out.write_all(&(self.edge_count() as u64).to_le_bytes())?;
        for a in &self.addresses {
            out.write_all(a.as_bytes())?;
        }
        for o in &self.offsets {
            out.write_all(&o.to_le_bytes())?;
        }
        match &self.targets {
            Targets::Narrow(t) => {
                for v in t {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
            Targets::Wide(t) => {
                for v in t {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
        for m in &self.totals {
            out.write_all(&m.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_cache_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_cache(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Reads and validates a cache file written by [`TransactionGraph::write_cache`].
    pub fn read_cache<R: Read>(input: R) -> Result<TransactionGraph, GraphError> {
        let mut input = io::BufReader::new(input);
        let bad = |m: &str| GraphError::InvalidCache(m.to_string());
        let mut magic = [0u8; 5];
        input.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(bad("missing EAIG1 magic"));
        }
        let mut width = [0u8; 1];
        input.read_exact(&mut width)?;
        let id_width = IdWidth::from_bytes(width[0]).ok_or_else(|| bad("id width must be 4 or 8"))?;
        let node_count = read_u64(&mut input)?;
        let edge_count = read_u64(&mut input)?;
        if node_count > id_width.max_ids() || edge_count > id_width.max_ids() {
            return Err(bad("counts exceed id width"));
        }
        let n = usize::try_from(node_count).map_err(|_| bad("node count too large"))?;
        let m = usize::try_from(edge_count).map_err(|_| bad("edge count too large"))?;

        let mut addresses = Vec::with_capacity(n.min(1 << 24));
        let mut index = HashMap::with_capacity(n.min(1 << 24));
        for id in 0..n {
            let mut a = [0u8; 20];
            input.read_exact(&mut a)?;
            if index.insert(Address(a), id).is_some() {
                return Err(bad("duplicate address in table"));
            }
            addresses.push(Address(a));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            offsets.push(read_u64(&mut input)?);
        }
        if offsets[0] != 0 || offsets[n] != edge_count || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(bad("offsets are not a monotone prefix sum"));
        }
        let targets = match id_width {
            IdWidth::U32 => {
                let mut t = Vec::with_capacity(m.min(1 << 26));
                for _ in 0..m {
                    let mut b = [0u8; 4];
                    input.read_exact(&mut b)?;
                    t.push(u32::from_le_bytes(b));
                }
                Targets::Narrow(t)
            }
            IdWidth::U64 => {
                let mut t = Vec::with_capacity(m.min(1 << 26));
                for _ in 0..m {
                    t.push(read_u64(&mut input)?);
                }
                Targets::Wide(t)
            }
        };
        let mut totals = Vec::with_capacity(m.min(1 << 26));
        for _ in 0..m {
            totals.push(read_u64(&mut input)?);
        }
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing)? != 0 {
            return Err(bad("trailing bytes after edge totals"));
        }
        let g = TransactionGraph { id_width, addresses, index, offsets, targets, totals, reverse: OnceLock::new() };
        for u in 0..n {
            let mut prev: Option<usize> = None;
            for v in g.neighbors_unchecked(u) {
                if v >= n {
                    return Err(bad("edge target out of range"));
                }
                if v == u {
                    return Err(bad("self-edge"));
                }
                if prev.is_some_and(|p| p >= v) {
                    return Err(bad("adjacency list not strictly ascending"));
                }
                prev = Some(v);
            }
        }
        Ok(g)
    }
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Incremental graph construction; records can be streamed in without being held in memory.
#[derive(Debug)]
pub struct GraphBuilder {
    threshold: EdgeThreshold,
    direct_only: bool,
    id_width: IdWidth,
    id_limit: u64,
    addresses: Vec<Address>,
    index: HashMap<Address, usize>,
    pairs: Vec<(u64, u64, u64)>,
}

impl GraphBuilder {
    pub fn new(threshold: EdgeThreshold, direct_only: bool) -> Self {
        GraphBuilder {
            threshold,
            direct_only,
            id_width: IdWidth::U32,
            id_limit: IdWidth::U32.max_ids(),
            addresses: Vec::new(),
            index: HashMap::new(),
            pairs: Vec::new(),
        }
    }

    pub fn id_width(mut self, width: IdWidth) -> Self {
        self.id_width = width;
        self.id_limit = width.max_ids();
        self
    }

    /// Lowers the node/edge capacity below what the id width allows.
    pub fn id_limit(mut self, limit: u64) -> Self {
        self.id_limit = limit.min(self.id_width.max_ids());
        self
    }

    pub fn reserve(&mut self, nodes: usize, transfers: usize) {
        self.addresses.reserve(nodes);
        self.index.reserve(nodes);
        self.pairs.reserve(transfers);
    }

    fn intern(&mut self, addr: Address) -> Result<usize, GraphError> {
        if let Some(&id) = self.index.get(&addr) {
            return Ok(id);
        }
        let id = self.addresses.len();
        if id as u64 >= self.id_limit {
            return Err(GraphError::CapacityExceeded { what: "node", count: id as u64 + 1, limit: self.id_limit });
        }
        self.addresses.push(addr);
        self.index.insert(addr, id);
        Ok(id)
    }

    /// Every record's addresses become nodes; only records passing the `direct_only`
    /// filter contribute to edge totals.
    pub fn add(&mut self, record: &TransferRecord) -> Result<(), GraphError> {
        let u = self.intern(record.from)?;
        let v = self.intern(record.to)?;
        if u != v && (!self.direct_only || record.direct) {
            self.pairs.push((u as u64, v as u64, record.amount_usd.micros()));
        }
        Ok(())
    }

    pub fn extend<'a>(&mut self, records: impl IntoIterator<Item = &'a TransferRecord>) -> Result<(), GraphError> {
        for r in records {
            self.add(r)?;
        }
        Ok(())
    }

    pub fn build(self) -> Result<TransactionGraph, GraphError> {
        let GraphBuilder { threshold, id_width, id_limit, addresses, index, mut pairs, .. } = self;
        sort_pairs(&mut pairs);

        let n = addresses.len();
        let mut out_deg = vec![0u64; n + 1];
        let mut flat_targets: Vec<u64> = Vec::new();
        let mut totals: Vec<u64> = Vec::new();
        let min = threshold.0.micros();
        let mut i = 0;
        while i < pairs.len() {
            let (u, v, _) = pairs[i];
            let mut sum: u64 = 0;
            while i < pairs.len() && pairs[i].0 == u && pairs[i].1 == v {
                sum = sum.saturating_add(pairs[i].2);
                i += 1;
            }
            if sum >= min {
                out_deg[u as usize + 1] += 1;
                flat_targets.push(v);
                totals.push(sum);
            }
        }
        drop(pairs);
        if flat_targets.len() as u64 > id_limit {
            return Err(GraphError::CapacityExceeded {
                what: "edge",
                count: flat_targets.len() as u64,
                limit: id_limit,
            });
        }
        for k in 0..n {
            out_deg[k + 1] += out_deg[k];
        }
        let targets = match id_width {
            IdWidth::U32 => Targets::Narrow(flat_targets.into_iter().map(|v| v as u32).collect()),
            IdWidth::U64 => Targets::Wide(flat_targets),
        };
        Ok(TransactionGraph { id_width, addresses, index, offsets: out_deg, targets, totals, reverse: OnceLock::new() })
    }
}

#[cfg(feature = "parallel")]
fn sort_pairs(pairs: &mut [(u64, u64, u64)]) {
    use rayon::slice::ParallelSliceMut;
    pairs.par_sort_unstable_by_key(|&(u, v, _)| (u, v));
}

#[cfg(not(feature = "parallel"))]
fn sort_pairs(pairs: &mut [(u64, u64, u64)]) {
    pairs.sort_unstable_by_key(|&(u, v, _)| (u, v));
}

/// Aggregates `records` into a graph with 32-bit ids.
pub fn build_graph(
    records: &[TransferRecord],
    threshold: EdgeThreshold,
    direct_only: bool,
) -> Result<TransactionGraph, GraphError> {
    let mut builder = GraphBuilder::new(threshold, direct_only);
    builder.extend(records)?;
    builder.build()
}
