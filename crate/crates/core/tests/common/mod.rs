//! Test-only oracles. Nothing here calls into the BFS, CSR build or table code under test.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::PathBuf;

use eai_core::ingest::{parse_address_list, parse_transfers, InputFormat, ListRole};
use eai_core::{Address, AddressList, TransferRecord, Usd};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load_transfers(name: &str) -> Vec<TransferRecord> {
    let f = std::fs::File::open(fixture(name)).unwrap();
    let parsed = parse_transfers(f, InputFormat::Csv, true).unwrap();
    parsed.records
}

pub fn load_list(name: &str, role: ListRole) -> AddressList {
    parse_address_list(std::fs::File::open(fixture(name)).unwrap(), role).unwrap()
}

pub fn tag(hex_pair: &str) -> Address {
    format!("0x{}", hex_pair.repeat(20)).parse().unwrap()
}

/// Named nodes of the 8-node chain fixture.
pub struct Chain8 {
    pub e: Address,
    pub a: Address,
    pub b: Address,
    pub c: Address,
    pub d: Address,
    pub f: Address,
    pub g: Address,
    pub x: Address,
}

pub fn chain8() -> Chain8 {
    Chain8 {
        e: tag("ee"),
        a: tag("aa"),
        b: tag("bb"),
        c: tag("cc"),
        d: tag("dd"),
        f: tag("ff"),
        g: tag("99"),
        x: tag("77"),
    }
}

/// Aggregated `(from, to) → micro-USD` over non-self transfers, then thresholded.
pub fn aggregate_edges(records: &[TransferRecord], min: Usd, direct_only: bool) -> BTreeMap<(Address, Address), u64> {
    let mut totals: HashMap<(Address, Address), u128> = HashMap::new();
    for r in records {
        if r.from != r.to && (!direct_only || r.direct) {
            *totals.entry((r.from, r.to)).or_default() += u128::from(r.amount_usd.micros());
        }
    }
    totals
        .into_iter()
        .filter(|&(_, t)| t >= u128::from(min.micros()))
        .map(|(k, t)| (k, t.min(u128::from(u64::MAX)) as u64))
        .collect()
}

/// Shortest hop count from any source via exhaustive simple-path enumeration, capped.
pub fn enumerate_paths_distances(
    edges: &BTreeSet<(Address, Address)>,
    sources: &BTreeSet<Address>,
    max_hops: usize,
) -> BTreeMap<Address, usize> {
    let mut succ: BTreeMap<Address, Vec<Address>> = BTreeMap::new();
    for &(u, v) in edges {
        succ.entry(u).or_default().push(v);
    }
    let mut best: BTreeMap<Address, usize> = BTreeMap::new();
    fn walk(
        path: &mut Vec<Address>,
        succ: &BTreeMap<Address, Vec<Address>>,
        best: &mut BTreeMap<Address, usize>,
        max_hops: usize,
    ) {
        let v = *path.last().unwrap();
        let hops = path.len() - 1;
        let e = best.entry(v).or_insert(usize::MAX);
        *e = (*e).min(hops);
        if hops == max_hops {
            return;
        }
        for &w in succ.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            if !path.contains(&w) {
                path.push(w);
                walk(path, succ, best, max_hops);
                path.pop();
            }
        }
    }
    for &s in sources {
        walk(&mut vec![s], &succ, &mut best, max_hops);
    }
    best
}

/// Plain adjacency-list graph used by the BFS oracle.
pub struct SimpleGraph {
    pub n: usize,
    pub succ: Vec<Vec<usize>>,
}

impl SimpleGraph {
    pub fn random(rng: &mut impl Rng, max_nodes: usize, max_edges: usize) -> SimpleGraph {
        let n = rng.gen_range(2..=max_nodes);
        let m = rng.gen_range(0..=max_edges.min(n * (n - 1)));
        let mut succ = vec![Vec::new(); n];
        for _ in 0..m {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v {
                succ[u].push(v);
            }
        }
        SimpleGraph { n, succ }
    }

    /// For every node, the min over sources of a separate single-source BFS, capped.
    pub fn per_source_bfs(&self, sources: &[usize], max_hops: usize) -> Vec<Option<usize>> {
        let mut best = vec![None; self.n];
        for &s in sources {
            let mut dist = vec![usize::MAX; self.n];
            dist[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for &v in &self.succ[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        q.push_back(v);
                    }
                }
            }
            for v in 0..self.n {
                if dist[v] <= max_hops {
                    best[v] = Some(best[v].map_or(dist[v], |b: usize| b.min(dist[v])));
                }
            }
        }
        best
    }
}

pub fn node_addr(i: usize) -> Address {
    let mut b = [0u8; 20];
    b[..8].copy_from_slice(&(i as u64).to_be_bytes());
    b[19] = 0x5a;
    Address(b)
}

/// One $20 transfer per oracle edge, so every edge clears the default threshold.
/// A self-transfer per node pins node ids to oracle indices.
pub fn records_for(g: &SimpleGraph) -> Vec<TransferRecord> {
    let mut out = Vec::new();
    for i in 0..g.n {
        out.push(transfer(node_addr(i), node_addr(i), 1));
    }
    for (u, vs) in g.succ.iter().enumerate() {
        for &v in vs {
            out.push(transfer(node_addr(u), node_addr(v), 20));
        }
    }
    out
}

pub fn transfer(from: Address, to: Address, dollars: u64) -> TransferRecord {
    TransferRecord {
        ordering_key: 0,
        from,
        to,
        amount_usd: Usd::from_dollars(dollars),
        token: Default::default(),
        direct: true,
    }
}
