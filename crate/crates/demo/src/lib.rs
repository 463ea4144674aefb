//! Browser bindings for three operations: distances over a small edge list, a Merkle
//! membership proof, and the registry cost table. Each binding wraps a plain function
//! that returns JSON or text, so the logic is testable natively.

use std::collections::BTreeMap;

use eai_core::gas_model::{comparison_table, CostParamsFile};
use eai_core::ingest::ListRole;
use eai_core::merkle_registry::{verify, MerkleRegistry};
use eai_core::{build_graph, compute_distances, Address, AddressList, EdgeThreshold, TransferRecord, Usd};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Maps free-form node labels to addresses. Labels that already are addresses map to themselves.
#[derive(Default)]
struct Labels {
    by_label: BTreeMap<String, Address>,
    by_addr: BTreeMap<Address, String>,
}

impl Labels {
    fn intern(&mut self, label: &str) -> Address {
        if let Some(a) = self.by_label.get(label) {
            return *a;
        }
        let addr = label.parse::<Address>().unwrap_or_else(|_| {
            let mut b = [0u8; 20];
            b[0] = 0xd0;
            b[12..].copy_from_slice(&(self.by_label.len() as u64 + 1).to_be_bytes());
            Address(b)
        });
        self.by_label.insert(label.to_string(), addr);
        self.by_addr.insert(addr, label.to_string());
        addr
    }

    fn name(&self, a: &Address) -> String {
        self.by_addr.get(a).cloned().unwrap_or_else(|| a.to_string())
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// `edges`: one `from,to,amount_usd` per line. `exchanges`: labels separated by commas or newlines.
pub fn distances_json(edges: &str, exchanges: &str, threshold_usd: &str, max_hops: u32) -> Result<String, String> {
    let mut labels = Labels::default();
    let mut records = Vec::new();
    for (line, l) in lines(edges) {
        let parts: Vec<&str> = l.split(',').map(str::trim).collect();
        let [from, to, amount] = parts[..] else {
            return Err(format!("edge line {line}: expected `from,to,amount_usd`"));
        };
        let amount_usd = amount.parse::<Usd>().map_err(|e| format!("edge line {line}: {e}"))?;
        records.push(TransferRecord {
            ordering_key: records.len() as u64,
            from: labels.intern(from),
            to: labels.intern(to),
            amount_usd,
            token: Default::default(),
            direct: true,
        });
    }
    let threshold = threshold_usd.trim().parse::<Usd>().map_err(|e| format!("threshold: {e}"))?;
    let ex: Vec<Address> =
        exchanges.split([',', '\n']).map(str::trim).filter(|s| !s.is_empty()).map(|s| labels.intern(s)).collect();
    let graph = build_graph(&records, EdgeThreshold(threshold), false).map_err(|e| e.to_string())?;
    let exchanges = AddressList::from_addresses(ListRole::Exchange, ex);
    let dm = compute_distances(&graph, &exchanges, &AddressList::new(ListRole::Exclusion), max_hops)
        .map_err(|e| e.to_string())?;
    let nodes: Vec<_> = dm
        .iter()
        .map(|(a, d)| json!({ "node": labels.name(&a), "distance": d.label(dm.max_hops()), "eai": d.is_eai() }))
        .collect();
    let edges: Vec<_> = graph
        .edges()
        .map(|(u, v, total)| {
            let name = |id| labels.name(&graph.address(id).expect("edge endpoint"));
            json!({ "from": name(u), "to": name(v), "total_usd": total })
        })
        .collect();
    Ok(json!({ "nodes": nodes, "edges": edges }).to_string())
}

/// Builds a registry from `members` (one address per line), proves `address`, and shows that
/// the proof fails once a single bit of the root is flipped.
pub fn merkle_json(members: &str, address: &str) -> Result<String, String> {
    let mut set = Vec::new();
    for (line, l) in lines(members) {
        set.push(l.parse::<Address>().map_err(|e| format!("line {line}: {e}"))?);
    }
    let reg = MerkleRegistry::build(&set).map_err(|e| e.to_string())?;
    let addr = address.trim().parse::<Address>().map_err(|e| e.to_string())?;
    let proof = reg.prove(&addr).map_err(|e| e.to_string())?;
    let mut tampered = reg.root();
    tampered.0[31] ^= 1;
    Ok(json!({
        "root": reg.root(),
        "size": reg.len(),
        "depth": reg.depth(),
        "siblings": proof.siblings,
        "verified": verify(&reg.root(), &proof),
        "verified_against_tampered_root": verify(&tampered, &proof),
    })
    .to_string())
}

/// Cost comparison text for the given Merkle sizes and prices.
pub fn gas_table_text(sizes: &str, eth_price_usd: f64, gas_price_gwei: f64) -> Result<String, String> {
    let sizes: Vec<u64> = sizes
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.replace('_', "").parse::<u64>().map_err(|_| format!("invalid registry size `{s}`")))
        .collect::<Result<_, _>>()?;
    let params = CostParamsFile {
        eth_price_usd: Some(eth_price_usd),
        gas_price_gwei: Some(gas_price_gwei),
        ..Default::default()
    }
    .resolve()
    .map_err(|e| e.to_string())?;
    Ok(comparison_table(&params, &sizes, 1).map_err(|e| e.to_string())?.to_text())
}

#[wasm_bindgen]
pub fn distances(edges: &str, exchanges: &str, threshold_usd: &str, max_hops: u32) -> Result<String, JsValue> {
    distances_json(edges, exchanges, threshold_usd, max_hops).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn merkle_proof(members: &str, address: &str) -> Result<String, JsValue> {
    merkle_json(members, address).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn gas_table(sizes: &str, eth_price_usd: f64, gas_price_gwei: f64) -> Result<String, JsValue> {
    gas_table_text(sizes, eth_price_usd, gas_price_gwei).map_err(|e| JsValue::from_str(&e))
}
