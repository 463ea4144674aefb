//! Transaction-proximity analytics over directed transfer graphs.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`ingest`] parses transfer records and address lists.
//! - [`graph`] aggregates transfers into an immutable CSR graph with a USD edge threshold.
//! - [`proximity`] runs a capped multi-source BFS from exchange wallets and classifies
//!   wallets and transactions as EAIs (distance ≤ 1).
//! - [`analytics`] replays balances and builds distance tables and exploiter reports.
//!
//! Three registry mechanisms for publishing the EAI set are provided alongside:
//! [`ledger_sim`] (flags packed into the balance word), [`attestation`] (signed off-chain
//! statements) and [`merkle_registry`] (a single committed root), plus [`gas_model`], a
//! calibrated cost model comparing them.

pub mod amount;
pub mod analytics;
pub mod attestation;
pub mod gas_model;
pub mod graph;
pub mod ingest;
pub mod ledger_sim;
pub mod merkle_registry;
pub mod proximity;

pub use amount::Usd;
pub use graph::{build_graph, EdgeThreshold, TransactionGraph};
pub use ingest::{Address, AddressList, ListRole, TransferRecord};
pub use proximity::{compute_distances, Distance, DistanceMap};

/// Keccak-256 as used by the EVM.
pub(crate) fn keccak256(parts: &[&[u8]]) -> [u8; 32] {
    use sha3::{Digest, Keccak256};
    let mut hasher = Keccak256::new();
    for part in parts {
        hasher.update(part);
    }
    hasher.finalize().into()
}
