use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use eai_core::graph::{GraphBuilder, IdWidth};
use eai_core::ingest::{parse_address_list, parse_transfers, ListRole};
use eai_core::proximity::{compute_distances_threaded, DistanceMap};
use eai_core::{AddressList, EdgeThreshold, TransactionGraph, TransferRecord};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Reads input files and records a SHA-256 digest of each for report provenance.
#[derive(Debug, Default)]
pub struct Inputs {
    digests: BTreeMap<String, String>,
}

impl Inputs {
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.digests.insert(path.display().to_string(), format!("sha256:{}", hex_digest(&bytes)));
        Ok(bytes)
    }

    pub fn digests(&self) -> &BTreeMap<String, String> {
        &self.digests
    }

    pub fn transfers(&mut self, cfg: &RunConfig) -> CliResult<Vec<TransferRecord>> {
        let path = require(&cfg.transfers, "--transfers")?;
        let bytes = self.read(path)?;
        let parsed =
            parse_transfers(&bytes[..], cfg.input_format, cfg.strict).map_err(|e| CliError::ingest(path, e))?;
        if let Some(first) = parsed.errors.first() {
            eprintln!(
                "warning: {}: skipped {} malformed row(s); first at line {}: {}",
                path.display(),
                parsed.errors.len(),
                first.line,
                first.reason
            );
        }
        Ok(parsed.records)
    }

    pub fn list(&mut self, path: &Path, role: ListRole) -> CliResult<AddressList> {
        let bytes = self.read(path)?;
        parse_address_list(&bytes[..], role).map_err(|e| CliError::ingest(path, e))
    }

    pub fn optional_list(&mut self, path: Option<&PathBuf>, role: ListRole) -> CliResult<AddressList> {
        match path {
            Some(p) => self.list(p, role),
            None => Ok(AddressList::new(role)),
        }
    }

    pub fn graph_cache(&mut self, path: &Path) -> CliResult<TransactionGraph> {
        let bytes = self.read(path)?;
        // An I/O error from an in-memory slice means the file is truncated.
        TransactionGraph::read_cache(&bytes[..]).map_err(|e| CliError::in_file(path, e))
    }
}

pub fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a PathBuf> {
    p.as_ref().ok_or_else(|| CliError::invalid(format!("missing required input {flag}")))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn build(records: &[TransferRecord], cfg: &RunConfig, width: IdWidth) -> CliResult<TransactionGraph> {
    let mut b = GraphBuilder::new(EdgeThreshold(cfg.threshold_usd), cfg.direct_only).id_width(width);
    b.extend(records).map_err(|e| CliError::invalid(e.to_string()))?;
    b.build().map_err(|e| CliError::invalid(e.to_string()))
}

/// The graph from `--graph` when given, otherwise built from the transfers.
pub fn graph(inputs: &mut Inputs, cfg: &RunConfig, records: Option<&[TransferRecord]>) -> CliResult<TransactionGraph> {
    match (&cfg.graph, records) {
        (Some(p), _) => inputs.graph_cache(p),
        (None, Some(r)) => build(r, cfg, IdWidth::U32),
        (None, None) => {
            let records = inputs.transfers(cfg).map_err(|e| match e {
                CliError::Validation(m) if m.starts_with("missing") => {
                    CliError::invalid("missing required input: --graph or --transfers")
                }
                other => other,
            })?;
            build(&records, cfg, IdWidth::U32)
        }
    }
}

pub fn distances<'g>(inputs: &mut Inputs, cfg: &RunConfig, g: &'g TransactionGraph) -> CliResult<DistanceMap<'g>> {
    let ex_path = require(&cfg.exchanges, "--exchanges")?;
    let exchanges = inputs.list(ex_path, ListRole::Exchange)?;
    let exclusions = inputs.optional_list(cfg.exclusions.as_ref(), ListRole::Exclusion)?;
    compute_distances_threaded(g, &exchanges, &exclusions, cfg.max_hops, cfg.threads)
        .map_err(|e| CliError::invalid(format!("{}: {e}", ex_path.display())))
}
