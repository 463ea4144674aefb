use std::path::{Path, PathBuf};

use eai_core::analytics::Buckets;
use eai_core::ingest::InputFormat;
use eai_core::proximity::DEFAULT_MAX_HOPS;
use eai_core::{EdgeThreshold, Usd};
use serde::{Deserialize, Serialize};

use crate::args::{Format, GlobalArgs, InputFormatArg, ProximityArgs, TransferArgs};
use crate::error::{CliError, CliResult};

/// Settings from `--config`. Every field is optional; flags override.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub transfers: Option<PathBuf>,
    pub input_format: Option<InputFormatArg>,
    pub graph: Option<PathBuf>,
    pub exchanges: Option<PathBuf>,
    pub exclusions: Option<PathBuf>,
    pub exploiters: Option<PathBuf>,
    pub threshold_usd: Option<Usd>,
    pub direct_only: Option<bool>,
    pub max_hops: Option<u32>,
    pub wallet_buckets: Option<String>,
    pub txn_buckets: Option<String>,
    pub wallet_threshold_usd: Option<Usd>,
    pub txn_threshold_usd: Option<Usd>,
    pub format: Option<Format>,
    pub strict: Option<bool>,
    pub threads: Option<usize>,
    pub gas_params: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::in_file(path, e))
    }
}

/// Effective settings for one run after merging defaults, config and flags.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub transfers: Option<PathBuf>,
    #[serde(skip)]
    pub input_format: InputFormat,
    pub graph: Option<PathBuf>,
    pub exchanges: Option<PathBuf>,
    pub exclusions: Option<PathBuf>,
    pub exploiters: Option<PathBuf>,
    pub threshold_usd: Usd,
    pub direct_only: bool,
    pub max_hops: u32,
    pub wallet_buckets: Option<String>,
    pub txn_buckets: Option<String>,
    pub wallet_threshold_usd: Usd,
    pub txn_threshold_usd: Usd,
    #[serde(skip)]
    pub format: Option<Format>,
    pub strict: bool,
    #[serde(skip)]
    pub threads: usize,
    #[serde(skip)]
    pub gas_params: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(global: &GlobalArgs) -> CliResult<Self> {
        let file = match &global.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let threads = global
            .threads
            .or(file.threads)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if threads == 0 {
            return Err(CliError::invalid("--threads must be at least 1"));
        }
        let input_format = match file.input_format {
            Some(InputFormatArg::Jsonl) => InputFormat::Jsonl,
            _ => InputFormat::Csv,
        };
        Ok(RunConfig {
            transfers: file.transfers,
            input_format,
            graph: file.graph,
            exchanges: file.exchanges,
            exclusions: file.exclusions,
            exploiters: file.exploiters,
            threshold_usd: file.threshold_usd.unwrap_or(EdgeThreshold::default().0),
            direct_only: file.direct_only.unwrap_or(false),
            max_hops: file.max_hops.unwrap_or(u32::from(DEFAULT_MAX_HOPS)),
            wallet_buckets: file.wallet_buckets,
            txn_buckets: file.txn_buckets,
            wallet_threshold_usd: file.wallet_threshold_usd.unwrap_or(Usd::from_dollars(10_000)),
            txn_threshold_usd: file.txn_threshold_usd.unwrap_or(Usd::from_dollars(2_000)),
            format: global.format.or(file.format),
            strict: global.strict || file.strict.unwrap_or(false),
            threads,
            gas_params: file.gas_params,
        })
    }

    pub fn apply_transfers(&mut self, a: &TransferArgs) {
        if let Some(p) = &a.transfers {
            self.transfers = Some(p.clone());
        }
        match a.input_format {
            Some(InputFormatArg::Csv) => self.input_format = InputFormat::Csv,
            Some(InputFormatArg::Jsonl) => self.input_format = InputFormat::Jsonl,
            None => {}
        }
        if let Some(t) = a.threshold_usd {
            self.threshold_usd = t;
        }
        self.direct_only |= a.direct_only;
    }

    pub fn apply_proximity(&mut self, a: &ProximityArgs) -> CliResult<()> {
        self.apply_transfers(&a.transfers);
        if let Some(p) = &a.graph {
            self.graph = Some(p.clone());
        }
        if let Some(p) = &a.exchanges {
            self.exchanges = Some(p.clone());
        }
        if let Some(p) = &a.exclusions {
            self.exclusions = Some(p.clone());
        }
        if let Some(h) = a.max_hops {
            self.max_hops = h;
        }
        if self.max_hops == 0 {
            return Err(CliError::invalid("--max-hops must be at least 1"));
        }
        Ok(())
    }

    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    pub fn buckets(list: Option<&str>, default: Buckets) -> CliResult<Buckets> {
        match list {
            Some(s) => Buckets::parse_boundaries(s).map_err(|e| CliError::invalid(format!("--buckets `{s}`: {e}"))),
            None => Ok(default),
        }
    }
}
