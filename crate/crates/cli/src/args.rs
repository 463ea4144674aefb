use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eai_core::gas_model::Method;
use eai_core::{Address, Usd};

#[derive(Debug, Parser)]
#[command(name = "eai", version, about = "Exchange-proximity analytics and EAI registry tools")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Reject the input on the first malformed row instead of skipping it.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transaction graph cache.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Per-address exchange distances.
    Distances(DistancesArgs),
    /// Distance tables.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Graph statistics and population summary.
    Stats(StatsArgs),
    /// Merkle membership registry.
    #[command(subcommand)]
    Merkle(MerkleCommand),
    /// Signed EAI-status attestations.
    #[command(subcommand)]
    Attest(AttestCommand),
    /// Bit-packed flag ledger.
    #[command(subcommand)]
    Ledger(LedgerCommand),
    /// Registry cost model.
    #[command(subcommand)]
    Gas(GasCommand),
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// Aggregate transfers into a graph and write the binary cache to --out.
    Build(GraphBuildArgs),
}

/// Where transfers come from and how they become a graph.
#[derive(Debug, Clone, Args)]
pub struct TransferArgs {
    #[arg(long, value_name = "PATH")]
    pub transfers: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub input_format: Option<InputFormatArg>,
    /// Minimum aggregated amount for an edge.
    #[arg(long, value_name = "USD")]
    pub threshold_usd: Option<Usd>,
    /// Build edges from wallet-to-wallet transfers only.
    #[arg(long)]
    pub direct_only: bool,
}

#[derive(Debug, Args)]
pub struct GraphBuildArgs {
    #[command(flatten)]
    pub transfers: TransferArgs,
    /// Store node ids as 64-bit integers.
    #[arg(long)]
    pub wide_ids: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ProximityArgs {
    #[command(flatten)]
    pub transfers: TransferArgs,
    /// Graph cache from `graph build`; replaces building from --transfers.
    #[arg(long, value_name = "PATH")]
    pub graph: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub exchanges: Option<PathBuf>,
    /// Exchange addresses whose outflows confer no status.
    #[arg(long, value_name = "PATH")]
    pub exclusions: Option<PathBuf>,
    #[arg(long)]
    pub max_hops: Option<u32>,
}

#[derive(Debug, Args)]
pub struct DistancesArgs {
    #[command(flatten)]
    pub proximity: ProximityArgs,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Wallets by max lifetime balance and distance.
    Wallets(WalletReportArgs),
    /// Transfers by amount and transaction distance.
    Txns(TxnReportArgs),
    /// Distance histogram of a known-exploiter list against all nodes.
    Exploiters(ExploiterReportArgs),
}

#[derive(Debug, Args)]
pub struct WalletReportArgs {
    #[command(flatten)]
    pub proximity: ProximityArgs,
    /// Ascending bucket lower bounds, e.g. `10,1k,100k,10m`.
    #[arg(long, value_name = "LIST")]
    pub buckets: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CellKindArg {
    Count,
    Volume,
}

#[derive(Debug, Args)]
pub struct TxnReportArgs {
    #[command(flatten)]
    pub proximity: ProximityArgs,
    #[arg(long, value_name = "LIST")]
    pub buckets: Option<String>,
    #[arg(long, value_enum, default_value = "count")]
    pub kind: CellKindArg,
    /// Count every transfer, not only wallet-to-wallet ones.
    #[arg(long)]
    pub include_indirect: bool,
}

#[derive(Debug, Args)]
pub struct ExploiterReportArgs {
    #[command(flatten)]
    pub proximity: ProximityArgs,
    #[arg(long, value_name = "PATH")]
    pub exploiters: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub proximity: ProximityArgs,
    #[arg(long, value_name = "USD")]
    pub wallet_threshold_usd: Option<Usd>,
    #[arg(long, value_name = "USD")]
    pub txn_threshold_usd: Option<Usd>,
}

#[derive(Debug, Subcommand)]
pub enum MerkleCommand {
    /// Build a registry from an address list; writes the registry file to --out and the
    /// root next to it as `<out>.root`.
    Build {
        #[arg(long, value_name = "PATH")]
        addresses: PathBuf,
    },
    /// Emit the membership proof for one address.
    Prove {
        #[arg(long, value_name = "PATH")]
        registry: PathBuf,
        #[arg(long)]
        address: Address,
    },
    /// Check a proof file; exits 1 when the proof does not hold.
    Verify {
        #[arg(long, value_name = "PATH")]
        proof: PathBuf,
        /// Expected root; defaults to the root recorded in the proof file.
        #[arg(long)]
        root: Option<String>,
        #[arg(long, value_name = "PATH", conflicts_with = "root")]
        root_file: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AttestCommand {
    /// Generate a signing key (hex seed, mode 0600) and print its public key.
    Keygen {
        #[arg(long, value_name = "PATH", env = "EAI_SIGNER_KEY_PATH")]
        key: PathBuf,
        /// Replace an existing key file.
        #[arg(long)]
        force: bool,
    },
    Sign {
        #[arg(long, value_name = "PATH", env = "EAI_SIGNER_KEY_PATH")]
        key: PathBuf,
        #[arg(long)]
        address: Address,
        #[arg(long, value_enum)]
        status: Status,
        #[arg(long, value_name = "SECONDS")]
        ttl: u64,
        /// Random when omitted.
        #[arg(long)]
        nonce: Option<u64>,
        /// Unix seconds; the system clock when omitted.
        #[arg(long)]
        now: Option<u64>,
    },
    /// Check an attestation; exits 1 unless it is valid.
    Verify {
        #[arg(long, value_name = "PATH")]
        attestation: PathBuf,
        /// Hex public key of the issuer.
        #[arg(long, required_unless_present = "key")]
        public_key: Option<String>,
        /// Derive the public key from this seed file instead.
        #[arg(long, value_name = "PATH")]
        key: Option<PathBuf>,
        #[arg(long)]
        now: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Status {
    Eai,
    NonEai,
}

#[derive(Debug, Subcommand)]
pub enum LedgerCommand {
    /// Replay a `op,from,to,amount[,suppress_flag]` script and dump the final state.
    Simulate {
        #[arg(long, value_name = "PATH")]
        script: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OpArg {
    IsEai,
    Transfer,
    Add,
}

#[derive(Debug, Subcommand)]
pub enum GasCommand {
    Estimate {
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long, value_enum)]
        op: OpArg,
        /// Registry size (Merkle only).
        #[arg(long)]
        n: Option<u64>,
        /// Addresses added (with `--op add`).
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, value_name = "PATH")]
        params: Option<PathBuf>,
    },
    /// Cost comparison across the three registry strategies.
    Table {
        /// Merkle registry sizes.
        #[arg(long, value_delimiter = ',', default_values_t = [500u64, 30_000, 2_250_000])]
        sizes: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        add_count: u64,
        #[arg(long, value_name = "PATH")]
        params: Option<PathBuf>,
    },
    /// Refit the Merkle check constants from a `registry_size,gas` CSV.
    Fit {
        #[arg(long, value_name = "PATH")]
        samples: PathBuf,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}
