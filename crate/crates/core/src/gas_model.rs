//! Parametric gas and USD cost model for the three registry strategies.
//!
//! Merkle membership checks cost `base + per_hash · depth(n)`; the two constants are fitted
//! by least squares to measured `(registry size, gas)` samples. Transfers pay a per-method
//! base plus two membership checks (sender and receiver).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GasError {
    #[error("need at least two samples with distinct tree depths")]
    DegenerateFit,
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    #[error("invalid cost parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Onchain,
    Offchain,
    Merkle,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Onchain => "On-Chain",
            Method::Offchain => "Off-Chain",
            Method::Merkle => "Merkle",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = GasError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "onchain" => Ok(Method::Onchain),
            "offchain" => Ok(Method::Offchain),
            "merkle" => Ok(Method::Merkle),
            other => Err(GasError::UnsupportedCombination(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operation {
    IsEai,
    Transfer,
    AddAddresses(u64),
}

/// A measured row of the reference cost comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasuredRow {
    pub method: Method,
    pub registry_size: Option<u64>,
    pub is_eai_gas: u64,
    pub transfer_gas: u64,
}

/// Measured gas per method at 2,400 USD/ETH and 20 gwei.
pub const MEASURED: [MeasuredRow; 5] = [
    MeasuredRow { method: Method::Onchain, registry_size: None, is_eai_gas: 612, transfer_gas: 56_033 },
    MeasuredRow { method: Method::Offchain, registry_size: None, is_eai_gas: 6_757, transfer_gas: 65_112 },
    MeasuredRow { method: Method::Merkle, registry_size: Some(500), is_eai_gas: 6_283, transfer_gas: 70_273 },
    MeasuredRow { method: Method::Merkle, registry_size: Some(30_000), is_eai_gas: 8_214, transfer_gas: 79_393 },
    MeasuredRow { method: Method::Merkle, registry_size: Some(2_250_000), is_eai_gas: 10_135, transfer_gas: 88_475 },
];

pub const MEASURED_MERKLE_UPDATE_GAS: u64 = 26_785;
pub const MEASURED_ONCHAIN_ADD_USD_PER_ADDRESS: f64 = 2.30;
pub const REFERENCE_ETH_PRICE_USD: f64 = 2_400.0;
pub const REFERENCE_GAS_PRICE_GWEI: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseTransferGas {
    pub onchain: u64,
    pub offchain: u64,
    pub merkle: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub onchain_check_gas: u64,
    pub offchain_check_gas: u64,
    pub merkle_base_gas: f64,
    pub merkle_per_hash_gas: f64,
    pub base_transfer_gas: BaseTransferGas,
    pub registry_add_per_address_gas: u64,
    pub merkle_update_gas: u64,
    pub eth_price_usd: f64,
    pub gas_price_gwei: f64,
}

/// Gas needed to spend `usd` at the given prices, rounded to the nearest unit.
pub fn usd_to_gas(usd: f64, eth_price_usd: f64, gas_price_gwei: f64) -> u64 {
    (usd / (gas_price_gwei * 1e-9 * eth_price_usd)).round() as u64
}

impl CostParams {
    /// Constants calibrated against [`MEASURED`].
    pub fn calibrated() -> Self {
        let samples: Vec<(u64, u64)> =
            MEASURED.iter().filter_map(|r| r.registry_size.map(|n| (n, r.is_eai_gas))).collect();
        let fit = fit_merkle_params(&samples).expect("reference samples have distinct depths");
        let check = |m: Method| MEASURED.iter().find(|r| r.method == m).expect("row").is_eai_gas;
        let base_for = |m: Method| {
            let r = MEASURED.iter().find(|r| r.method == m).expect("row");
            r.transfer_gas - 2 * r.is_eai_gas
        };
        let merkle_rows: Vec<&MeasuredRow> = MEASURED.iter().filter(|r| r.method == Method::Merkle).collect();
        let merkle_base = merkle_rows
            .iter()
            .map(|r| r.transfer_gas as f64 - 2.0 * fit.predict(merkle_depth(r.registry_size.unwrap_or(1))))
            .sum::<f64>()
            / merkle_rows.len() as f64;
        CostParams {
            onchain_check_gas: check(Method::Onchain),
            offchain_check_gas: check(Method::Offchain),
            merkle_base_gas: fit.base,
            merkle_per_hash_gas: fit.per_hash,
            base_transfer_gas: BaseTransferGas {
                onchain: base_for(Method::Onchain),
                offchain: base_for(Method::Offchain),
                merkle: merkle_base.round() as u64,
            },
            registry_add_per_address_gas: usd_to_gas(
                MEASURED_ONCHAIN_ADD_USD_PER_ADDRESS,
                REFERENCE_ETH_PRICE_USD,
                REFERENCE_GAS_PRICE_GWEI,
            ),
            merkle_update_gas: MEASURED_MERKLE_UPDATE_GAS,
            eth_price_usd: REFERENCE_ETH_PRICE_USD,
            gas_price_gwei: REFERENCE_GAS_PRICE_GWEI,
        }
    }

    pub fn validate(&self) -> Result<(), GasError> {
        let floats = [
            ("merkle_base_gas", self.merkle_base_gas),
            ("merkle_per_hash_gas", self.merkle_per_hash_gas),
            ("eth_price_usd", self.eth_price_usd),
            ("gas_price_gwei", self.gas_price_gwei),
        ];
        for (name, v) in floats {
            if !v.is_finite() || v < 0.0 {
                return Err(GasError::InvalidParams(format!("{name} must be a non-negative number")));
            }
        }
        Ok(())
    }

    pub fn to_usd(&self, gas: u64) -> f64 {
        gas as f64 * self.gas_price_gwei * 1e-9 * self.eth_price_usd
    }

    fn estimate_of(&self, gas: u64) -> CostEstimate {
        CostEstimate { gas, usd: self.to_usd(gas) }
    }
}

impl Default for CostParams {
    fn default() -> Self {
        Self::calibrated()
    }
}

/// Partial parameters as read from a JSON file; missing fields keep calibrated defaults.
/// `registry_add_per_address_usd` converts to gas at the file's prices when the gas
/// figure itself is absent.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParamsFile {
    pub onchain_check_gas: Option<u64>,
    pub offchain_check_gas: Option<u64>,
    pub merkle_base_gas: Option<f64>,
    pub merkle_per_hash_gas: Option<f64>,
    pub base_transfer_gas: Option<BaseTransferGas>,
    pub registry_add_per_address_gas: Option<u64>,
    pub registry_add_per_address_usd: Option<f64>,
    pub merkle_update_gas: Option<u64>,
    pub eth_price_usd: Option<f64>,
    pub gas_price_gwei: Option<f64>,
}

impl CostParamsFile {
    pub fn resolve(self) -> Result<CostParams, GasError> {
        let d = CostParams::calibrated();
        let eth = self.eth_price_usd.unwrap_or(d.eth_price_usd);
        let gwei = self.gas_price_gwei.unwrap_or(d.gas_price_gwei);
        let add = match (self.registry_add_per_address_gas, self.registry_add_per_address_usd) {
            (Some(g), _) => g,
            (None, Some(usd)) => usd_to_gas(usd, eth, gwei),
            (None, None) => d.registry_add_per_address_gas,
        };
        let p = CostParams {
            onchain_check_gas: self.onchain_check_gas.unwrap_or(d.onchain_check_gas),
            offchain_check_gas: self.offchain_check_gas.unwrap_or(d.offchain_check_gas),
            merkle_base_gas: self.merkle_base_gas.unwrap_or(d.merkle_base_gas),
            merkle_per_hash_gas: self.merkle_per_hash_gas.unwrap_or(d.merkle_per_hash_gas),
            base_transfer_gas: self.base_transfer_gas.unwrap_or(d.base_transfer_gas),
            registry_add_per_address_gas: add,
            merkle_update_gas: self.merkle_update_gas.unwrap_or(d.merkle_update_gas),
            eth_price_usd: eth,
            gas_price_gwei: gwei,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub gas: u64,
    pub usd: f64,
}

impl CostEstimate {
    pub fn usd_display(&self) -> String {
        format!("${:.2}", self.usd)
    }
}

/// `ceil(log2 n)` for `n ≥ 2`, else 0.
pub fn merkle_depth(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        u64::BITS - (n - 1).leading_zeros()
    }
}

pub fn estimate(method: Method, op: Operation, n: Option<u64>, params: &CostParams) -> Result<CostEstimate, GasError> {
    let check_gas = |p: &CostParams| -> Result<u64, GasError> {
        Ok(match method {
            Method::Onchain => p.onchain_check_gas,
            Method::Offchain => p.offchain_check_gas,
            Method::Merkle => {
                let n = n.filter(|&n| n >= 1).ok_or_else(|| {
                    GasError::UnsupportedCombination("merkle estimates need a registry size n ≥ 1".into())
                })?;
                (p.merkle_base_gas + p.merkle_per_hash_gas * f64::from(merkle_depth(n))).round() as u64
            }
        })
    };
    let gas = match op {
        Operation::IsEai => check_gas(params)?,
        Operation::Transfer => {
            let base = match method {
                Method::Onchain => params.base_transfer_gas.onchain,
                Method::Offchain => params.base_transfer_gas.offchain,
                Method::Merkle => params.base_transfer_gas.merkle,
            };
            base + 2 * check_gas(params)?
        }
        Operation::AddAddresses(k) => match method {
            Method::Onchain => k.checked_mul(params.registry_add_per_address_gas).ok_or_else(|| {
                GasError::UnsupportedCombination(format!("adding {k} addresses overflows the gas counter"))
            })?,
            Method::Merkle => params.merkle_update_gas,
            Method::Offchain => 0,
        },
    };
    Ok(params.estimate_of(gas))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MerkleFit {
    pub base: f64,
    pub per_hash: f64,
    /// Root-mean-square residual over the samples, in gas.
    pub rms_residual: f64,
}

impl MerkleFit {
    pub fn predict(&self, depth: u32) -> f64 {
        self.base + self.per_hash * f64::from(depth)
    }
}

/// Least-squares line `gas ≈ base + per_hash · depth(n)` over `(n, gas)` samples.
pub fn fit_merkle_params(samples: &[(u64, u64)]) -> Result<MerkleFit, GasError> {
    if samples.len() < 2 {
        return Err(GasError::DegenerateFit);
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(n, g)| (f64::from(merkle_depth(n)), g as f64)).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(GasError::DegenerateFit);
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let per_hash = sxy / sxx;
    let base = my - per_hash * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - (base + per_hash * p.0)).powi(2)).sum();
    Ok(MerkleFit { base, per_hash, rms_residual: (rss / k).sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub registry_size: Option<u64>,
    pub method: Method,
    pub is_eai: CostEstimate,
    pub transfer: CostEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AddCostRow {
    pub method: Method,
    pub addresses: u64,
    pub cost: CostEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub add_costs: Vec<AddCostRow>,
    pub eth_price_usd: f64,
    pub gas_price_gwei: f64,
}

/// Per-check and per-transfer costs for each method, Merkle at every size in `merkle_sizes`,
/// followed by the cost of adding `add_count` addresses.
pub fn comparison_table(
    params: &CostParams,
    merkle_sizes: &[u64],
    add_count: u64,
) -> Result<ComparisonTable, GasError> {
    let mut rows = Vec::new();
    for method in [Method::Onchain, Method::Offchain] {
        rows.push(ComparisonRow {
            registry_size: None,
            method,
            is_eai: estimate(method, Operation::IsEai, None, params)?,
            transfer: estimate(method, Operation::Transfer, None, params)?,
        });
    }
    for &n in merkle_sizes {
        rows.push(ComparisonRow {
            registry_size: Some(n),
            method: Method::Merkle,
            is_eai: estimate(Method::Merkle, Operation::IsEai, Some(n), params)?,
            transfer: estimate(Method::Merkle, Operation::Transfer, Some(n), params)?,
        });
    }
    let add_costs = [Method::Onchain, Method::Offchain, Method::Merkle]
        .into_iter()
        .map(|method| {
            Ok(AddCostRow {
                method,
                addresses: add_count,
                cost: estimate(method, Operation::AddAddresses(add_count), Some(1), params)?,
            })
        })
        .collect::<Result<_, GasError>>()?;
    Ok(ComparisonTable { rows, add_costs, eth_price_usd: params.eth_price_usd, gas_price_gwei: params.gas_price_gwei })
}

fn group_thousands(v: u64) -> String {
    let s = v.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

impl ComparisonTable {
    pub fn to_text(&self) -> String {
        let mut rows = vec![["Whitelist Size", "Method", "isEAI gas", "isEAI $", "transfer gas", "transfer $"]
            .map(String::from)
            .to_vec()];
        for r in &self.rows {
            rows.push(vec![
                r.registry_size.map_or("-".to_string(), group_thousands),
                r.method.label().to_string(),
                group_thousands(r.is_eai.gas),
                r.is_eai.usd_display(),
                group_thousands(r.transfer.gas),
                r.transfer.usd_display(),
            ]);
        }
        let mut out = crate::analytics::render_aligned(&rows);
        out.push('\n');
        let mut add_rows = vec![vec![
            "Method".to_string(),
            format!("gas to add {}", self.add_costs.first().map_or(0, |a| a.addresses)),
            "$".to_string(),
        ]];
        for a in &self.add_costs {
            add_rows.push(vec![a.method.label().to_string(), group_thousands(a.cost.gas), a.cost.usd_display()]);
        }
        out.push_str(&crate::analytics::render_aligned(&add_rows));
        out.push_str(&format!(
            "\nPrices: ${} per ETH, {} gwei. Transfers include two EAI checks (sender and receiver).\n",
            self.eth_price_usd, self.gas_price_gwei
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("registry_size,method,is_eai_gas,is_eai_usd,transfer_gas,transfer_usd\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{:.2},{},{:.2}\n",
                r.registry_size.map_or(String::new(), |n| n.to_string()),
                r.method.label(),
                r.is_eai.gas,
                r.is_eai.usd,
                r.transfer.gas,
                r.transfer.usd
            ));
        }
        s
    }
}
