use std::path::Path;

use eai_core::gas_model::{
    comparison_table, estimate, fit_merkle_params, merkle_depth, CostParams, CostParamsFile, Operation,
};
use eai_core::ledger_sim::{parse_script, simulate};
use serde_json::json;

use crate::args::{Format, GasCommand, OpArg};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::inputs::Inputs;
use crate::output::{emit, json_report, pretty};

pub fn ledger_simulate(cfg: &RunConfig, script: &Path, out: Option<&Path>) -> CliResult<()> {
    let mut inputs = Inputs::default();
    let bytes = inputs.read(script)?;
    let ops = parse_script(&bytes[..]).map_err(|e| CliError::in_file(script, e))?;
    let ledger = simulate(&ops).map_err(|e| CliError::in_file(script, e))?;
    let state = ledger.state_dump();
    let body = match cfg.format_or(Format::Json) {
        Format::Json => pretty(&state)?,
        fmt => {
            let mut rows = vec![["address", "balance", "is_eai", "is_exchange"].map(String::from).to_vec()];
            for (a, s) in &state {
                rows.push(vec![a.to_string(), s.balance.clone(), s.is_eai.to_string(), s.is_exchange.to_string()]);
            }
            if fmt == Format::Csv {
                rows.iter().map(|r| r.join(",") + "\n").collect::<String>().into_bytes()
            } else {
                eai_core::analytics::render_aligned(&rows).into_bytes()
            }
        }
    };
    emit(out, &body)
}

fn load_params(inputs: &mut Inputs, path: Option<&Path>) -> CliResult<CostParams> {
    match path {
        None => Ok(CostParams::calibrated()),
        Some(p) => {
            let bytes = inputs.read(p)?;
            let file: CostParamsFile = serde_json::from_slice(&bytes).map_err(|e| CliError::in_file(p, e))?;
            file.resolve().map_err(|e| CliError::in_file(p, e))
        }
    }
}

pub fn gas(cfg: &RunConfig, cmd: &GasCommand, out: Option<&Path>) -> CliResult<()> {
    let mut inputs = Inputs::default();
    let body = match cmd {
        GasCommand::Estimate { method, op, n, count, params } => {
            let params = load_params(&mut inputs, params.as_deref().or(cfg.gas_params.as_deref()))?;
            let operation = match op {
                OpArg::IsEai => Operation::IsEai,
                OpArg::Transfer => Operation::Transfer,
                OpArg::Add => Operation::AddAddresses(*count),
            };
            let est = estimate(*method, operation, *n, &params).map_err(|e| CliError::invalid(e.to_string()))?;
            match cfg.format_or(Format::Text) {
                Format::Json => pretty(&json!({
                    "method": method,
                    "op": format!("{op:?}").to_lowercase(),
                    "registry_size": n,
                    "merkle_depth": n.map(merkle_depth),
                    "gas": est.gas,
                    "usd": est.usd,
                }))?,
                Format::Csv => format!("gas,usd\n{},{:.2}\n", est.gas, est.usd).into_bytes(),
                Format::Text => format!("{} gas ({})\n", est.gas, est.usd_display()).into_bytes(),
            }
        }
        GasCommand::Table { sizes, add_count, params } => {
            let params = load_params(&mut inputs, params.as_deref().or(cfg.gas_params.as_deref()))?;
            let table = comparison_table(&params, sizes, *add_count).map_err(|e| CliError::invalid(e.to_string()))?;
            match cfg.format_or(Format::Text) {
                Format::Text => table.to_text().into_bytes(),
                Format::Csv => table.to_csv().into_bytes(),
                Format::Json => json_report("gas_table", inputs.digests(), params, &table)?,
            }
        }
        GasCommand::Fit { samples } => {
            let bytes = inputs.read(samples)?;
            let pts = parse_samples(&bytes).map_err(|e| CliError::in_file(samples, e))?;
            let fit = fit_merkle_params(&pts).map_err(|e| CliError::in_file(samples, e))?;
            match cfg.format_or(Format::Json) {
                Format::Json => pretty(&json!({
                    "merkle_base_gas": fit.base,
                    "merkle_per_hash_gas": fit.per_hash,
                    "rms_residual_gas": fit.rms_residual,
                }))?,
                _ => format!(
                    "merkle_base_gas {:.3}\nmerkle_per_hash_gas {:.3}\nrms_residual_gas {:.3}\n",
                    fit.base, fit.per_hash, fit.rms_residual
                )
                .into_bytes(),
            }
        }
    };
    emit(out, &body)
}

/// `registry_size,gas` rows with a header.
fn parse_samples(bytes: &[u8]) -> Result<Vec<(u64, u64)>, String> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(["registry_size", "gas"]) {
        return Err("header must be `registry_size,gas`".into());
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| {
            rec.get(i).and_then(|v| v.parse::<u64>().ok()).ok_or(format!("line {line}: expected two integers"))
        };
        out.push((num(0)?, num(1)?));
    }
    Ok(out)
}
