use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Writes to `--out` when set, else stdout.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

/// RFC 3339 UTC; `SOURCE_DATE_EPOCH` pins it for reproducible output.
pub fn generated_at() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|t| chrono::DateTime::from_timestamp(t, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[derive(Serialize)]
struct Envelope<'a, P: Serialize, D: Serialize> {
    report: &'a str,
    generated_at: String,
    input_digests: &'a BTreeMap<String, String>,
    parameters: P,
    data: D,
}

pub fn json_report<P: Serialize, D: Serialize>(
    report: &str,
    digests: &BTreeMap<String, String>,
    parameters: P,
    data: D,
) -> CliResult<Vec<u8>> {
    let env = Envelope { report, generated_at: generated_at(), input_digests: digests, parameters, data };
    pretty(&env)
}

pub fn pretty<T: Serialize + ?Sized>(v: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| CliError::invalid(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}
