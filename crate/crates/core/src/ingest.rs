//! Transfer records, address lists and their file formats.
//!
//! Transfers arrive as CSV (`ordering_key,from,to,amount_usd,token,direct`) or as JSON lines
//! with the same field names. Malformed rows are collected with their line numbers; in strict
//! mode the first one aborts the parse.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::amount::Usd;

pub const CSV_HEADER: [&str; 6] = ["ordering_key", "from", "to", "amount_usd", "token", "direct"];

/// A 20-byte account address. Text form is `0x` followed by 40 lowercase hex digits.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid address `{0}`: expected 0x followed by 40 hex digits")]
pub struct AddressParseError(pub String);

impl Address {
    pub const fn new(bytes: [u8; 20]) -> Self {
        Address(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }
}

impl FromStr for Address {
    type Err = AddressParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let body =
            t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).ok_or_else(|| AddressParseError(s.to_string()))?;
        let mut bytes = [0u8; 20];
        if body.len() != 40 {
            return Err(AddressParseError(s.to_string()));
        }
        hex::decode_to_slice(body, &mut bytes).map_err(|_| AddressParseError(s.to_string()))?;
        Ok(Address(bytes))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Short token tag such as `USDC`, stored inline (at most 15 bytes).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token {
    len: u8,
    bytes: [u8; 15],
}

impl Token {
    pub fn new(tag: &str) -> Option<Token> {
        let raw = tag.as_bytes();
        if raw.is_empty() || raw.len() > 15 || !tag.bytes().all(|b| b.is_ascii_graphic()) {
            return None;
        }
        let mut bytes = [0u8; 15];
        bytes[..raw.len()].copy_from_slice(raw);
        Some(Token { len: raw.len() as u8, bytes })
    }

    pub fn as_str(&self) -> &str {
        // Constructed only from ASCII.
        std::str::from_utf8(&self.bytes[..self.len as usize]).unwrap_or("")
    }
}

impl Default for Token {
    fn default() -> Self {
        Token::new("USDC").expect("valid tag")
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Token({})", self.as_str())
    }
}

impl Serialize for Token {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// One value transfer between two addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TransferRecord {
    pub ordering_key: u64,
    pub from: Address,
    pub to: Address,
    pub amount_usd: Usd,
    pub token: Token,
    /// True for a plain wallet-to-wallet call into the token contract.
    pub direct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(InputFormat::Csv),
            "jsonl" | "ndjson" => Ok(InputFormat::Jsonl),
            other => Err(format!("unknown input format `{other}` (expected csv or jsonl)")),
        }
    }
}

/// A bad data row, with its 1-based line number in the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct MalformedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Malformed(#[from] MalformedRow),
    #[error("bad CSV header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Records in input order plus the rows that failed to parse.
#[derive(Debug, Default, Clone)]
pub struct ParsedTransfers {
    pub records: Vec<TransferRecord>,
    pub errors: Vec<MalformedRow>,
}

impl ParsedTransfers {
    pub fn data_rows(&self) -> usize {
        self.records.len() + self.errors.len()
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(format!("invalid boolean `{other}`")),
    }
}

fn record_from_fields(
    ordering_key: &str,
    from: &str,
    to: &str,
    amount: &str,
    token: &str,
    direct: &str,
) -> Result<TransferRecord, String> {
    let ordering_key =
        ordering_key.trim().parse::<u64>().map_err(|_| format!("invalid ordering_key `{}`", ordering_key.trim()))?;
    let from = from.parse::<Address>().map_err(|e| format!("from: {e}"))?;
    let to = to.parse::<Address>().map_err(|e| format!("to: {e}"))?;
    let amount_usd = amount.parse::<Usd>().map_err(|e| format!("amount_usd: {e}"))?;
    let token = Token::new(token.trim()).ok_or_else(|| format!("invalid token tag `{token}`"))?;
    let direct = parse_bool(direct).map_err(|e| format!("direct: {e}"))?;
    Ok(TransferRecord { ordering_key, from, to, amount_usd, token, direct })
}

/// Parses transfer records. In strict mode the first malformed row is returned as an error.
pub fn parse_transfers<R: Read>(input: R, format: InputFormat, strict: bool) -> Result<ParsedTransfers, IngestError> {
    let mut out = ParsedTransfers::default();
    let mut push = |line: u64, row: Result<TransferRecord, String>| -> Result<(), IngestError> {
        match row {
            Ok(r) => out.records.push(r),
            Err(reason) => {
                let err = MalformedRow { line, reason };
                if strict {
                    return Err(err.into());
                }
                out.errors.push(err);
            }
        }
        Ok(())
    };
    match format {
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
            let header = reader.headers().map_err(csv_io_error)?.clone();
            if header.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
                return Err(IngestError::BadHeader {
                    expected: CSV_HEADER.join(","),
                    found: header.iter().collect::<Vec<_>>().join(","),
                });
            }
            for result in reader.records() {
                let (line, row) = match result {
                    Ok(rec) => {
                        let line = rec.position().map_or(0, |p| p.line());
                        let row = if rec.len() != CSV_HEADER.len() {
                            Err(format!("expected 6 fields, found {}", rec.len()))
                        } else {
                            record_from_fields(&rec[0], &rec[1], &rec[2], &rec[3], &rec[4], &rec[5])
                        };
                        (line, row)
                    }
                    Err(e) => match e.kind() {
                        csv::ErrorKind::Io(_) => return Err(csv_io_error(e)),
                        _ => (e.position().map_or(0, |p| p.line()), Err(e.to_string())),
                    },
                };
                push(line, row)?;
            }
        }
        InputFormat::Jsonl => {
            for (idx, line) in BufReader::new(input).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                push(idx as u64 + 1, parse_json_row(&line))?;
            }
        }
    }
    Ok(out)
}

fn csv_io_error(e: csv::Error) -> IngestError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{other:?}"))),
    }
}

#[derive(Deserialize)]
struct JsonRow {
    ordering_key: serde_json::Value,
    from: String,
    to: String,
    amount_usd: serde_json::Value,
    token: String,
    direct: serde_json::Value,
}

fn json_scalar(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_json_row(line: &str) -> Result<TransferRecord, String> {
    let row: JsonRow = serde_json::from_str(line).map_err(|e| e.to_string())?;
    record_from_fields(
        &json_scalar(&row.ordering_key),
        &row.from,
        &row.to,
        &json_scalar(&row.amount_usd),
        &row.token,
        &json_scalar(&row.direct),
    )
}

/// Writes records back out in the CSV transfer format.
pub fn write_transfers_csv<W: std::io::Write>(records: &[TransferRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", CSV_HEADER.join(","))?;
    for r in records {
        writeln!(out, "{},{},{},{},{},{}", r.ordering_key, r.from, r.to, r.amount_usd, r.token, r.direct)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ListRole {
    Exchange,
    Exploiter,
    Exclusion,
}

/// A canonicalized, deduplicated set of addresses with a role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressList {
    pub role: ListRole,
    pub members: BTreeSet<Address>,
}

impl AddressList {
    pub fn new(role: ListRole) -> Self {
        AddressList { role, members: BTreeSet::new() }
    }

    pub fn from_addresses(role: ListRole, addrs: impl IntoIterator<Item = Address>) -> Self {
        AddressList { role, members: addrs.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, addr: &Address) -> bool {
        self.members.contains(addr)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Address> {
        self.members.iter()
    }
}

/// One address per line; blank lines and lines starting with `#` are skipped.
pub fn parse_address_list<R: Read>(input: R, role: ListRole) -> Result<AddressList, IngestError> {
    let mut list = AddressList::new(role);
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let addr = t.parse::<Address>().map_err(|e| MalformedRow { line: idx as u64 + 1, reason: e.to_string() })?;
        list.members.insert(addr);
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const AA: &str = "0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa";
    const BB: &str = "0xbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbb";

    fn csv(rows: &[&str]) -> String {
        let mut s = CSV_HEADER.join(",");
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s.push('\n');
        s
    }

    #[test]
    fn single_row_maps_fields() {
        let input = csv(&[&format!("1,{AA},{BB},50.000000,USDC,true")]);
        let parsed = parse_transfers(input.as_bytes(), InputFormat::Csv, true).unwrap();
        assert_eq!(parsed.records.len(), 1);
        let r = parsed.records[0];
        assert_eq!(r.ordering_key, 1);
        assert_eq!(r.from.to_string(), AA);
        assert_eq!(r.to.to_string(), BB);
        assert_eq!(r.amount_usd, Usd::from_dollars(50));
        assert_eq!(r.token.as_str(), "USDC");
        assert!(r.direct);
    }

    #[test]
    fn negative_amount_is_malformed() {
        let input = csv(&[&format!("1,{AA},{BB},-3,USDC,true")]);
        let parsed = parse_transfers(input.as_bytes(), InputFormat::Csv, false).unwrap();
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].line, 2);
        assert!(parsed.errors[0].reason.contains("negative"));

        let err = parse_transfers(input.as_bytes(), InputFormat::Csv, true).unwrap_err();
        assert!(matches!(err, IngestError::Malformed(MalformedRow { line: 2, .. })));
    }

    #[test]
    fn errors_carry_line_numbers_and_do_not_stop_parsing() {
        let input = csv(&[
            &format!("1,{AA},{BB},1,USDC,true"),
            &format!("2,0xnothex,{BB},1,USDC,true"),
            &format!("3,{AA},{BB},1,USDC"),
            &format!("4,{AA},{BB},1,USDC,maybe"),
            &format!("5,{BB},{AA},2.5,USDT,false"),
        ]);
        let parsed = parse_transfers(input.as_bytes(), InputFormat::Csv, false).unwrap();
        assert_eq!(parsed.records.len(), 2);
        let lines: Vec<u64> = parsed.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![3, 4, 5]);
        assert_eq!(parsed.data_rows(), 5);
    }

    #[test]
    fn rejects_wrong_header() {
        let input = "a,b,c\n1,2,3\n";
        assert!(matches!(
            parse_transfers(input.as_bytes(), InputFormat::Csv, false),
            Err(IngestError::BadHeader { .. })
        ));
    }

    #[test]
    fn jsonl_rows() {
        let input = format!(
            "{{\"ordering_key\":7,\"from\":\"{AA}\",\"to\":\"{BB}\",\"amount_usd\":\"12.5\",\"token\":\"USDC\",\"direct\":true}}\n\
             \n\
             {{\"ordering_key\":8,\"from\":\"{BB}\",\"to\":\"{AA}\",\"amount_usd\":3,\"token\":\"USDT\",\"direct\":false}}\n\
             {{\"ordering_key\":9}}\n"
        );
        let parsed = parse_transfers(input.as_bytes(), InputFormat::Jsonl, false).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.records[0].amount_usd.micros(), 12_500_000);
        assert_eq!(parsed.records[1].amount_usd, Usd::from_dollars(3));
        assert!(!parsed.records[1].direct);
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].line, 4);
    }

    #[test]
    fn address_list_canonicalizes_and_dedups() {
        let input = format!("0xAAAAaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa\n{AA}\n\n# comment\n");
        let list = parse_address_list(input.as_bytes(), ListRole::Exchange).unwrap();
        assert_eq!(list.len(), 1);
        assert!(list.contains(&AA.parse().unwrap()));
        assert_eq!(list.iter().next().unwrap().to_string(), AA);
    }

    #[test]
    fn address_list_rejects_non_hex_line() {
        let input = format!("{AA}\nhello\n");
        match parse_address_list(input.as_bytes(), ListRole::Exploiter) {
            Err(IngestError::Malformed(row)) => assert_eq!(row.line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn address_rejects_wrong_length() {
        assert!("0xabc".parse::<Address>().is_err());
        assert!("aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa".parse::<Address>().is_err());
    }

    proptest! {
        #[test]
        fn address_round_trips(bytes in prop::array::uniform20(any::<u8>())) {
            let a = Address(bytes);
            prop_assert_eq!(a.to_string().parse::<Address>().unwrap(), a);
        }

        #[test]
        fn non_strict_accounts_for_every_row(rows in prop::collection::vec((any::<u32>(), any::<bool>()), 0..40)) {
            let mut lines = Vec::new();
            let mut good = 0usize;
            for (i, (amount, ok)) in rows.iter().enumerate() {
                if *ok {
                    good += 1;
                    lines.push(format!("{i},{AA},{BB},{amount}.5,USDC,true"));
                } else {
                    lines.push(format!("{i},{AA},{BB},-{amount},USDC,true"));
                }
            }
            let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
            let input = csv(&refs);
            let parsed = parse_transfers(input.as_bytes(), InputFormat::Csv, false).unwrap();
            prop_assert_eq!(parsed.records.len(), good);
            prop_assert_eq!(parsed.data_rows(), rows.len());
        }
    }
}
