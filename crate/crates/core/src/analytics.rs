//! Balance replay, distance tables and exploiter reports.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::amount::{Usd, MICROS_PER_USD};
use crate::ingest::{Address, AddressList, TransferRecord};
use crate::proximity::{Distance, DistanceMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("bucket {index} `{bucket}` overlaps or is out of order")]
    BucketOverlap { index: usize, bucket: String },
    #[error("no population to compute {0} over")]
    EmptyPopulation(&'static str),
    #[error("invalid bucket boundaries: {0}")]
    InvalidBoundaries(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BalanceEntry {
    pub max_lifetime_balance: Usd,
    pub final_balance: Usd,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BalanceSummary {
    pub balances: BTreeMap<Address, BalanceEntry>,
    /// Debits that exceeded the replayed balance and were clamped to zero.
    pub underflow_warnings: u64,
}

impl BalanceSummary {
    pub fn get(&self, addr: &Address) -> Option<&BalanceEntry> {
        self.balances.get(addr)
    }
}

/// Streaming balance replay. Feed records in ledger order.
#[derive(Debug, Clone, Default)]
pub struct BalanceReplay {
    summary: BalanceSummary,
}

impl BalanceReplay {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn apply(&mut self, r: &TransferRecord) {
        if r.from == r.to {
            self.summary.balances.entry(r.from).or_default();
            return;
        }
        let sender = self.summary.balances.entry(r.from).or_default();
        match sender.final_balance.checked_sub(r.amount_usd) {
            Some(b) => sender.final_balance = b,
            None => {
                sender.final_balance = Usd::ZERO;
                self.summary.underflow_warnings += 1;
            }
        }
        let receiver = self.summary.balances.entry(r.to).or_default();
        receiver.final_balance = receiver.final_balance + r.amount_usd;
        receiver.max_lifetime_balance = receiver.max_lifetime_balance.max(receiver.final_balance);
    }

    pub fn finish(self) -> BalanceSummary {
        self.summary
    }
}

/// Replays `records` in `ordering_key` order (ties keep input order), clamping underflows at zero.
pub fn max_lifetime_balances(records: &[TransferRecord]) -> BalanceSummary {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| records[i].ordering_key);
    let mut replay = BalanceReplay::new();
    for i in order {
        replay.apply(&records[i]);
    }
    replay.finish()
}

/// Half-open `[lo, hi)` USD interval; `hi = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bucket {
    pub lo: Usd,
    pub hi: Option<Usd>,
}

impl Bucket {
    pub fn contains(&self, amount: Usd) -> bool {
        amount >= self.lo && self.hi.is_none_or(|hi| amount < hi)
    }

    pub fn label(&self) -> String {
        match self.hi {
            Some(hi) => format!("{}-{}", compact_usd(self.lo), compact_usd(hi)),
            None => format!("{}+", compact_usd(self.lo)),
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `1000 → 1k`, `10000000 → 10m`; amounts that are not whole dollars print in full.
fn compact_usd(v: Usd) -> String {
    let micros = v.micros();
    if !micros.is_multiple_of(MICROS_PER_USD) {
        return v.to_string();
    }
    let dollars = micros / MICROS_PER_USD;
    for (div, suffix) in [(1_000_000_000, "b"), (1_000_000, "m"), (1_000, "k")] {
        if dollars >= div && dollars.is_multiple_of(div) {
            return format!("{}{suffix}", dollars / div);
        }
    }
    dollars.to_string()
}

/// Ordered, disjoint row buckets.
fn parse_bound(part: &str) -> Result<Usd, AnalyticsError> {
    let t = part.trim();
    let (num, scale) = match t.char_indices().last() {
        Some((i, 'k' | 'K')) => (&t[..i], 1_000),
        Some((i, 'm' | 'M')) => (&t[..i], 1_000_000),
        Some((i, 'b' | 'B')) => (&t[..i], 1_000_000_000),
        _ => (t, 1),
    };
    let base = num.parse::<Usd>().map_err(|e| AnalyticsError::InvalidBoundaries(format!("`{t}`: {e}")))?;
    base.micros()
        .checked_mul(scale)
        .map(Usd::from_micros)
        .ok_or_else(|| AnalyticsError::InvalidBoundaries(format!("`{t}` overflows")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Buckets(Vec<Bucket>);

impl Buckets {
    pub fn new(buckets: Vec<Bucket>) -> Result<Self, AnalyticsError> {
        for (i, b) in buckets.iter().enumerate() {
            let empty = b.hi.is_some_and(|hi| hi <= b.lo);
            let overlaps_prev = i > 0 && buckets[i - 1].hi.is_none_or(|prev_hi| prev_hi > b.lo);
            if empty || overlaps_prev {
                return Err(AnalyticsError::BucketOverlap { index: i, bucket: b.label() });
            }
        }
        Ok(Buckets(buckets))
    }

    /// Contiguous buckets between ascending boundaries; the last one is open-ended.
    pub fn from_boundaries(bounds: &[Usd]) -> Result<Self, AnalyticsError> {
        if bounds.is_empty() {
            return Err(AnalyticsError::InvalidBoundaries("at least one boundary is required".into()));
        }
        let buckets = bounds.iter().enumerate().map(|(i, &lo)| Bucket { lo, hi: bounds.get(i + 1).copied() }).collect();
        Buckets::new(buckets)
    }

    /// Parses comma-separated dollar boundaries such as `10,1000,100000,10000000`.
    /// Comma-separated lower bounds; `k`, `m` and `b` suffixes scale by 10^3, 10^6, 10^9.
    pub fn parse_boundaries(s: &str) -> Result<Self, AnalyticsError> {
        let bounds = s.split(',').map(parse_bound).collect::<Result<Vec<_>, _>>()?;
        Buckets::from_boundaries(&bounds)
    }

    /// `[10, 1k) [1k, 100k) [100k, 10m) [10m, ∞)` for lifetime balances.
    pub fn wallet_default() -> Self {
        Buckets::from_boundaries(&[
            Usd::from_dollars(10),
            Usd::from_dollars(1_000),
            Usd::from_dollars(100_000),
            Usd::from_dollars(10_000_000),
        ])
        .expect("ascending")
    }

    /// `[10, 2k) [2k, 100k) [100k, 10m) [10m, ∞)` for transfer amounts.
    pub fn txn_default() -> Self {
        Buckets::from_boundaries(&[
            Usd::from_dollars(10),
            Usd::from_dollars(2_000),
            Usd::from_dollars(100_000),
            Usd::from_dollars(10_000_000),
        ])
        .expect("ascending")
    }

    pub fn locate(&self, amount: Usd) -> Option<usize> {
        // Buckets are ordered and disjoint, so the candidate is the last one starting at or below.
        let idx = self.0.partition_point(|b| b.lo <= amount).checked_sub(1)?;
        self.0[idx].contains(amount).then_some(idx)
    }

    pub fn as_slice(&self) -> &[Bucket] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Count,
    Volume,
}

/// Rows are buckets; columns are distances `0..=max_hops` then `{max_hops}+`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    pub kind: CellKind,
    pub max_hops: u8,
    pub buckets: Buckets,
    /// Counts, or micro-USD sums for [`CellKind::Volume`].
    pub cells: Vec<Vec<u64>>,
}

impl DistanceTable {
    fn empty(kind: CellKind, max_hops: u8, buckets: Buckets) -> Self {
        let cells = vec![vec![0u64; max_hops as usize + 2]; buckets.len()];
        DistanceTable { kind, max_hops, buckets, cells }
    }

    fn column(&self, d: Distance) -> usize {
        match d {
            Distance::Hops(h) if h <= self.max_hops => h as usize,
            _ => self.max_hops as usize + 1,
        }
    }

    fn add(&mut self, row: usize, d: Distance, value: u64) {
        let col = self.column(d);
        self.cells[row][col] = self.cells[row][col].saturating_add(value);
    }

    pub fn column_labels(&self) -> Vec<String> {
        (0..=self.max_hops).map(|h| h.to_string()).chain(std::iter::once(format!("{}+", self.max_hops))).collect()
    }

    pub fn cell(&self, row: usize, col: usize) -> u64 {
        self.cells[row][col]
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.cells[row].iter().fold(0u64, |a, &c| a.saturating_add(c))
    }

    pub fn total(&self) -> u64 {
        (0..self.cells.len()).fold(0u64, |a, r| a.saturating_add(self.row_total(r)))
    }

    fn format_cell(&self, v: u64) -> String {
        match self.kind {
            CellKind::Count => v.to_string(),
            CellKind::Volume => Usd::from_micros(v).to_string(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bucket");
        for c in self.column_labels() {
            s.push(',');
            s.push_str(&c);
        }
        s.push('\n');
        for (b, row) in self.buckets.as_slice().iter().zip(&self.cells) {
            s.push_str(&b.label());
            for &v in row {
                s.push(',');
                s.push_str(&self.format_cell(v));
            }
            s.push('\n');
        }
        s
    }

    /// Right-aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<Vec<String>> =
            vec![std::iter::once("bucket".to_string()).chain(self.column_labels()).collect()];
        for (b, row) in self.buckets.as_slice().iter().zip(&self.cells) {
            rows.push(std::iter::once(b.label()).chain(row.iter().map(|&v| self.format_cell(v))).collect());
        }
        render_aligned(&rows)
    }
}

pub fn render_aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

impl Serialize for DistanceTable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Row {
            bucket: String,
            cells: Vec<serde_json::Value>,
        }
        #[derive(Serialize)]
        struct Repr {
            kind: CellKind,
            columns: Vec<String>,
            rows: Vec<Row>,
        }
        let rows = self
            .buckets
            .as_slice()
            .iter()
            .zip(&self.cells)
            .map(|(b, row)| Row {
                bucket: b.label(),
                cells: row
                    .iter()
                    .map(|&v| match self.kind {
                        CellKind::Count => serde_json::Value::from(v),
                        CellKind::Volume => serde_json::Value::from(Usd::from_micros(v).to_string()),
                    })
                    .collect(),
            })
            .collect();
        Repr { kind: self.kind, columns: self.column_labels(), rows }.serialize(s)
    }
}

/// Counts each wallet once, in the bucket of its max lifetime balance and the column of its
/// distance. Wallets outside every bucket are left out. Wallets absent from the graph are Beyond.
pub fn wallet_distance_table(dm: &DistanceMap<'_>, balances: &BalanceSummary, buckets: &Buckets) -> DistanceTable {
    let mut t = DistanceTable::empty(CellKind::Count, dm.max_hops(), buckets.clone());
    for (addr, entry) in &balances.balances {
        if let Some(row) = buckets.locate(entry.max_lifetime_balance) {
            t.add(row, dm.distance_or_beyond(addr), 1);
        }
    }
    t
}

/// Places each transfer by amount bucket and transaction distance `min(d(s), d(r))`.
/// Transfers outside every bucket are left out. Callers choose which records to include
/// (typically direct transfers only).
pub fn txn_distance_table(
    dm: &DistanceMap<'_>,
    records: &[TransferRecord],
    buckets: &Buckets,
    kind: CellKind,
) -> DistanceTable {
    let mut t = DistanceTable::empty(kind, dm.max_hops(), buckets.clone());
    for r in records {
        if let Some(row) = buckets.locate(r.amount_usd) {
            let d = dm.distance_or_beyond(&r.from).min(dm.distance_or_beyond(&r.to));
            let value = match kind {
                CellKind::Count => 1,
                CellKind::Volume => r.amount_usd.micros(),
            };
            t.add(row, d, value);
        }
    }
    t
}

/// A percentage held in tenths of a percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Percent(u64);

impl Percent {
    /// `100 · num / den` rounded half-up to one decimal place.
    pub fn from_ratio(num: u64, den: u64) -> Option<Percent> {
        if den == 0 {
            return None;
        }
        let (num, den) = (u128::from(num), u128::from(den));
        Some(Percent(((num * 2000 + den) / (2 * den)) as u64))
    }

    pub fn tenths(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SummaryThresholds {
    /// Wallet population: max lifetime balance at or above this.
    pub wallet_min: Usd,
    /// Transaction population: amount at or above this.
    pub txn_min: Usd,
}

impl Default for SummaryThresholds {
    fn default() -> Self {
        SummaryThresholds { wallet_min: Usd::from_dollars(10_000), txn_min: Usd::from_dollars(2_000) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryStats {
    pub wallet_population: u64,
    pub eai_wallets: u64,
    pub within_one_hop_wallets: u64,
    pub pct_eai: Percent,
    pub pct_within_one_hop_of_eai: Percent,
    pub txn_population: u64,
    pub eai_txns: u64,
    /// `None` when no transfer reaches the transaction threshold.
    pub pct_txn_eai: Option<Percent>,
}

pub fn summary_stats(
    dm: &DistanceMap<'_>,
    balances: &BalanceSummary,
    records: &[TransferRecord],
    thresholds: SummaryThresholds,
) -> Result<SummaryStats, AnalyticsError> {
    let (mut population, mut eai, mut near) = (0u64, 0u64, 0u64);
    for (addr, entry) in &balances.balances {
        if entry.max_lifetime_balance < thresholds.wallet_min {
            continue;
        }
        population += 1;
        let d = dm.distance_or_beyond(addr);
        eai += u64::from(d.is_eai());
        near += u64::from(d <= Distance::Hops(2));
    }
    if population == 0 {
        return Err(AnalyticsError::EmptyPopulation("wallet percentages"));
    }
    let (mut txns, mut eai_txns) = (0u64, 0u64);
    for r in records.iter().filter(|r| r.amount_usd >= thresholds.txn_min) {
        txns += 1;
        eai_txns += u64::from(dm.distance_or_beyond(&r.from).is_eai() || dm.distance_or_beyond(&r.to).is_eai());
    }
    Ok(SummaryStats {
        wallet_population: population,
        eai_wallets: eai,
        within_one_hop_wallets: near,
        pct_eai: Percent::from_ratio(eai, population).expect("nonzero"),
        pct_within_one_hop_of_eai: Percent::from_ratio(near, population).expect("nonzero"),
        txn_population: txns,
        eai_txns,
        pct_txn_eai: Percent::from_ratio(eai_txns, txns),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExploiterReport {
    pub max_hops: u8,
    pub columns: Vec<String>,
    /// Exploiters per distance column; addresses missing from the graph land in the last one.
    pub histogram: Vec<u64>,
    pub total: u64,
    pub not_found: u64,
    pub non_eai: u64,
    pub beyond: u64,
    pub pct_non_eai: Percent,
    pub pct_beyond: Percent,
    /// Distance histogram over every node in the graph.
    pub baseline: Vec<u64>,
}

pub fn exploiter_report(dm: &DistanceMap<'_>, exploiters: &AddressList) -> Result<ExploiterReport, AnalyticsError> {
    if exploiters.is_empty() {
        return Err(AnalyticsError::EmptyPopulation("exploiter report"));
    }
    let max_hops = dm.max_hops();
    let mut histogram = vec![0u64; max_hops as usize + 2];
    let mut not_found = 0u64;
    for addr in exploiters.iter() {
        let d = match dm.distance(addr) {
            Ok(d) => d,
            Err(_) => {
                not_found += 1;
                Distance::Beyond
            }
        };
        let col = d.hops().map_or(max_hops as usize + 1, usize::from);
        histogram[col] += 1;
    }
    let total = exploiters.len() as u64;
    let beyond = histogram[max_hops as usize + 1];
    let non_eai = total - histogram[0] - histogram[1];
    Ok(ExploiterReport {
        max_hops,
        columns: (0..=max_hops).map(|h| h.to_string()).chain([format!("{max_hops}+")]).collect(),
        histogram,
        total,
        not_found,
        non_eai,
        beyond,
        pct_non_eai: Percent::from_ratio(non_eai, total).expect("nonzero"),
        pct_beyond: Percent::from_ratio(beyond, total).expect("nonzero"),
        baseline: dm.histogram(),
    })
}

impl ExploiterReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("population,");
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for (name, h) in [("exploiters", &self.histogram), ("all_nodes", &self.baseline)] {
            s.push_str(name);
            for v in h {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut rows = vec![std::iter::once("population".to_string()).chain(self.columns.iter().cloned()).collect()];
        for (name, h) in [("exploiters", &self.histogram), ("all_nodes", &self.baseline)] {
            rows.push(std::iter::once(name.to_string()).chain(h.iter().map(u64::to_string)).collect::<Vec<_>>());
        }
        let mut out = render_aligned(&rows);
        let _ = writeln!(
            out,
            "\nexploiters: {} ({} not in graph)\nnon-EAI: {}%\nbeyond {} hops: {}%",
            self.total, self.not_found, self.pct_non_eai, self.max_hops, self.pct_beyond
        );
        out
    }
}
