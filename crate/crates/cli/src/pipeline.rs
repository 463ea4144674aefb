use eai_core::analytics::{
    exploiter_report, max_lifetime_balances, render_aligned, summary_stats, txn_distance_table, wallet_distance_table,
    AnalyticsError, Buckets, CellKind, SummaryThresholds,
};
use eai_core::graph::IdWidth;
use eai_core::ingest::ListRole;
use eai_core::TransferRecord;
use serde_json::json;

use crate::args::{CellKindArg, Format, GraphBuildArgs, ReportCommand, StatsArgs};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::inputs::{self, require, Inputs};
use crate::output::{emit, json_report};

pub fn graph_build(mut cfg: RunConfig, args: &GraphBuildArgs, out: Option<&std::path::Path>) -> CliResult<()> {
    cfg.apply_transfers(&args.transfers);
    let out = out.ok_or_else(|| CliError::invalid("graph build requires --out <cache path>"))?;
    let mut inputs = Inputs::default();
    let records = inputs.transfers(&cfg)?;
    let width = if args.wide_ids { IdWidth::U64 } else { IdWidth::U32 };
    let g = inputs::build(&records, &cfg, width)?;
    let file = std::fs::File::create(out).map_err(|e| CliError::io(out, e))?;
    g.write_cache(std::io::BufWriter::new(file)).map_err(|e| CliError::graph(out, e))?;
    let stats = g.stats();
    let summary = match cfg.format_or(Format::Text) {
        Format::Json => json_report("graph", inputs.digests(), &cfg, stats)?,
        Format::Csv => format!(
            "node_count,edge_count,total_volume_usd\n{},{},{}\n",
            stats.node_count, stats.edge_count, stats.total_volume_usd
        )
        .into_bytes(),
        Format::Text => format!(
            "wrote {}: {} nodes, {} edges, {} USD aggregated\n",
            out.display(),
            stats.node_count,
            stats.edge_count,
            stats.total_volume_usd
        )
        .into_bytes(),
    };
    emit(None, &summary)
}

pub fn distances(cfg: RunConfig, out: Option<&std::path::Path>) -> CliResult<()> {
    let mut inputs = Inputs::default();
    let g = inputs::graph(&mut inputs, &cfg, None)?;
    let dm = inputs::distances(&mut inputs, &cfg, &g)?;
    let bytes = match cfg.format_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            dm.write_csv(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
            buf
        }
        Format::Json => {
            let rows: Vec<_> = dm.iter().map(|(a, d)| json!({ "address": a, "distance": d })).collect();
            json_report("distances", inputs.digests(), &cfg, json!({ "max_hops": dm.max_hops(), "distances": rows }))?
        }
        Format::Text => {
            let mut rows = vec![vec!["address".to_string(), "distance".to_string()]];
            rows.extend(dm.iter().map(|(a, d)| vec![a.to_string(), d.label(dm.max_hops())]));
            render_aligned(&rows).into_bytes()
        }
    };
    emit(out, &bytes)
}

pub fn report(mut cfg: RunConfig, cmd: &ReportCommand, out: Option<&std::path::Path>) -> CliResult<()> {
    let mut inputs = Inputs::default();
    let bytes = match cmd {
        ReportCommand::Wallets(a) => {
            cfg.apply_proximity(&a.proximity)?;
            if a.buckets.is_some() {
                cfg.wallet_buckets = a.buckets.clone();
            }
            let buckets = RunConfig::buckets(cfg.wallet_buckets.as_deref(), Buckets::wallet_default())?;
            let records = inputs.transfers(&cfg)?;
            let g = inputs::graph(&mut inputs, &cfg, Some(&records))?;
            let dm = inputs::distances(&mut inputs, &cfg, &g)?;
            let balances = max_lifetime_balances(&records);
            if balances.underflow_warnings > 0 {
                eprintln!(
                    "warning: {} transfer(s) exceeded the sender's replayed balance",
                    balances.underflow_warnings
                );
            }
            let table = wallet_distance_table(&dm, &balances, &buckets);
            match cfg.format_or(Format::Csv) {
                Format::Csv => table.to_csv().into_bytes(),
                Format::Text => table.to_text().into_bytes(),
                Format::Json => json_report("wallets", inputs.digests(), &cfg, &table)?,
            }
        }
        ReportCommand::Txns(a) => {
            cfg.apply_proximity(&a.proximity)?;
            if a.buckets.is_some() {
                cfg.txn_buckets = a.buckets.clone();
            }
            let buckets = RunConfig::buckets(cfg.txn_buckets.as_deref(), Buckets::txn_default())?;
            let records = inputs.transfers(&cfg)?;
            let g = inputs::graph(&mut inputs, &cfg, Some(&records))?;
            let dm = inputs::distances(&mut inputs, &cfg, &g)?;
            let counted: Vec<TransferRecord> =
                records.iter().copied().filter(|r| a.include_indirect || r.direct).collect();
            let kind = match a.kind {
                CellKindArg::Count => CellKind::Count,
                CellKindArg::Volume => CellKind::Volume,
            };
            let table = txn_distance_table(&dm, &counted, &buckets, kind);
            match cfg.format_or(Format::Csv) {
                Format::Csv => table.to_csv().into_bytes(),
                Format::Text => table.to_text().into_bytes(),
                Format::Json => json_report("txns", inputs.digests(), &cfg, &table)?,
            }
        }
        ReportCommand::Exploiters(a) => {
            cfg.apply_proximity(&a.proximity)?;
            if a.exploiters.is_some() {
                cfg.exploiters = a.exploiters.clone();
            }
            let g = inputs::graph(&mut inputs, &cfg, None)?;
            let dm = inputs::distances(&mut inputs, &cfg, &g)?;
            let path = require(&cfg.exploiters, "--exploiters")?;
            let list = inputs.list(path, ListRole::Exploiter)?;
            let report = exploiter_report(&dm, &list).map_err(|e| CliError::in_file(path, e))?;
            match cfg.format_or(Format::Csv) {
                Format::Csv => report.to_csv().into_bytes(),
                Format::Text => report.to_text().into_bytes(),
                Format::Json => json_report("exploiters", inputs.digests(), &cfg, &report)?,
            }
        }
    };
    emit(out, &bytes)
}

pub fn stats(mut cfg: RunConfig, args: &StatsArgs, out: Option<&std::path::Path>) -> CliResult<()> {
    cfg.apply_proximity(&args.proximity)?;
    if let Some(t) = args.wallet_threshold_usd {
        cfg.wallet_threshold_usd = t;
    }
    if let Some(t) = args.txn_threshold_usd {
        cfg.txn_threshold_usd = t;
    }
    let mut inputs = Inputs::default();
    let records = match &cfg.transfers {
        Some(_) => Some(inputs.transfers(&cfg)?),
        None => None,
    };
    let g = inputs::graph(&mut inputs, &cfg, records.as_deref())?;
    let graph_stats = g.stats();
    let mut histogram = None;
    let mut summary = None;
    if cfg.exchanges.is_some() {
        let dm = inputs::distances(&mut inputs, &cfg, &g)?;
        histogram = Some(dm.histogram());
        if let Some(records) = &records {
            let balances = max_lifetime_balances(records);
            let thresholds = SummaryThresholds { wallet_min: cfg.wallet_threshold_usd, txn_min: cfg.txn_threshold_usd };
            let direct: Vec<TransferRecord> = records.iter().copied().filter(|r| r.direct).collect();
            summary = match summary_stats(&dm, &balances, &direct, thresholds) {
                Ok(s) => Some(s),
                Err(AnalyticsError::EmptyPopulation(what)) => {
                    eprintln!("warning: no wallets reach the balance threshold; {what} omitted");
                    None
                }
                Err(e) => return Err(CliError::invalid(e.to_string())),
            };
        }
    }
    let max_hops = cfg.max_hops;
    let columns: Vec<String> = (0..=max_hops).map(|h| h.to_string()).chain([format!("{max_hops}+")]).collect();
    let bytes = match cfg.format_or(Format::Text) {
        Format::Json => json_report(
            "stats",
            inputs.digests(),
            &cfg,
            json!({
                "graph": graph_stats,
                "distance_columns": histogram.as_ref().map(|_| &columns),
                "distance_histogram": histogram,
                "summary": summary,
            }),
        )?,
        fmt => {
            let mut kv: Vec<(String, String)> = vec![
                ("node_count".into(), graph_stats.node_count.to_string()),
                ("edge_count".into(), graph_stats.edge_count.to_string()),
                ("total_volume_usd".into(), graph_stats.total_volume_usd.to_string()),
            ];
            if let Some(h) = &histogram {
                for (c, v) in columns.iter().zip(h) {
                    kv.push((format!("nodes_at_distance_{c}"), v.to_string()));
                }
            }
            if let Some(s) = &summary {
                kv.push(("wallet_population".into(), s.wallet_population.to_string()));
                kv.push(("eai_wallets".into(), s.eai_wallets.to_string()));
                kv.push(("pct_eai".into(), s.pct_eai.to_string()));
                kv.push(("within_one_hop_of_eai_wallets".into(), s.within_one_hop_wallets.to_string()));
                kv.push(("pct_within_one_hop_of_eai".into(), s.pct_within_one_hop_of_eai.to_string()));
                kv.push(("txn_population".into(), s.txn_population.to_string()));
                kv.push(("eai_txns".into(), s.eai_txns.to_string()));
                kv.push(("pct_txn_eai".into(), s.pct_txn_eai.map_or("n/a".into(), |p| p.to_string())));
            }
            if fmt == Format::Csv {
                let mut s = String::from("metric,value\n");
                for (k, v) in kv {
                    s.push_str(&format!("{k},{v}\n"));
                }
                s.into_bytes()
            } else {
                let rows: Vec<Vec<String>> = kv.into_iter().map(|(k, v)| vec![k, v]).collect();
                render_aligned(&rows).into_bytes()
            }
        }
    };
    emit(out, &bytes)
}
