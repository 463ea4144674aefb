mod args;
mod config;
mod error;
mod inputs;
mod output;
mod pipeline;
mod registry;
mod sim;

use clap::Parser;

use args::{Cli, Command, GraphCommand, LedgerCommand};
use config::RunConfig;
use error::CliResult;
use registry::Verdict;

fn run(cli: Cli) -> CliResult<Verdict> {
    let mut cfg = RunConfig::new(&cli.global)?;
    // A global pool already exists only if something initialised it first; ignoring that is fine.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    let out = cli.global.out.as_deref();
    match &cli.command {
        Command::Graph(GraphCommand::Build(a)) => pipeline::graph_build(cfg, a, out)?,
        Command::Distances(a) => {
            cfg.apply_proximity(&a.proximity)?;
            pipeline::distances(cfg, out)?
        }
        Command::Report(r) => pipeline::report(cfg, r, out)?,
        Command::Stats(a) => pipeline::stats(cfg, a, out)?,
        Command::Merkle(m) => return registry::merkle(&cfg, m, out),
        Command::Attest(a) => return registry::attest(&cfg, a, out),
        Command::Ledger(LedgerCommand::Simulate { script }) => sim::ledger_simulate(&cfg, script, out)?,
        Command::Gas(g) => sim::gas(&cfg, g, out)?,
    }
    Ok(Verdict::Holds)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(Verdict::Holds) => 0,
        Ok(Verdict::Fails) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
