use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dissem::harness::{self, csv, Scenario, SweepConfig};
use dissem::metrics::RunResult;
use dissem::network::TABLE_ROWS;
use dissem::protocols::ProtocolKind;

/// Name of the environment variable that sets log verbosity.
const LOG_ENV: &str = "DISSEM_LOG";
const RESULTS_FILE: &str = "results.csv";

#[derive(Parser)]
#[command(name = "dissem", version, about = "Sensor-network data dissemination simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and print one CSV row per seed.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Run only this seed instead of the scenario's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the event trace here; needs a single seed.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run benchmark rows × protocols × seeds and write DIR/results.csv.
    Sweep {
        /// `all` or a comma list of node counts.
        #[arg(long, default_value = "all")]
        rows: String,
        /// Comma list of protocol names.
        #[arg(long, default_value = "fdddp,dddp,cbddp,eagddp")]
        protocols: String,
        /// Seeds 1..=N.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the protocols in DIR/results.csv.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the placement of a benchmark row for a seed.
    DumpTopology {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scenario, seed, trace } => simulate(scenario, seed, trace),
        Command::Sweep { rows, protocols, seeds, out } => sweep(&rows, &protocols, seeds, out),
        Command::Report { input, out } => report(input, out),
        Command::DumpTopology { nodes, seed } => {
            let s = Scenario::for_row(ProtocolKind::Fdddp, nodes)?;
            print!("{}", s.topology(seed).dump());
            Ok(())
        }
    }
}

fn simulate(path: PathBuf, seed: Option<u64>, trace: Option<PathBuf>) -> Result<()> {
    let scenario = Scenario::load(&path)?;
    let seeds = seed.map_or_else(|| scenario.seeds.clone(), |s| vec![s]);
    if trace.is_some() && seeds.len() != 1 {
        bail!("--trace needs a single seed; pass --seed");
    }
    let mut results = Vec::new();
    for seed in seeds {
        let out = scenario
            .run(seed, Some(harness::scenario::DEFAULT_WALL_BUDGET), trace.is_some())
            .with_context(|| format!("{} seed {seed}", scenario.protocol.as_str()))?;
        if let (Some(path), Some(lines)) = (&trace, &out.trace) {
            let mut f = std::io::BufWriter::new(
                fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            for line in lines {
                writeln!(f, "{line}")?;
            }
            f.flush()?;
        }
        results.push(RunResult::from_ledger(
            scenario.protocol.as_str(),
            scenario.nodes,
            seed,
            &out.ledger,
            out.wall_time,
        ));
    }
    csv::write_results(std::io::stdout().lock(), &results)?;
    Ok(())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("bad {what} `{s}`: {e}")))
        .collect()
}

fn sweep(rows: &str, protocols: &str, seeds: u64, out: PathBuf) -> Result<()> {
    if seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let rows = if rows == "all" {
        TABLE_ROWS.iter().map(|r| r.nodes).collect()
    } else {
        parse_list(rows, "row")?
    };
    let cfg = SweepConfig {
        rows,
        protocols: parse_list(protocols, "protocol")?,
        seeds: (1..=seeds).collect(),
        ..Default::default()
    };
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let sweep = harness::run_sweep(&cfg)?;
    csv::write_file(out.join(RESULTS_FILE), &sweep.results)?;
    log::info!("wrote {} runs to {}", sweep.results.len(), out.display());
    for f in &sweep.failures {
        eprintln!("failed: {} nodes={} seed={}: {}", f.protocol, f.nodes, f.seed, f.reason);
    }
    if !sweep.is_complete() {
        bail!("{} of {} runs failed", sweep.failures.len(), sweep.failures.len() + sweep.results.len());
    }
    Ok(())
}

fn report(input: PathBuf, out: PathBuf) -> Result<()> {
    let file = if input.is_dir() { input.join(RESULTS_FILE) } else { input };
    let results = csv::read_file(&file)?;
    let text = harness::render_report(&results)?;
    fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
