//! `v1q`: validate programs, run and sweep experiments, replay stored runs
//! and poke at device tables.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use v1q_core::bmv2::{load_program, LoadError};
use v1q_core::netrunner::{
    compute_metrics, replay, run_cell, sweep, write_run, ExperimentConfig, NetError, Network,
    Programs, Simulation,
};
use v1q_core::runtime::TableEntry;

#[derive(Parser)]
#[command(
    name = "v1q",
    version,
    about = "P4-programmable quantum network simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load program documents and report diagnostics.
    Validate {
        #[arg(required = true)]
        programs: Vec<PathBuf>,
    },
    /// Simulate one seed and write its results under --out.
    Run {
        #[command(flatten)]
        exp: Experiment,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the config's sweep axes, resuming cells already under --out.
    Sweep {
        #[command(flatten)]
        exp: Experiment,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Re-run a stored run and compare hash and CSV.
    Replay {
        #[arg(long)]
        out: PathBuf,
    },
    /// Show, insert or delete table entries on a freshly configured device.
    Table(TableArgs),
    /// Print the event log of one run.
    Trace {
        #[command(flatten)]
        exp: Experiment,
    },
}

#[derive(Args)]
struct Experiment {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    node: u32,
    /// Limit output to one table; required with --action or --delete.
    #[arg(long)]
    table: Option<String>,
    /// Key field values, decimal or 0x-prefixed hex.
    #[arg(long = "key", value_parser = parse_num)]
    key: Vec<u64>,
    /// Insert an entry running this action.
    #[arg(long, conflicts_with = "delete")]
    action: Option<String>,
    #[arg(long = "param", value_parser = parse_num, requires = "action")]
    params: Vec<u64>,
    /// Delete the entry with --key.
    #[arg(long)]
    delete: bool,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Program {
        path: String,
        #[source]
        source: LoadError,
    },
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Program { .. } | CliError::Validation(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Config { .. } | NetError::InvalidTopology(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn parse_num(s: &str) -> Result<u64, String> {
    let r = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    r.map_err(|e| format!("`{s}`: {e}"))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn validate(programs: &[PathBuf]) -> Result<(), CliError> {
    let mut failed = 0;
    for p in programs {
        let res = fs::read_to_string(p)
            .map_err(|e| CliError::Validation(format!("reading {}: {e}", p.display())))
            .and_then(|text| {
                load_program(&text).map_err(|source| CliError::Program {
                    path: p.display().to_string(),
                    source,
                })
            });
        match res {
            Ok(prog) => {
                let tables: usize = prog.pipelines.iter().map(|pl| pl.tables.len()).sum();
                println!(
                    "{}: ok ({:?}, {} pipelines, {tables} tables, {} actions)",
                    p.display(),
                    prog.target,
                    prog.pipelines.len(),
                    prog.actions.len()
                );
            }
            Err(e) => {
                eprintln!("error: {e}");
                failed += 1;
            }
        }
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{failed} of {} programs failed to load",
            programs.len()
        )))
    }
}

fn run(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    let cfg = load_config(&exp.config)?;
    let seed = cfg.resolve_seed(exp.seed)?;
    let r = run_cell(&cfg, None, None, seed, false)?;
    write_run(out, &cfg, None, None, &r)?;
    let m = compute_metrics(&r.records, cfg.demand.window_ns());
    let done = r.records.iter().filter(|x| x.complete_ns.is_some()).count();
    println!(
        "seed {seed}: {} requests, {done} completed, throughput {:.2}/s, mean latency {:.6} s, trace {}",
        r.records.len(),
        m.throughput,
        m.mean_latency,
        r.trace_hash
    );
    if let Some(why) = &r.aborted {
        return Err(CliError::Runtime(format!("run aborted: {why}")));
    }
    if !r.audit.clean() {
        return Err(CliError::Runtime(format!(
            "delivery audit failed: {:?}",
            r.audit
        )));
    }
    Ok(())
}

fn run_sweep(exp: &Experiment, out: &Path, workers: usize) -> Result<(), CliError> {
    let cfg = load_config(&exp.config)?;
    let seed = cfg.resolve_seed(exp.seed)?;
    let rep = sweep(&cfg, seed, out, workers)?;
    println!(
        "{} cells: {} ran, {} resumed, {} failed; summary in {}",
        rep.rows.len() + rep.failures.len(),
        rep.ran,
        rep.resumed,
        rep.failures.len(),
        out.join("summary.csv").display()
    );
    for (cell, msg) in &rep.failures {
        eprintln!("error: cell {cell}: {msg}");
    }
    if rep.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "{} cells failed",
            rep.failures.len()
        )))
    }
}

fn run_replay(out: &Path) -> Result<(), CliError> {
    let rep = replay(out)?;
    println!(
        "stored {} replayed {} csv {}",
        rep.stored_hash,
        rep.replayed_hash,
        if rep.csv_identical {
            "identical"
        } else {
            "differs"
        }
    );
    if rep.matches() {
        Ok(())
    } else {
        Err(CliError::Runtime(
            "replay does not match the stored run".into(),
        ))
    }
}

fn table(a: &TableArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    let net = Network::build(&cfg.topology_spec())?;
    let mut sim = Simulation::new(net, &Programs::builtin(), Vec::new(), 0)?;
    let dev = sim
        .device_mut(a.node)
        .ok_or_else(|| CliError::Config(format!("no device {} in topology", a.node)))?;
    let needs_table = || {
        a.table
            .clone()
            .ok_or_else(|| CliError::Config("--table is required to modify entries".into()))
    };
    if let Some(action) = &a.action {
        let e = TableEntry::new(&needs_table()?, &a.key, action, &a.params);
        dev.table_insert(&e)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    } else if a.delete {
        let t = needs_table()?;
        let found = dev
            .table_delete(&t, &a.key)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        if !found {
            return Err(CliError::Runtime(format!("no entry {:?} in {t}", a.key)));
        }
    }
    let proc = dev.processor();
    let names: Vec<String> = match &a.table {
        Some(t) => vec![t.clone()],
        None => proc
            .program()
            .pipelines
            .iter()
            .flat_map(|p| p.tables.iter().map(|t| t.name.clone()))
            .collect(),
    };
    let mut text = String::new();
    for name in names {
        let entries = proc
            .table_entries(&name)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        text += &format!("{name}: {} entries\n", entries.len());
        for e in entries {
            text += &format!("  {:?} -> {}{:?}\n", e.key, e.action, e.params);
        }
    }
    emit(text.lines())
}

fn trace(exp: &Experiment) -> Result<(), CliError> {
    let cfg = load_config(&exp.config)?;
    let seed = cfg.resolve_seed(exp.seed)?;
    let r = run_cell(&cfg, None, None, seed, true)?;
    eprintln!("trace {} ({} events)", r.trace_hash, r.stats.events);
    emit(r.trace.as_deref().unwrap_or_default())
}

/// Writes lines to stdout, stopping quietly if the reader goes away.
fn emit<S: AsRef<str>>(lines: impl IntoIterator<Item = S>) -> Result<(), CliError> {
    let mut out = BufWriter::new(io::stdout().lock());
    let res = lines
        .into_iter()
        .try_for_each(|l| writeln!(out, "{}", l.as_ref()))
        .and_then(|()| out.flush());
    match res {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
            Err(CliError::Runtime(format!("writing output: {e}")))
        }
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Validate { programs } => validate(programs),
        Command::Run { exp, out } => run(exp, out),
        Command::Sweep { exp, out, workers } => run_sweep(exp, out, *workers),
        Command::Replay { out } => run_replay(out),
        Command::Table(a) => table(a),
        Command::Trace { exp } => trace(exp),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
