//! Experiment harness: topologies, Poisson demand, simulation runs,
//! windowed metrics, CSV output, sweeps and replay.

mod config;
mod demand;
mod metrics;
mod output;
mod sim;
#[cfg(test)]
mod tests;
mod topology;

pub use config::{ExperimentConfig, SweepAxes, TopologyConfig};
pub use demand::{generate_demand, DemandSpec, Injection, NS_PER_S};
pub use metrics::{cdf_at, compute_metrics, mean_execution_time, percentile, Metrics};
pub use output::{
    read_cells, replay, run_csv_bytes, sweep, write_cdf_csv, write_run, write_run_csv,
    write_summary_csv, CellResult, ReplayReport, RunManifest, SummaryRow, SweepReport,
};
pub use sim::{Audit, Programs, RequestRecord, RunOptions, RunResult, SimStats, Simulation};
pub use topology::{LinkSpec, Network, NodeSpec, PortLink, TopologySpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("simulation error: {0}")]
    Runtime(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Extra simulated time allowed for a draining run.
pub const DRAIN_LIMIT_NS: u64 = 600 * 1_000_000_000;

/// Builds the network, draws demand for `seed` and simulates it.
pub fn run_experiment(
    topo: &TopologySpec,
    demand: &DemandSpec,
    seed: u64,
    drain: bool,
    keep_trace: bool,
) -> Result<RunResult, NetError> {
    demand.validate().map_err(|msg| NetError::Config {
        path: "demand".into(),
        msg,
    })?;
    let net = Network::build(topo)?;
    let inj = generate_demand(demand, &net.end_nodes, seed);
    let sim = Simulation::new(net, &Programs::builtin(), inj, seed)?;
    let stop_ns = demand.duration_ns();
    Ok(sim.run(RunOptions {
        drain,
        stop_ns,
        drain_limit_ns: stop_ns + DRAIN_LIMIT_NS,
        keep_trace,
    }))
}

/// Runs one cell of a config: `units` and `rate` override the config's.
pub fn run_cell(
    cfg: &ExperimentConfig,
    units: Option<usize>,
    rate: Option<f64>,
    seed: u64,
    keep_trace: bool,
) -> Result<RunResult, NetError> {
    let mut topo = cfg.topology_spec();
    if let Some(u) = units {
        topo = topo.with_units(u);
    }
    let mut demand = cfg.demand.clone();
    if let Some(r) = rate {
        demand.rate = r;
    }
    run_experiment(&topo, &demand, seed, cfg.drain, keep_trace)
}
