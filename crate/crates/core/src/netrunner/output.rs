use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{cdf_at, compute_metrics};
use super::sim::{Audit, RequestRecord, RunResult, SimStats};
use super::{run_cell, NetError};

fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> NetError {
    let context = context.into();
    move |source| NetError::Io { context, source }
}

/// Writes `bytes` to `path` via a temporary sibling and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), NetError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io(format!("writing {}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(io(format!("renaming to {}", path.display())))
}

pub fn run_csv_bytes(records: &[RequestRecord]) -> Result<Vec<u8>, NetError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "request_id",
        "src",
        "dst",
        "submit_ns",
        "start_ns",
        "complete_ns",
    ])?;
    let opt = |v: Option<u64>| v.map_or(String::new(), |x| x.to_string());
    for r in records {
        w.write_record([
            r.request_id.to_string(),
            r.src.to_string(),
            r.dst.to_string(),
            r.submit_ns.to_string(),
            opt(r.start_ns),
            opt(r.complete_ns),
        ])?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

pub fn write_run_csv(path: &Path, records: &[RequestRecord]) -> Result<(), NetError> {
    write_atomic(path, &run_csv_bytes(records)?)
}

/// One row of a sweep summary. Latencies are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub units: usize,
    pub rate: f64,
    pub seed: u64,
    pub throughput: f64,
    pub mean_latency: f64,
    pub p50: f64,
    pub p95: f64,
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), NetError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "units",
            "rate",
            "seed",
            "throughput",
            "mean_latency",
            "p50",
            "p95",
        ])?;
    }
    write_atomic(path, &w.into_inner().expect("in-memory writer"))
}

/// Empirical CDF of `latencies` (seconds), one row per distinct value.
pub fn write_cdf_csv(path: &Path, latencies: &[f64]) -> Result<(), NetError> {
    let mut sorted = latencies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["latency_s", "cdf"])?;
    let mut prev = None;
    for &x in &sorted {
        if prev == Some(x) {
            continue;
        }
        prev = Some(x);
        w.write_record([x.to_string(), cdf_at(&sorted, x).to_string()])?;
    }
    write_atomic(path, &w.into_inner().expect("in-memory writer"))
}

/// What a single run wrote, enough to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub units: Option<usize>,
    pub rate: Option<f64>,
    pub trace_hash: String,
    pub audit: Audit,
    pub stats: SimStats,
    pub aborted: Option<String>,
}

pub const RUN_MANIFEST: &str = "run.json";
pub const RUN_CSV: &str = "requests.csv";

fn row_for(
    cfg: &ExperimentConfig,
    units: usize,
    rate: f64,
    r: &RunResult,
) -> (SummaryRow, Vec<f64>) {
    let m = compute_metrics(&r.records, cfg.demand.window_ns());
    let row = SummaryRow {
        units,
        rate,
        seed: r.seed,
        throughput: m.throughput,
        mean_latency: m.mean_latency,
        p50: m.p50,
        p95: m.p95,
    };
    (row, m.latencies)
}

fn config_units(cfg: &ExperimentConfig) -> usize {
    cfg.topology_spec()
        .nodes
        .iter()
        .map(|n| n.units)
        .max()
        .unwrap_or(0)
}

/// Writes the request CSV, a one-row summary, the latency CDF and the
/// manifest of a run into `dir`.
pub fn write_run(
    dir: &Path,
    cfg: &ExperimentConfig,
    units: Option<usize>,
    rate: Option<f64>,
    r: &RunResult,
) -> Result<(), NetError> {
    fs::create_dir_all(dir).map_err(io(format!("creating {}", dir.display())))?;
    write_run_csv(&dir.join(RUN_CSV), &r.records)?;
    let (row, lat) = row_for(
        cfg,
        units.unwrap_or_else(|| config_units(cfg)),
        rate.unwrap_or(cfg.demand.rate),
        r,
    );
    write_summary_csv(&dir.join("summary.csv"), &[row])?;
    write_cdf_csv(&dir.join("cdf.csv"), &lat)?;
    let m = RunManifest {
        config: cfg.clone(),
        seed: r.seed,
        units,
        rate,
        trace_hash: r.trace_hash.clone(),
        audit: r.audit.clone(),
        stats: r.stats.clone(),
        aborted: r.aborted.clone(),
    };
    let json = serde_json::to_string_pretty(&m).expect("manifest serializes");
    write_atomic(&dir.join(RUN_MANIFEST), json.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub stored_hash: String,
    pub replayed_hash: String,
    pub csv_identical: bool,
}

impl ReplayReport {
    pub fn matches(&self) -> bool {
        self.stored_hash == self.replayed_hash && self.csv_identical
    }
}

/// Re-runs the run stored in `dir` and compares it with what was stored.
pub fn replay(dir: &Path) -> Result<ReplayReport, NetError> {
    let path = dir.join(RUN_MANIFEST);
    let text = fs::read_to_string(&path).map_err(io(format!("reading {}", path.display())))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| NetError::Config {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    m.config.validate()?;
    let r = run_cell(&m.config, m.units, m.rate, m.seed, false)?;
    let csv_path = dir.join(RUN_CSV);
    let stored = fs::read(&csv_path).map_err(io(format!("reading {}", csv_path.display())))?;
    Ok(ReplayReport {
        stored_hash: m.trace_hash,
        replayed_hash: r.trace_hash,
        csv_identical: stored == run_csv_bytes(&r.records)?,
    })
}

/// A finished sweep cell as persisted under `cells/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub row: SummaryRow,
    pub latencies: Vec<f64>,
    pub mean_execution: f64,
    pub trace_hash: String,
    pub audit: Audit,
    pub stats: SimStats,
}

#[derive(Debug, Clone, Default)]
pub struct SweepReport {
    pub rows: Vec<SummaryRow>,
    /// Cells found complete on disk and not re-run.
    pub resumed: usize,
    pub ran: usize,
    pub failures: Vec<(String, String)>,
}

fn cell_name(units: usize, rate: f64, seed: u64) -> String {
    format!("u{units}_r{rate}_s{seed}")
}

/// Runs every (units, rate, repetition) cell of `cfg` on `workers` threads,
/// skipping cells already stored under `out/cells`, then writes
/// `summary.csv` and one CDF per (units, rate) under `out/cdf`.
pub fn sweep(
    cfg: &ExperimentConfig,
    base_seed: u64,
    out: &Path,
    workers: usize,
) -> Result<SweepReport, NetError> {
    let axes = cfg.sweep.clone().unwrap_or_else(|| super::SweepAxes {
        units: vec![config_units(cfg)],
        rates: vec![cfg.demand.rate],
    });
    let cells_dir = out.join("cells");
    fs::create_dir_all(&cells_dir).map_err(io(format!("creating {}", cells_dir.display())))?;
    let mut todo = Vec::new();
    for &u in &axes.units {
        for &r in &axes.rates {
            for rep in 0..cfg.demand.repetitions as u64 {
                todo.push((u, r, base_seed + rep));
            }
        }
    }
    let mut report = SweepReport::default();
    let pending: Vec<_> = todo
        .iter()
        .copied()
        .filter(|&(u, r, s)| {
            !cells_dir
                .join(format!("{}.json", cell_name(u, r, s)))
                .exists()
        })
        .collect();
    report.resumed = todo.len() - pending.len();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| NetError::Runtime(format!("thread pool: {e}")))?;
    let outcomes: Vec<(String, Result<(), NetError>)> = pool.install(|| {
        pending
            .par_iter()
            .map(|&(u, r, s)| {
                let name = cell_name(u, r, s);
                (name.clone(), run_and_store(cfg, u, r, s, &cells_dir, &name))
            })
            .collect()
    });
    for (name, res) in outcomes {
        report.ran += 1;
        if let Err(e) = res {
            let msg = e.to_string();
            let _ = fs::write(cells_dir.join(format!("{name}.err")), &msg);
            report.failures.push((name, msg));
        }
    }
    let cells = read_cells(out)?;
    let mut pooled: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for (u, r, s) in &todo {
        if let Some(c) = cells.get(&cell_name(*u, *r, *s)) {
            report.rows.push(c.row.clone());
            pooled
                .entry((*u, r.to_string()))
                .or_default()
                .extend(&c.latencies);
        }
    }
    write_summary_csv(&out.join("summary.csv"), &report.rows)?;
    let cdf_dir = out.join("cdf");
    fs::create_dir_all(&cdf_dir).map_err(io(format!("creating {}", cdf_dir.display())))?;
    for ((u, r), lat) in pooled {
        write_cdf_csv(&cdf_dir.join(format!("u{u}_r{r}.csv")), &lat)?;
    }
    Ok(report)
}

fn run_and_store(
    cfg: &ExperimentConfig,
    u: usize,
    r: f64,
    s: u64,
    dir: &Path,
    name: &str,
) -> Result<(), NetError> {
    let res = run_cell(cfg, Some(u), Some(r), s, false)?;
    if let Some(why) = &res.aborted {
        return Err(NetError::Runtime(why.clone()));
    }
    write_run_csv(&dir.join(format!("{name}.csv")), &res.records)?;
    let (row, latencies) = row_for(cfg, u, r, &res);
    let m = compute_metrics(&res.records, cfg.demand.window_ns());
    let cell = CellResult {
        row,
        latencies,
        mean_execution: m.mean_execution,
        trace_hash: res.trace_hash.clone(),
        audit: res.audit.clone(),
        stats: res.stats.clone(),
    };
    let json = serde_json::to_string(&cell).expect("cell serializes");
    write_atomic(&dir.join(format!("{name}.json")), json.as_bytes())
}

/// Finished cells under `out/cells`, by name.
pub fn read_cells(out: &Path) -> Result<BTreeMap<String, CellResult>, NetError> {
    let dir = out.join("cells");
    let mut cells = BTreeMap::new();
    let Ok(entries) = fs::read_dir(&dir) else {
        return Ok(cells);
    };
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        if p.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = fs::read_to_string(&p).map_err(io(format!("reading {}", p.display())))?;
        // A torn or foreign file is treated as not done.
        if let Ok(c) = serde_json::from_str::<CellResult>(&text) {
            let name = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            cells.insert(name, c);
        }
    }
    Ok(cells)
}
