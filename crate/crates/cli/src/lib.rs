//! Command-line front end: reads a run configuration, dispatches to the
//! analytic model, the simulator or the experiment drivers, and writes a CSV
//! table plus a JSON summary.

pub mod config;
pub mod grid;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use cellstore::analytic::{self, AnalyticError};
use cellstore::experiments::{self, ExperimentError};
use cellstore::model::{self, reference_codes};
use cellstore::simulate::{self, RNG_NAME};
use cellstore::{
    CostBreakdown, CurveRow, Engine, Estimator, NetworkParams, SimConfig, SimError, StorageCode,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::config::{parse_config, ConfigError, DeltaUnit, Format, RunConfig};
use crate::grid::GridSpec;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical instability: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AnalyticError> for CliError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::NumericalInstability { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Analytic(a) => a.into(),
            ExperimentError::Simulation(s) => s.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "cellstore",
    version,
    about = "Communication cost of cellular distributed storage"
)]
pub struct Cli {
    /// JSON run configuration; omitted fields use the reference cell.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Repair-interval grid, `lin:a:b:n` or `log:a:b:n`.
    #[arg(long)]
    pub delta_grid: Option<GridSpec>,
    /// Unit of grid and interval values.
    #[arg(long, value_enum)]
    pub unit: Option<DeltaUnit>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic cost curve over a repair-interval grid.
    Analyze {
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Monte Carlo cost estimates at one interval or over a grid.
    Simulate {
        #[command(flatten)]
        schedule: ScheduleArgs,
        /// Single repair interval (ignored when a grid is given).
        #[arg(long)]
        delta: Option<f64>,
        /// Repair intervals simulated per replicate.
        #[arg(long)]
        intervals: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<u32>,
        #[arg(long, value_enum)]
        estimator: Option<EstimatorArg>,
        /// Track the non-storage population instead of assuming a repair
        /// target is always present.
        #[arg(long)]
        track_population: bool,
    },
    /// Largest repair interval that still beats BS-only delivery.
    DeltaMax {
        /// Bisection tolerance in time units.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Cost-minimizing repair interval.
    OptimalDelta {
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// `μΔ_max` against the BS/D2D cost ratio.
    SweepRho {
        #[arg(long, default_value = "log:1:1000:31")]
        rho_grid: GridSpec,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Sweep only the configured code instead of the reference set.
        #[arg(long)]
        config_code: bool,
    },
    /// Feasibility report and profile of the configured code.
    Validate,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum EstimatorArg {
    Direct,
    Weighted,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Direct => Estimator::Direct,
            EstimatorArg::Weighted => Estimator::Weighted,
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analyze { .. } => "analyze",
            Command::Simulate { .. } => "simulate",
            Command::DeltaMax { .. } => "delta-max",
            Command::OptimalDelta { .. } => "optimal-delta",
            Command::SweepRho { .. } => "sweep-rho",
            Command::Validate => "validate",
        }
    }

    // Tables for curve-like outputs, summaries for scalar results.
    fn default_format(&self) -> Format {
        match self {
            Command::Analyze { .. } | Command::Simulate { .. } | Command::SweepRho { .. } => {
                Format::Csv
            }
            _ => Format::Json,
        }
    }
}

/// What a command produced: CSV-ready rows and the scalar summary.
struct Report {
    table: Vec<u8>,
    rows: Value,
    summary: Map<String, Value>,
    engine: &'static str,
    seed: Option<u64>,
    failure: Option<CliError>,
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn report<T: Serialize>(rows: &[T], engine: &'static str) -> Result<Report, CliError> {
    Ok(Report {
        table: csv_bytes(rows)?,
        rows: serde_json::to_value(rows).map_err(|e| CliError::Io(e.to_string()))?,
        summary: Map::new(),
        engine,
        seed: None,
        failure: None,
    })
}

fn insert<T: Serialize>(map: &mut Map<String, Value>, key: &str, value: T) {
    map.insert(
        key.to_string(),
        serde_json::to_value(value).expect("summary values serialize"),
    );
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            Ok(parse_config(&text)?)
        }
    }
}

fn curve_row(delta: f64, mu: f64, cost: CostBreakdown) -> CurveRow {
    CurveRow {
        delta,
        mu_delta: mu * delta,
        repair: cost.repair,
        download: cost.download,
        total: cost.total,
        normalized_total: cost.normalized_total,
    }
}

fn grid_deltas(
    config: &RunConfig,
    schedule: &ScheduleArgs,
) -> Result<(GridSpec, DeltaUnit, Vec<f64>), CliError> {
    let grid = schedule.delta_grid.unwrap_or(config.schedule.delta_grid);
    let unit = schedule.unit.unwrap_or(config.schedule.unit);
    let deltas = config.to_time(&grid.values(), unit)?;
    Ok((grid, unit, deltas))
}

fn analyze(
    config: &RunConfig,
    code: &StorageCode,
    params: &NetworkParams,
    schedule: &ScheduleArgs,
) -> Result<Report, CliError> {
    let (grid, unit, deltas) = grid_deltas(config, schedule)?;
    let table = experiments::sweep_delta(code, params, &deltas, Engine::Analytic)?;
    let mut r = report(&table.rows, "analytic")?;
    insert(&mut r.summary, "delta_grid", grid);
    insert(&mut r.summary, "unit", unit);
    insert(&mut r.summary, "points", table.rows.len());
    insert(
        &mut r.summary,
        "limit_delta_zero",
        analytic::limit_delta_zero(code, params),
    );
    insert(&mut r.summary, "bs_only_cost", params.bs_only_cost());
    Ok(r)
}

#[derive(Serialize)]
struct SimulatedPoint {
    delta: f64,
    mu_delta: f64,
    analytic_total: f64,
    result: cellstore::SimulationResult,
}

fn simulate_cmd(
    config: &RunConfig,
    code: &StorageCode,
    params: &NetworkParams,
    cmd: &Command,
) -> Result<Report, CliError> {
    let Command::Simulate {
        schedule,
        delta,
        intervals,
        seed,
        replications,
        estimator,
        track_population,
    } = cmd
    else {
        unreachable!("simulate_cmd called with another command");
    };
    let unit = schedule.unit.unwrap_or(config.schedule.unit);
    let deltas = if schedule.delta_grid.is_some() {
        grid_deltas(config, schedule)?.2
    } else {
        config.to_time(&[delta.unwrap_or(config.schedule.delta)], unit)?
    };
    let sim = &config.simulation;
    let base = SimConfig {
        horizon_intervals: intervals.unwrap_or(sim.horizon_intervals),
        seed: seed.unwrap_or(sim.seed),
        replications: replications.unwrap_or(sim.replications),
        estimator: estimator.map(Into::into).unwrap_or(sim.estimator),
        track_population: *track_population || sim.track_population,
        ..SimConfig::new(*code, *params, config.schedule.delta)
    };
    let mu = params.departure_rate();
    let mut rows = Vec::with_capacity(deltas.len());
    let mut points = Vec::with_capacity(deltas.len());
    for &d in &deltas {
        let cfg = SimConfig { delta: d, ..base };
        let result = simulate::simulate(&cfg)?;
        let cost = CostBreakdown::new(result.repair_cost_rate, result.download_cost_rate, params);
        rows.push(curve_row(d, mu, cost));
        points.push(SimulatedPoint {
            delta: d,
            mu_delta: mu * d,
            analytic_total: analytic::total_cost(code, params, d)?.total,
            result,
        });
    }
    let mut r = report(&rows, "simulated")?;
    r.seed = Some(base.seed);
    insert(&mut r.summary, "horizon_intervals", base.horizon_intervals);
    insert(&mut r.summary, "replications", base.replications);
    insert(&mut r.summary, "estimator", base.estimator);
    insert(&mut r.summary, "rng", RNG_NAME);
    insert(&mut r.summary, "points", points);
    Ok(r)
}

#[derive(Serialize)]
struct DeltaMaxRow {
    code: String,
    rho: f64,
    delta_max: Option<f64>,
    mu_delta_max: Option<f64>,
    censored: bool,
}

fn delta_max(code: &StorageCode, params: &NetworkParams, tol: f64) -> Result<Report, CliError> {
    let res = experiments::find_delta_max(code, params, tol)?;
    let row = DeltaMaxRow {
        code: code.label(),
        rho: params.rho(),
        delta_max: res.delta_max,
        mu_delta_max: res.mu_delta_max,
        censored: res.censored,
    };
    let mut r = report(&[row], "analytic")?;
    if let Value::Object(fields) = serde_json::to_value(res).expect("result serializes") {
        r.summary.extend(fields);
    }
    Ok(r)
}

fn optimal_delta(code: &StorageCode, params: &NetworkParams, tol: f64) -> Result<Report, CliError> {
    let res = experiments::find_optimal_delta(code, params, tol)?;
    let row = curve_row(res.delta_star, params.departure_rate(), res.cost_star);
    let mut r = report(&[row], "analytic")?;
    insert(&mut r.summary, "delta_star", res.delta_star);
    insert(&mut r.summary, "mu_delta_star", res.mu_delta_star);
    insert(&mut r.summary, "cost_star", res.cost_star);
    insert(&mut r.summary, "bs_only_cost", params.bs_only_cost());
    Ok(r)
}

fn sweep_rho(
    code: &StorageCode,
    params: &NetworkParams,
    rho_grid: &GridSpec,
    tol: f64,
    config_code: bool,
) -> Result<Report, CliError> {
    let codes = if config_code {
        vec![*code]
    } else {
        reference_codes(params.file_size())
    };
    let rows = experiments::sweep_rho(&codes, params, &rho_grid.values(), tol)?;
    let mut r = report(&rows, "analytic")?;
    insert(&mut r.summary, "rho_grid", rho_grid);
    insert(
        &mut r.summary,
        "codes",
        codes.iter().map(StorageCode::label).collect::<Vec<_>>(),
    );
    Ok(r)
}

#[derive(Serialize)]
struct Profile {
    code: String,
    family: String,
    n: u32,
    k: f64,
    h: u32,
    r: u32,
    rate: f64,
    alpha: f64,
    beta: f64,
    gamma_d2d: f64,
    gamma_bs: f64,
    download_bits: f64,
    feasible: bool,
}

fn validate_cmd(code: &StorageCode, params: &NetworkParams) -> Result<Report, CliError> {
    let report_ = model::validate(code, params);
    let profile = Profile {
        code: code.label(),
        family: code.family().to_string(),
        n: code.n(),
        k: code.k(),
        h: code.h(),
        r: code.r(),
        rate: code.rate(),
        alpha: code.alpha(),
        beta: code.beta(),
        gamma_d2d: code.gamma_d2d(),
        gamma_bs: code.gamma_bs(),
        download_bits: code.download_bits(),
        feasible: report_.feasible,
    };
    let mut r = report(&[&profile], "analytic")?;
    if let Value::Object(fields) = serde_json::to_value(&profile).expect("profile serializes") {
        r.summary.extend(fields);
    }
    insert(&mut r.summary, "violations", &report_.violations);
    insert(&mut r.summary, "warnings", &report_.warnings);
    if !report_.feasible {
        let list: Vec<_> = report_
            .violations
            .iter()
            .map(|v| format!("{} ({})", v.constraint, v.detail))
            .collect();
        r.failure = Some(CliError::Config(format!(
            "code: {} is infeasible: {}",
            code.label(),
            list.join("; ")
        )));
    }
    Ok(r)
}

fn write_to(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| io_error(p, e)),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

/// Sidecar summary path for CSV output: `curve.csv` → `curve.summary.json`.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

/// Runs one command end to end.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let config = load_config(cli.config.as_deref())?;
    let params = config.network_params()?;
    let code = config.storage_code()?;
    let command = &cli.command;
    let mut rep = match command {
        Command::Analyze { schedule } => analyze(&config, &code, &params, schedule)?,
        Command::Simulate { .. } => simulate_cmd(&config, &code, &params, command)?,
        Command::DeltaMax { tol } => delta_max(&code, &params, *tol)?,
        Command::OptimalDelta { tol } => optimal_delta(&code, &params, *tol)?,
        Command::SweepRho {
            rho_grid,
            tol,
            config_code,
        } => sweep_rho(&code, &params, rho_grid, *tol, *config_code)?,
        Command::Validate => validate_cmd(&code, &params)?,
    };

    let format = cli
        .format
        .or(config.output.format)
        .unwrap_or_else(|| command.default_format());
    let out = cli.out.clone().or_else(|| config.output.path.clone());

    let mut summary = Map::new();
    insert(&mut summary, "command", command.name());
    insert(&mut summary, "code", code.label());
    summary.append(&mut rep.summary);
    summary.insert(
        "metadata".into(),
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "seed": rep.seed,
            "engine": rep.engine,
            "wall_time_s": started.elapsed().as_secs_f64(),
        }),
    );
    insert(&mut summary, "config", &config);

    match format {
        Format::Csv => {
            write_to(out.as_deref(), &rep.table)?;
            let text = serde_json::to_string_pretty(&Value::Object(summary))
                .map_err(|e| CliError::Io(e.to_string()))?;
            match &out {
                Some(p) => {
                    let side = summary_path(p);
                    fs::write(&side, text + "\n").map_err(|e| io_error(&side, e))?;
                }
                None => eprintln!("{text}"),
            }
        }
        Format::Json => {
            summary.insert("rows".into(), rep.rows);
            let text = serde_json::to_string_pretty(&Value::Object(summary))
                .map_err(|e| CliError::Io(e.to_string()))?;
            write_to(out.as_deref(), (text + "\n").as_bytes())?;
        }
    }
    match rep.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
