//! Cost curves, maximum useful repair interval and optimal repair interval.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analytic::{self, AnalyticError, CostBreakdown};
use crate::model::{NetworkParams, StorageCode};
use crate::simulate::{self, Estimator, SimConfig, SimError};

/// Upper end of every `Δ` search, in units of the mean node lifetime.
pub const MAX_MU_DELTA: f64 = 20.0;
/// Lower end of the logarithmic scan, in units of the mean node lifetime.
pub const MIN_MU_DELTA: f64 = 1e-4;
/// Points in the logarithmic scan preceding bisection / golden section.
pub const SCAN_POINTS: usize = 400;

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

/// Simulation settings used when a sweep runs on the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimSettings {
    pub horizon_intervals: u64,
    pub seed: u64,
    pub replications: u32,
    pub estimator: Estimator,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            horizon_intervals: 2000,
            seed: 0,
            replications: 1,
            estimator: Estimator::Direct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Engine {
    Analytic,
    Simulated(SimSettings),
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Simulated(_) => "simulated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub delta: f64,
    pub mu_delta: f64,
    pub repair: f64,
    pub download: f64,
    pub total: f64,
    pub normalized_total: f64,
}

/// Cost curve over a grid of repair intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveTable {
    pub code: String,
    pub params: NetworkParams,
    pub engine: Engine,
    pub rows: Vec<CurveRow>,
}

/// Evenly spaced grid of `points` values over `[start, end]`.
pub fn linspace(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (points - 1) as f64;
            let mut grid: Vec<f64> = (0..points).map(|i| start + step * i as f64).collect();
            grid[points - 1] = end;
            grid
        }
    }
}

/// Logarithmically spaced grid of `points` values over `[start, end]`,
/// both positive.
pub fn logspace(start: f64, end: f64, points: usize) -> Vec<f64> {
    let (lo, hi) = (start.ln(), end.ln());
    let mut grid: Vec<f64> = linspace(lo, hi, points).into_iter().map(f64::exp).collect();
    if let Some(first) = grid.first_mut() {
        *first = start;
    }
    if points > 1 {
        grid[points - 1] = end;
    }
    grid
}

fn check_grid(grid: &[f64]) -> Result<(), ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::InvalidGrid("grid is empty".into()));
    }
    if grid.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(ExperimentError::InvalidGrid(
            "grid values must be finite and non-negative".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ExperimentError::InvalidGrid(
            "grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn require_churn(params: &NetworkParams) -> Result<f64, ExperimentError> {
    let mu = params.departure_rate();
    if mu > 0.0 {
        Ok(mu)
    } else {
        Err(ExperimentError::InvalidArgument(
            "repair-interval searches need a positive churn rate".into(),
        ))
    }
}

fn row(delta: f64, mu: f64, cost: CostBreakdown) -> CurveRow {
    CurveRow {
        delta,
        mu_delta: mu * delta,
        repair: cost.repair,
        download: cost.download,
        total: cost.total,
        normalized_total: cost.normalized_total,
    }
}

/// Evaluates the cost at every repair interval of `delta_grid`.
///
/// `Δ = 0` is only accepted by the analytic engine, which uses the
/// instantaneous-repair limit there.
pub fn sweep_delta(
    code: &StorageCode,
    params: &NetworkParams,
    delta_grid: &[f64],
    engine: Engine,
) -> Result<CurveTable, ExperimentError> {
    check_grid(delta_grid)?;
    let mu = params.departure_rate();
    let rows = match engine {
        Engine::Analytic => delta_grid
            .par_iter()
            .map(|&delta| Ok(row(delta, mu, analytic::total_cost(code, params, delta)?)))
            .collect::<Result<Vec<_>, ExperimentError>>()?,
        Engine::Simulated(settings) => {
            if delta_grid[0] == 0.0 {
                return Err(ExperimentError::InvalidGrid(
                    "the simulator cannot run with a zero repair interval".into(),
                ));
            }
            delta_grid
                .iter()
                .map(|&delta| {
                    let config = SimConfig {
                        horizon_intervals: settings.horizon_intervals,
                        seed: settings.seed,
                        replications: settings.replications,
                        estimator: settings.estimator,
                        ..SimConfig::new(*code, *params, delta)
                    };
                    let r = simulate::simulate(&config)?;
                    Ok(row(
                        delta,
                        mu,
                        CostBreakdown::new(r.repair_cost_rate, r.download_cost_rate, params),
                    ))
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?
        }
    };
    Ok(CurveTable {
        code: code.label(),
        params: *params,
        engine,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaMaxResult {
    /// Largest repair interval with cost below BS-only delivery; `None` when
    /// device storage never pays off on the scanned range.
    pub delta_max: Option<f64>,
    pub mu_delta_max: Option<f64>,
    /// Final bisection interval `(below, above)`.
    pub bracket: Option<(f64, f64)>,
    /// True when the cost is still below the BS-only cost at the upper end
    /// of the search range, so `delta_max` is only a lower bound.
    pub censored: bool,
    pub grid_points: usize,
    pub tolerance: f64,
}

/// Largest repair interval for which the expected total cost stays below
/// BS-only delivery.
///
/// The total cost is not monotone in `Δ`, so a log grid over
/// `μΔ ∈ [1e-4, 20]` is scanned for the last point below `N·ω·ρ_BS` and the
/// following crossing is bisected to `tol` (in time units).
pub fn find_delta_max(
    code: &StorageCode,
    params: &NetworkParams,
    tol: f64,
) -> Result<DeltaMaxResult, ExperimentError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ExperimentError::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mu = require_churn(params)?;
    let threshold = params.bs_only_cost();
    let excess = |delta: f64| -> Result<f64, ExperimentError> {
        Ok(analytic::total_cost(code, params, delta)?.total - threshold)
    };

    let grid: Vec<f64> = logspace(MIN_MU_DELTA, MAX_MU_DELTA, SCAN_POINTS)
        .into_iter()
        .map(|x| x / mu)
        .collect();
    let values = grid
        .par_iter()
        .map(|&d| excess(d))
        .collect::<Result<Vec<_>, _>>()?;

    let none = DeltaMaxResult {
        delta_max: None,
        mu_delta_max: None,
        bracket: None,
        censored: false,
        grid_points: SCAN_POINTS,
        tolerance: tol,
    };
    let Some(last_below) = values.iter().rposition(|&v| v < 0.0) else {
        return Ok(none);
    };
    if last_below + 1 == grid.len() {
        let upper = grid[last_below];
        return Ok(DeltaMaxResult {
            delta_max: Some(upper),
            mu_delta_max: Some(upper * mu),
            bracket: Some((upper, upper)),
            censored: true,
            ..none
        });
    }

    let (mut lo, mut hi) = (grid[last_below], grid[last_below + 1]);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if excess(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta_max = 0.5 * (lo + hi);
    Ok(DeltaMaxResult {
        delta_max: Some(delta_max),
        mu_delta_max: Some(delta_max * mu),
        bracket: Some((lo, hi)),
        ..none
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalDelta {
    pub delta_star: f64,
    pub mu_delta_star: f64,
    pub cost_star: CostBreakdown,
    /// `(Δ, total cost)` at every scan point, `Δ = 0` first.
    #[serde(skip)]
    pub scan: Vec<(f64, f64)>,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Repair interval minimizing the expected total cost over
/// `[0, Δ_max]` (or `[0, 20/μ]` when `Δ_max` does not exist).
///
/// The scan locates the best grid cell and golden-section search refines
/// inside its neighbours only; the cost is not assumed unimodal globally.
/// `Δ = 0` is evaluated with the instantaneous-repair limit and wins ties.
pub fn find_optimal_delta(
    code: &StorageCode,
    params: &NetworkParams,
    tol: f64,
) -> Result<OptimalDelta, ExperimentError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ExperimentError::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mu = require_churn(params)?;
    let upper = find_delta_max(code, params, tol)?
        .delta_max
        .unwrap_or(MAX_MU_DELTA / mu);

    let mut grid = vec![0.0];
    let lower = (MIN_MU_DELTA / mu).min(upper);
    grid.extend(
        logspace(lower, upper, SCAN_POINTS)
            .into_iter()
            .filter(|&d| d > 0.0),
    );
    grid.dedup();
    let cost = |delta: f64| -> Result<f64, ExperimentError> {
        Ok(analytic::total_cost(code, params, delta)?.total)
    };
    let values = grid
        .par_iter()
        .map(|&d| cost(d))
        .collect::<Result<Vec<_>, _>>()?;
    let scan: Vec<(f64, f64)> = grid.iter().copied().zip(values.iter().copied()).collect();

    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty scan");
    let (mut a, mut b) = (
        grid[best.saturating_sub(1)],
        grid[(best + 1).min(grid.len() - 1)],
    );

    let (mut best_delta, mut best_cost) = (grid[best], values[best]);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (cost(c)?, cost(d)?);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = cost(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = cost(d)?;
        }
    }
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx < best_cost {
            best_delta = x;
            best_cost = fx;
        }
    }
    let at_zero = values[0];
    if at_zero <= best_cost {
        best_delta = 0.0;
    }

    Ok(OptimalDelta {
        delta_star: best_delta,
        mu_delta_star: best_delta * mu,
        cost_star: analytic::total_cost(code, params, best_delta)?,
        scan,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoSweepRow {
    pub rho: f64,
    pub code: String,
    pub mu_delta_max: Option<f64>,
    pub censored: bool,
}

/// `μΔ_max` for each code and each BS/D2D cost ratio, holding `ρ_D2D`
/// fixed and setting `ρ_BS = ρ·ρ_D2D`.
pub fn sweep_rho(
    codes: &[StorageCode],
    params: &NetworkParams,
    rho_grid: &[f64],
    tol: f64,
) -> Result<Vec<RhoSweepRow>, ExperimentError> {
    if rho_grid.is_empty() {
        return Err(ExperimentError::InvalidGrid("rho grid is empty".into()));
    }
    if let Some(bad) = rho_grid.iter().find(|r| !(1.0..=1000.0).contains(*r)) {
        return Err(ExperimentError::InvalidGrid(format!(
            "rho values must lie in [1, 1000], got {bad}"
        )));
    }
    let jobs: Vec<(f64, &StorageCode)> = rho_grid
        .iter()
        .flat_map(|&rho| codes.iter().map(move |c| (rho, c)))
        .collect();
    jobs.par_iter()
        .map(|&(rho, code)| {
            let cell = params
                .with_rho_bs(rho * params.rho_d2d())
                .map_err(|e| ExperimentError::InvalidArgument(e.to_string()))?;
            let result = find_delta_max(code, &cell, tol)?;
            Ok(RhoSweepRow {
                rho,
                code: code.label(),
                mu_delta_max: result.mu_delta_max,
                censored: result.censored,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_codes;

    #[test]
    fn grids() {
        assert_eq!(linspace(0.0, 1.0, 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = logspace(1e-4, 20.0, 400);
        assert_eq!(g.len(), 400);
        assert_eq!(g[0], 1e-4);
        assert_eq!(g[399], 20.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(linspace(0.0, 1.0, 0).is_empty());
        assert_eq!(linspace(3.0, 1.0, 1), vec![3.0]);
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let params = NetworkParams::default();
        let code = StorageCode::mds(10, 2, 1.0).unwrap();
        assert!(sweep_delta(&code, &params, &[], Engine::Analytic).is_err());
        assert!(sweep_delta(&code, &params, &[0.1, 0.1], Engine::Analytic).is_err());
        assert!(sweep_delta(&code, &params, &[-0.1, 0.1], Engine::Analytic).is_err());
        let sim = Engine::Simulated(SimSettings::default());
        assert!(matches!(
            sweep_delta(&code, &params, &[0.0, 0.01], sim),
            Err(ExperimentError::InvalidGrid(_))
        ));
    }

    #[test]
    fn sweep_rows_follow_grid() {
        let params = NetworkParams::default();
        let code = StorageCode::replication(5, 1.0).unwrap();
        let grid = linspace(0.0, 3.0 / 50.0, 31);
        let table = sweep_delta(&code, &params, &grid, Engine::Analytic).unwrap();
        assert_eq!(table.rows.len(), 31);
        assert!((table.rows[0].normalized_total - 0.03).abs() < 1e-12);
        for (r, d) in table.rows.iter().zip(&grid) {
            assert_eq!(r.delta, *d);
            assert!((r.total - (r.repair + r.download)).abs() < 1e-9 * r.total);
        }
    }

    #[test]
    fn far_tail_of_sweep_is_bs_only() {
        let params = NetworkParams::default();
        for code in reference_codes(1.0) {
            let table = sweep_delta(&code, &params, &[1e5 / 50.0], Engine::Analytic).unwrap();
            assert!((table.rows[0].normalized_total - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn equal_costs_never_favour_devices() {
        let params = NetworkParams::default();
        let rows = sweep_rho(&reference_codes(1.0), &params, &[1.0], 1e-6).unwrap();
        assert!(rows.iter().all(|r| r.mu_delta_max.is_none()), "{rows:?}");
    }

    #[test]
    fn rejects_bad_rho_and_tolerance() {
        let params = NetworkParams::default();
        let codes = reference_codes(1.0);
        assert!(sweep_rho(&codes, &params, &[0.5], 1e-6).is_err());
        assert!(sweep_rho(&codes, &params, &[], 1e-6).is_err());
        assert!(find_delta_max(&codes[0], &params, 0.0).is_err());
        assert!(find_optimal_delta(&codes[0], &params, -1.0).is_err());
        let frozen = params.with_churn_rate(0.0).unwrap();
        assert!(find_delta_max(&codes[0], &frozen, 1e-6).is_err());
    }

    #[test]
    fn cheap_repairs_censor_delta_max() {
        // Slow churn and a huge request rate: storage pays off even at the
        // end of the search range.
        let params = NetworkParams::new(1000.0, 0.001, 5.0, 1.0, 5.0, 200.0, 1.0).unwrap();
        let code = StorageCode::mds(10, 2, 1.0).unwrap();
        let r = find_delta_max(&code, &params, 1e-6).unwrap();
        assert!(r.censored);
        assert_eq!(r.mu_delta_max, Some(MAX_MU_DELTA));
    }
}
