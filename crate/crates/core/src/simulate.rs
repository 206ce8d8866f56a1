//! Discrete-event Monte Carlo of one cell under periodic repair.
//!
//! Repair restores full strength at every epoch, so repair intervals are
//! i.i.d. and simulated one after another. Inside an interval the events are
//! storage-node departures (exponential lifetimes) and file requests (Poisson
//! with aggregate rate `N·ω`), processed in time order; the interval closes
//! with a repair epoch. A request landing exactly on an epoch belongs to the
//! next interval, i.e. repair runs first.
//!
//! Two estimators are available:
//!
//! * [`Estimator::Direct`] samples every request and every lifetime as
//!   described above.
//! * [`Estimator::Weighted`] samples departures with a raised per-interval
//!   departure probability and reweights each interval by its likelihood
//!   ratio, and charges downloads by integrating the request intensity over
//!   the simulated storage-count path instead of sampling requests. Both
//!   changes keep the estimator unbiased; they cut the variance contributed
//!   by rare, expensive BS repairs and downloads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NetworkParams, StorageCode};
use crate::stats::{RatioStats, RunningStats};

/// Name of the generator recorded in result metadata.
pub const RNG_NAME: &str = "ChaCha8 (seed_from_u64, stream = replicate index)";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Direct,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub code: StorageCode,
    pub params: NetworkParams,
    /// Repair interval `Δ` in time units.
    pub delta: f64,
    pub horizon_intervals: u64,
    pub seed: u64,
    pub replications: u32,
    pub estimator: Estimator,
    /// Track the non-storage population as an M/M/∞ pool and only repair
    /// onto nodes actually present. Off by default: repair targets are then
    /// assumed to always exist.
    pub track_population: bool,
}

impl SimConfig {
    pub fn new(code: StorageCode, params: NetworkParams, delta: f64) -> Self {
        Self {
            code,
            params,
            delta,
            horizon_intervals: 2000,
            seed: 0,
            replications: 1,
            estimator: Estimator::Direct,
            track_population: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "delta must be positive and finite, got {}",
                self.delta
            )));
        }
        if self.horizon_intervals == 0 {
            return Err(SimError::InvalidConfig(
                "horizon_intervals must be at least 1".into(),
            ));
        }
        if self.replications == 0 {
            return Err(SimError::InvalidConfig(
                "replications must be at least 1".into(),
            ));
        }
        if (self.code.file_size() - self.params.file_size()).abs() > 1e-12 * self.params.file_size()
        {
            return Err(SimError::InvalidConfig(format!(
                "code file size {} differs from cell file size {}",
                self.code.file_size(),
                self.params.file_size()
            )));
        }
        Ok(())
    }
}

/// 95% confidence half-widths for the estimates of a [`SimulationResult`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Halfwidths {
    pub repair_cost_rate: f64,
    pub download_cost_rate: f64,
    pub total_cost_rate: f64,
    pub pr_d2d_download: f64,
    pub mean_repairs_d2d: f64,
    pub mean_repairs_bs: f64,
    pub mean_departures: f64,
    pub mean_passage_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub repair_cost_rate: f64,
    pub download_cost_rate: f64,
    pub total_cost_rate: f64,
    /// Fraction of requests served device-to-device (direct) or the weighted
    /// fraction of time with at least `h` storage nodes (weighted).
    pub pr_d2d_download: f64,
    pub mean_repairs_d2d: f64,
    pub mean_repairs_bs: f64,
    /// Storage-node departures per interval.
    pub mean_departures: f64,
    /// Mean time from an epoch until fewer than `h` storage nodes remain.
    /// Only observed by the direct estimator with a full node set.
    pub mean_passage_time: Option<f64>,
    pub ci_halfwidth_95: Halfwidths,
    pub intervals_simulated: u64,
    pub requests_served: u64,
    pub requests_d2d: u64,
    /// Repairs that could not be performed for lack of non-storage nodes
    /// (population tracking only).
    pub repair_shortfall: u64,
    pub replications: u32,
    pub seed: u64,
    pub estimator: Estimator,
}

/// Non-storage population, evolved as an M/M/∞ birth–death process.
struct Pool {
    size: u64,
    arrival_rate: f64,
    departure_rate: f64,
}

impl Pool {
    fn evolve(&mut self, rng: &mut ChaCha8Rng, duration: f64) {
        let mut t = 0.0;
        loop {
            let total = self.arrival_rate + self.size as f64 * self.departure_rate;
            if total <= 0.0 {
                return;
            }
            t += Exp::new(total).expect("positive rate").sample(rng);
            if t >= duration {
                return;
            }
            if rng.random::<f64>() * total < self.arrival_rate {
                self.size += 1;
            } else {
                self.size -= 1;
            }
        }
    }
}

/// Per-interval observations folded into running statistics.
#[derive(Default)]
struct Accumulator {
    repair: RunningStats,
    download: RunningStats,
    total: RunningStats,
    repairs_d2d: RunningStats,
    repairs_bs: RunningStats,
    departures: RunningStats,
    passage: RunningStats,
    d2d_fraction: RatioStats,
    requests: u64,
    requests_d2d: u64,
    shortfall: u64,
}

struct IntervalOutcome {
    repair_cost: f64,
    download_cost: f64,
    repairs_d2d: f64,
    repairs_bs: f64,
    departures: f64,
    /// (D2D weight, total weight) for the served-D2D ratio.
    d2d_share: (f64, f64),
    passage: Option<f64>,
}

struct Cell<'a> {
    config: &'a SimConfig,
    rng: ChaCha8Rng,
    /// Storage nodes present at the start of the current interval.
    storage: u32,
    pool: Option<Pool>,
    lifetimes: Vec<f64>,
}

impl<'a> Cell<'a> {
    fn new(config: &'a SimConfig, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream);
        let n = config.code.n();
        let pool = config.track_population.then(|| {
            let mean = (config.params.nodes() - f64::from(n)).max(0.0);
            let size = if mean > 0.0 {
                Poisson::new(mean).expect("positive mean").sample(&mut rng) as u64
            } else {
                0
            };
            Pool {
                size,
                arrival_rate: config.params.nodes() * config.params.arrival_rate(),
                departure_rate: config.params.departure_rate(),
            }
        });
        Self {
            config,
            rng,
            storage: n,
            pool,
            lifetimes: Vec::with_capacity(n as usize),
        }
    }

    /// Repairs the `deficit` missing nodes at an epoch with `survivors`
    /// storage nodes present. Returns (d2d repairs, bs repairs, repair cost).
    fn repair(&mut self, survivors: u32, acc: &mut Accumulator) -> (f64, f64, f64) {
        let code = &self.config.code;
        let params = &self.config.params;
        let deficit = code.n() - survivors;
        let repaired = match self.pool.as_mut() {
            Some(pool) => {
                let repaired = u64::from(deficit).min(pool.size);
                pool.size -= repaired;
                acc.shortfall += u64::from(deficit) - repaired;
                repaired as u32
            }
            None => deficit,
        };
        self.storage = survivors + repaired;
        let count = f64::from(repaired);
        if survivors >= code.r() {
            (count, 0.0, count * params.rho_d2d() * code.gamma_d2d())
        } else {
            (0.0, count, count * params.rho_bs() * code.gamma_bs())
        }
    }

    fn direct_interval(&mut self, acc: &mut Accumulator) -> IntervalOutcome {
        let config = self.config;
        let (code, params, delta) = (&config.code, &config.params, config.delta);
        let mu = params.departure_rate();
        let h = code.h();
        let start = self.storage;

        self.lifetimes.clear();
        if mu > 0.0 {
            let lifetime = Exp::new(mu).expect("positive rate");
            for _ in 0..start {
                self.lifetimes.push(lifetime.sample(&mut self.rng));
            }
        } else {
            self.lifetimes.resize(start as usize, f64::INFINITY);
        }
        self.lifetimes.sort_by(f64::total_cmp);

        // Requests and departures merged in time order.
        let request_rate = params.aggregate_request_rate();
        let d2d_cost = params.rho_d2d() * code.download_bits();
        let bs_cost = params.rho_bs() * params.file_size();
        let mut download_cost = 0.0;
        let (mut served, mut served_d2d) = (0u64, 0u64);
        if request_rate > 0.0 {
            let gap = Exp::new(request_rate).expect("positive rate");
            let mut departed = 0usize;
            let mut t = gap.sample(&mut self.rng);
            while t < delta {
                while departed < self.lifetimes.len() && self.lifetimes[departed] <= t {
                    departed += 1;
                }
                let live = start as usize - departed;
                served += 1;
                if live >= h as usize {
                    served_d2d += 1;
                    download_cost += d2d_cost;
                } else {
                    download_cost += bs_cost;
                }
                t += gap.sample(&mut self.rng);
            }
        }
        acc.requests += served;
        acc.requests_d2d += served_d2d;

        let survivors = self.lifetimes.iter().filter(|&&l| l >= delta).count() as u32;
        // Level h is left at the (start − h + 1)-th departure.
        let passage = (start == code.n()).then(|| self.lifetimes[(start - h) as usize]);
        let departures = f64::from(start - survivors);
        if let Some(pool) = self.pool.as_mut() {
            pool.evolve(&mut self.rng, delta);
        }
        let (repairs_d2d, repairs_bs, repair_cost) = self.repair(survivors, acc);

        IntervalOutcome {
            repair_cost,
            download_cost,
            repairs_d2d,
            repairs_bs,
            departures,
            d2d_share: (served_d2d as f64, served as f64),
            passage,
        }
    }

    fn weighted_interval(&mut self, acc: &mut Accumulator, tilt: &Tilt) -> IntervalOutcome {
        let config = self.config;
        let (code, params, delta) = (&config.code, &config.params, config.delta);
        let mu = params.departure_rate();
        let h = code.h();
        let start = self.storage;

        self.lifetimes.clear();
        let mut log_weight = 0.0;
        for _ in 0..start {
            if tilt.tilted > 0.0 && self.rng.random::<f64>() < tilt.tilted {
                // Departure time given a departure inside [0, Δ).
                let u: f64 = self.rng.random();
                self.lifetimes.push(-(-u * tilt.natural).ln_1p() / mu);
                log_weight += tilt.log_ratio_departed;
            } else {
                log_weight += tilt.log_ratio_survived;
            }
        }
        self.lifetimes.sort_by(f64::total_cmp);
        let weight = log_weight.exp();

        let departed = self.lifetimes.len() as u32;
        let survivors = start - departed;
        // Time with at least h storage nodes present.
        let d2d_time = if start < h {
            0.0
        } else {
            self.lifetimes
                .get((start - h) as usize)
                .copied()
                .unwrap_or(delta)
        };
        let rate = params.aggregate_request_rate();
        let download_cost = rate
            * (params.rho_d2d() * code.download_bits() * d2d_time
                + params.rho_bs() * params.file_size() * (delta - d2d_time));

        if let Some(pool) = self.pool.as_mut() {
            pool.evolve(&mut self.rng, delta);
        }
        let (repairs_d2d, repairs_bs, repair_cost) = self.repair(survivors, acc);

        IntervalOutcome {
            repair_cost: weight * repair_cost,
            download_cost: weight * download_cost,
            repairs_d2d: weight * repairs_d2d,
            repairs_bs: weight * repairs_bs,
            departures: weight * f64::from(departed),
            d2d_share: (weight * d2d_time, delta),
            passage: None,
        }
    }
}

/// Importance-sampling tilt of the per-node departure probability.
struct Tilt {
    natural: f64,
    tilted: f64,
    log_ratio_departed: f64,
    log_ratio_survived: f64,
}

impl Tilt {
    /// Raises the per-interval departure probability `q` to the geometric
    /// mean of `q` and `(n − r + 1)/n`, the fraction of departures that
    /// forces a BS repair.
    fn new(code: &StorageCode, mu: f64, delta: f64) -> Self {
        let natural = -(-mu * delta).exp_m1();
        let n = f64::from(code.n());
        let target = f64::from(code.n() - code.r() + 1) / n;
        let tilted = natural.max((natural * target).sqrt());
        if tilted <= natural || natural >= 1.0 {
            return Self {
                natural,
                tilted: natural,
                log_ratio_departed: 0.0,
                log_ratio_survived: 0.0,
            };
        }
        Self {
            natural,
            tilted,
            log_ratio_departed: (natural / tilted).ln(),
            log_ratio_survived: ((-natural).ln_1p() - (-tilted).ln_1p()),
        }
    }
}

fn run_stream(config: &SimConfig, stream: u64) -> SimulationResult {
    let mut cell = Cell::new(config, stream);
    let mut acc = Accumulator::default();
    let tilt = Tilt::new(&config.code, config.params.departure_rate(), config.delta);
    let norm = config.params.file_size() * config.delta;

    for _ in 0..config.horizon_intervals {
        let outcome = match config.estimator {
            Estimator::Direct => cell.direct_interval(&mut acc),
            Estimator::Weighted => cell.weighted_interval(&mut acc, &tilt),
        };
        let repair = outcome.repair_cost / norm;
        let download = outcome.download_cost / norm;
        acc.repair.push(repair);
        acc.download.push(download);
        acc.total.push(repair + download);
        acc.repairs_d2d.push(outcome.repairs_d2d);
        acc.repairs_bs.push(outcome.repairs_bs);
        acc.departures.push(outcome.departures);
        acc.d2d_fraction
            .push(outcome.d2d_share.0, outcome.d2d_share.1);
        if let Some(p) = outcome.passage {
            acc.passage.push(p);
        }
    }

    let repair = acc.repair.mean();
    let download = acc.download.mean();
    let passage_observed = acc.passage.count() > 0;
    SimulationResult {
        repair_cost_rate: repair,
        download_cost_rate: download,
        total_cost_rate: repair + download,
        pr_d2d_download: acc.d2d_fraction.ratio().unwrap_or(1.0).clamp(0.0, 1.0),
        mean_repairs_d2d: acc.repairs_d2d.mean(),
        mean_repairs_bs: acc.repairs_bs.mean(),
        mean_departures: acc.departures.mean(),
        mean_passage_time: passage_observed.then(|| acc.passage.mean()),
        ci_halfwidth_95: Halfwidths {
            repair_cost_rate: acc.repair.halfwidth_95(),
            download_cost_rate: acc.download.halfwidth_95(),
            total_cost_rate: acc.total.halfwidth_95(),
            pr_d2d_download: acc.d2d_fraction.halfwidth_95(),
            mean_repairs_d2d: acc.repairs_d2d.halfwidth_95(),
            mean_repairs_bs: acc.repairs_bs.halfwidth_95(),
            mean_departures: acc.departures.halfwidth_95(),
            mean_passage_time: passage_observed.then(|| acc.passage.halfwidth_95()),
        },
        intervals_simulated: config.horizon_intervals,
        requests_served: acc.requests,
        requests_d2d: acc.requests_d2d,
        repair_shortfall: acc.shortfall,
        replications: 1,
        seed: config.seed,
        estimator: config.estimator,
    }
}

/// Simulates `horizon_intervals` consecutive repair intervals on stream 0
/// of the configured seed. Confidence half-widths come from the i.i.d.
/// per-interval observations.
pub fn run(config: &SimConfig) -> Result<SimulationResult, SimError> {
    config.validate()?;
    Ok(run_stream(config, 0))
}

/// Runs `replications` independent streams of the same seed in parallel and
/// aggregates their point estimates. Half-widths are Student-t intervals
/// over the replicate estimates.
pub fn replicate(config: &SimConfig) -> Result<SimulationResult, SimError> {
    config.validate()?;
    if config.replications < 2 {
        return Err(SimError::InvalidConfig(
            "replicate needs at least 2 replications".into(),
        ));
    }
    let runs: Vec<SimulationResult> = (0..config.replications)
        .into_par_iter()
        .map(|i| run_stream(config, u64::from(i)))
        .collect();
    Ok(aggregate(config, &runs))
}

fn aggregate(config: &SimConfig, runs: &[SimulationResult]) -> SimulationResult {
    let stats = |f: &dyn Fn(&SimulationResult) -> f64| {
        let mut s = RunningStats::default();
        runs.iter().for_each(|r| s.push(f(r)));
        s
    };
    let repair = stats(&|r| r.repair_cost_rate);
    let download = stats(&|r| r.download_cost_rate);
    let total = stats(&|r| r.total_cost_rate);
    let pr = stats(&|r| r.pr_d2d_download);
    let d2d = stats(&|r| r.mean_repairs_d2d);
    let bs = stats(&|r| r.mean_repairs_bs);
    let departures = stats(&|r| r.mean_departures);
    let passages: Vec<f64> = runs.iter().filter_map(|r| r.mean_passage_time).collect();
    let passage = (passages.len() == runs.len()).then(|| {
        let mut s = RunningStats::default();
        passages.iter().for_each(|&p| s.push(p));
        s
    });

    SimulationResult {
        repair_cost_rate: repair.mean(),
        download_cost_rate: download.mean(),
        total_cost_rate: repair.mean() + download.mean(),
        pr_d2d_download: pr.mean(),
        mean_repairs_d2d: d2d.mean(),
        mean_repairs_bs: bs.mean(),
        mean_departures: departures.mean(),
        mean_passage_time: passage.map(|s| s.mean()),
        ci_halfwidth_95: Halfwidths {
            repair_cost_rate: repair.t_halfwidth_95(),
            download_cost_rate: download.t_halfwidth_95(),
            total_cost_rate: total.t_halfwidth_95(),
            pr_d2d_download: pr.t_halfwidth_95(),
            mean_repairs_d2d: d2d.t_halfwidth_95(),
            mean_repairs_bs: bs.t_halfwidth_95(),
            mean_departures: departures.t_halfwidth_95(),
            mean_passage_time: passage.map(|s| s.t_halfwidth_95()),
        },
        intervals_simulated: runs.iter().map(|r| r.intervals_simulated).sum(),
        requests_served: runs.iter().map(|r| r.requests_served).sum(),
        requests_d2d: runs.iter().map(|r| r.requests_d2d).sum(),
        repair_shortfall: runs.iter().map(|r| r.repair_shortfall).sum(),
        replications: config.replications,
        seed: config.seed,
        estimator: config.estimator,
    }
}

/// Runs [`replicate`] when more than one replication is configured and
/// [`run`] otherwise.
pub fn simulate(config: &SimConfig) -> Result<SimulationResult, SimError> {
    if config.replications > 1 {
        replicate(config)
    } else {
        run(config)
    }
}
