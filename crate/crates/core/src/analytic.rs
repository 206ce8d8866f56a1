//! Closed-form expected costs under periodic repair.
//!
//! Within one repair interval the storage-node count is a pure death process
//! started at `n` with rate `iμ` in state `i`. The repair cost follows from
//! the binomial number of survivors at the epoch; the download cost from the
//! time-averaged probability that at least `h` storage nodes are present.
//!
//! The death-process coefficients `Π_{j≠i} μ_j/(μ_j − μ_i)` do not depend on
//! `μ` and reduce to the signed integers `(−1)^{i−h}·C(n,i)·C(i−1,h−1)`, so
//! they are built exactly in integer arithmetic. What remains is an
//! alternating sum of exponentials, evaluated with compensated summation.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::model::{NetworkParams, StorageCode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("repair interval is zero; use the instantaneous-repair limit")]
    ZeroInterval,
    #[error("limit undefined: {0}")]
    LimitUndefined(&'static str),
    #[error("numerical instability in {what}: correction {correction:e} exceeds tolerance")]
    NumericalInstability { what: &'static str, correction: f64 },
}

/// Largest clamp correction tolerated before a result is reported unstable.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

// A-priori rounding bound (relative to unit-scale results) beyond which the
// alternating sums are not trusted at all.
const ROUNDING_BOUND_LIMIT: f64 = 1e-6;

/// Tail bound at which the wrapped Erlang series is truncated.
pub const SERIES_TAIL_TOLERANCE: f64 = 1e-14;

const MAX_SERIES_TERMS: usize = 10_000_000;

/// Expected repair/download/total cost rates in `c.u./(bit·t.u.)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub repair: f64,
    pub download: f64,
    pub total: f64,
    /// `total / (N·ω·ρ_BS)`; 1 means "as expensive as BS-only delivery".
    pub normalized_total: f64,
}

impl CostBreakdown {
    pub fn new(repair: f64, download: f64, params: &NetworkParams) -> Self {
        let total = repair + download;
        Self {
            repair,
            download,
            total,
            normalized_total: total / params.bs_only_cost(),
        }
    }
}

/// Expected number of nodes repaired per interval, split by repair source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepairSplit {
    pub d2d: f64,
    pub bs: f64,
    /// Per-node survival probability over one interval, `e^{−μΔ}`.
    pub survival: f64,
}

impl RepairSplit {
    pub fn total(&self) -> f64 {
        self.d2d + self.bs
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
    abs_sum: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs_sum += x.abs();
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    /// Conservative rounding bound of the accumulated terms.
    fn rounding_bound(&self) -> f64 {
        4.0 * f64::EPSILON * self.abs_sum
    }
}

fn check_unit(name: &'static str, p: f64) -> Result<(), AnalyticError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(AnalyticError::InvalidArgument(format!(
            "{name} must lie in [0, 1], got {p}"
        )))
    }
}

fn check_non_negative(name: &'static str, x: f64) -> Result<(), AnalyticError> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(AnalyticError::InvalidArgument(format!(
            "{name} must be finite and non-negative, got {x}"
        )))
    }
}

fn check_access(n: u32, h: u32) -> Result<(), AnalyticError> {
    if h == 0 || h > n {
        Err(AnalyticError::InvalidArgument(format!(
            "access count must satisfy 1 <= h <= n (n={n}, h={h})"
        )))
    } else {
        Ok(())
    }
}

fn ln_choose(n: u32, i: u32) -> f64 {
    let i = i.min(n - i);
    (1..=i)
        .map(|j| (f64::from(n - i + j) / f64::from(j)).ln())
        .sum()
}

/// Binomial probability `C(n,i)·p^i·(1−p)^{n−i}`, evaluated in log space.
pub fn binomial_pmf(i: u32, n: u32, p: f64) -> Result<f64, AnalyticError> {
    if i > n {
        return Err(AnalyticError::InvalidArgument(format!(
            "binomial index {i} exceeds n = {n}"
        )));
    }
    check_unit("p", p)?;
    if p == 0.0 {
        return Ok(if i == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if i == n { 1.0 } else { 0.0 });
    }
    let log_pmf = ln_choose(n, i) + f64::from(i) * p.ln() + f64::from(n - i) * (-p).ln_1p();
    Ok(log_pmf.exp())
}

/// Expected number of D2D and BS repairs per interval for `n` storage nodes
/// with repair access `r`.
pub fn expected_repairs(n: u32, r: u32, mu: f64, delta: f64) -> Result<RepairSplit, AnalyticError> {
    check_access(n, r)?;
    check_non_negative("mu", mu)?;
    check_non_negative("delta", delta)?;
    let survival = (-mu * delta).exp();
    let mut d2d = CompensatedSum::default();
    let mut bs = CompensatedSum::default();
    for i in 0..=n {
        let repairs = f64::from(n - i) * binomial_pmf(i, n, survival)?;
        if i >= r {
            d2d.add(repairs);
        } else {
            bs.add(repairs);
        }
    }
    Ok(RepairSplit {
        d2d: d2d.value(),
        bs: bs.value(),
        survival,
    })
}

/// Expected repair cost rate for repair interval `delta > 0`.
pub fn repair_cost(
    code: &StorageCode,
    params: &NetworkParams,
    delta: f64,
) -> Result<f64, AnalyticError> {
    check_non_negative("delta", delta)?;
    if delta == 0.0 {
        return Err(AnalyticError::ZeroInterval);
    }
    let split = expected_repairs(code.n(), code.r(), params.departure_rate(), delta)?;
    let per_interval = params.rho_bs() * code.gamma_bs() * split.bs
        + params.rho_d2d() * code.gamma_d2d() * split.d2d;
    Ok(per_interval / (params.file_size() * delta))
}

/// Signed coefficients `Π_{j=h, j≠i}^{n} j/(j − i)` for `i = h..=n`.
///
/// Each equals `(−1)^{i−h}·C(n,i)·C(i−1,h−1)`.
pub fn death_process_weights(n: u32, h: u32) -> Result<Vec<f64>, AnalyticError> {
    check_access(n, h)?;
    fn choose(n: u32, k: u32) -> Option<i128> {
        let k = k.min(n - k);
        let mut acc: i128 = 1;
        for j in 1..=k {
            acc = acc.checked_mul(i128::from(n - k + j))? / i128::from(j);
        }
        Some(acc)
    }
    (h..=n)
        .map(|i| {
            let magnitude = choose(n, i)
                .and_then(|a| choose(i - 1, h - 1).and_then(|b| a.checked_mul(b)))
                .ok_or_else(|| {
                    AnalyticError::InvalidArgument(format!(
                        "death-process coefficients overflow for n = {n}"
                    ))
                })?;
            let sign = if (i - h).is_multiple_of(2) { 1.0 } else { -1.0 };
            Ok(sign * magnitude as f64)
        })
        .collect()
}

fn clamp_unit(what: &'static str, raw: f64, bound: f64) -> Result<f64, AnalyticError> {
    if !raw.is_finite() {
        return Err(AnalyticError::NumericalInstability {
            what,
            correction: f64::INFINITY,
        });
    }
    if bound > ROUNDING_BOUND_LIMIT {
        return Err(AnalyticError::NumericalInstability {
            what,
            correction: bound,
        });
    }
    let clamped = raw.clamp(0.0, 1.0);
    let correction = (raw - clamped).abs();
    if correction > CLAMP_TOLERANCE {
        return Err(AnalyticError::NumericalInstability { what, correction });
    }
    Ok(clamped)
}

/// Time-averaged probability, over one repair interval, that at least `h`
/// of the `n` storage nodes are present: the probability that a request
/// arriving uniformly in the interval is served device-to-device.
///
/// `delta = 0` returns the instantaneous-repair limit 1, as does `mu = 0`.
pub fn d2d_download_probability(n: u32, h: u32, mu: f64, delta: f64) -> Result<f64, AnalyticError> {
    check_access(n, h)?;
    check_non_negative("mu", mu)?;
    check_non_negative("delta", delta)?;
    if delta == 0.0 || mu == 0.0 {
        return Ok(1.0);
    }
    let weights = death_process_weights(n, h)?;
    let mut sum = CompensatedSum::default();
    for (i, w) in (h..=n).zip(weights) {
        let x = f64::from(i) * mu * delta;
        // (1 − p_i)/(μ_i Δ), stable for small x
        let averaged_survival = -(-x).exp_m1() / x;
        sum.add(w * averaged_survival);
    }
    clamp_unit(
        "d2d_download_probability",
        sum.value(),
        sum.rounding_bound(),
    )
}

/// Expected download cost rate.
pub fn download_cost(
    code: &StorageCode,
    params: &NetworkParams,
    delta: f64,
) -> Result<f64, AnalyticError> {
    check_non_negative("delta", delta)?;
    if delta == 0.0 {
        return Err(AnalyticError::ZeroInterval);
    }
    let pr_d2d = d2d_download_probability(code.n(), code.h(), params.departure_rate(), delta)?;
    let d2d_cost = params.rho_d2d() * code.download_bits() / params.file_size();
    Ok(params.aggregate_request_rate() * (params.rho_bs() + (d2d_cost - params.rho_bs()) * pr_d2d))
}

/// Expected repair, download and total cost rate; `delta = 0` is routed to
/// [`limit_delta_zero`].
pub fn total_cost(
    code: &StorageCode,
    params: &NetworkParams,
    delta: f64,
) -> Result<CostBreakdown, AnalyticError> {
    check_non_negative("delta", delta)?;
    if delta == 0.0 {
        return Ok(limit_delta_zero(code, params));
    }
    Ok(CostBreakdown::new(
        repair_cost(code, params, delta)?,
        download_cost(code, params, delta)?,
        params,
    ))
}

/// Cost of instantaneous repair: every repair and download is D2D.
pub fn limit_delta_zero(code: &StorageCode, params: &NetworkParams) -> CostBreakdown {
    let scale = params.rho_d2d() / params.file_size();
    let repair = scale * f64::from(code.n()) * params.departure_rate() * code.gamma_d2d();
    let download = scale * params.aggregate_request_rate() * code.download_bits();
    CostBreakdown::new(repair, download, params)
}

/// Cost as the repair interval grows without bound: BS-only delivery.
pub fn limit_delta_infinity(params: &NetworkParams) -> Result<f64, AnalyticError> {
    if params.departure_rate() == 0.0 {
        return Err(AnalyticError::LimitUndefined(
            "without departures storage nodes never vanish",
        ));
    }
    Ok(params.bs_only_cost())
}

/// Density of the time `S_h` at which the storage count first drops below
/// `h`, starting from `n` nodes (a hypoexponential with rates `iμ`,
/// `i = h..=n`).
pub fn hypoexp_pdf(n: u32, h: u32, mu: f64, t: f64) -> Result<f64, AnalyticError> {
    check_access(n, h)?;
    check_non_negative("t", t)?;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(AnalyticError::InvalidArgument(format!(
            "mu must be positive, got {mu}"
        )));
    }
    let weights = death_process_weights(n, h)?;
    let mut sum = CompensatedSum::default();
    for (i, w) in (h..=n).zip(weights) {
        let rate = f64::from(i) * mu;
        sum.add(w * rate * (-rate * t).exp());
    }
    let scale = f64::from(n) * mu;
    let raw = sum.value() / scale;
    clamp_density("hypoexp_pdf", raw, sum.rounding_bound() / scale).map(|v| v * scale)
}

fn clamp_density(what: &'static str, raw: f64, bound: f64) -> Result<f64, AnalyticError> {
    if !raw.is_finite() || bound > ROUNDING_BOUND_LIMIT {
        return Err(AnalyticError::NumericalInstability {
            what,
            correction: bound,
        });
    }
    if raw < -CLAMP_TOLERANCE {
        return Err(AnalyticError::NumericalInstability {
            what,
            correction: -raw,
        });
    }
    Ok(raw.max(0.0))
}

/// `Pr(S_h > t)`: probability that at least `h` storage nodes remain at
/// time `t` after a repair epoch.
pub fn hypoexp_survival(n: u32, h: u32, mu: f64, t: f64) -> Result<f64, AnalyticError> {
    check_access(n, h)?;
    check_non_negative("t", t)?;
    check_non_negative("mu", mu)?;
    let weights = death_process_weights(n, h)?;
    let mut sum = CompensatedSum::default();
    for (i, w) in (h..=n).zip(weights) {
        sum.add(w * (-f64::from(i) * mu * t).exp());
    }
    clamp_unit("hypoexp_survival", sum.value(), sum.rounding_bound())
}

/// Mean of `S_h`: the sum of the stage means `1/(iμ)`.
pub fn hypoexp_mean(n: u32, h: u32, mu: f64) -> f64 {
    (h..=n).map(|i| 1.0 / (f64::from(i) * mu)).sum()
}

/// Erlang(`l`, `omega`) density: time of the `l`-th arrival of a Poisson
/// process with rate `omega`.
pub fn erlang_pdf(l: u32, omega: f64, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if l == 1 { omega } else { 0.0 };
    }
    let lf = f64::from(l);
    (lf * omega.ln() + (lf - 1.0) * x.ln() - omega * x - ln_gamma(lf)).exp()
}

/// `Pr(W_l > x)` for the Erlang(`l`, `omega`) arrival time.
fn erlang_survival(l: u32, omega: f64, x: f64) -> f64 {
    let wx = omega * x;
    if wx == 0.0 {
        return 1.0;
    }
    let log_wx = wx.ln();
    (0..l)
        .map(|m| {
            let mf = f64::from(m);
            (mf * log_wx - wx - ln_gamma(mf + 1.0)).exp()
        })
        .sum::<f64>()
        .min(1.0)
}

/// Density of the `l`-th request time folded into one repair interval,
/// `W_l mod Δ`, at `t ∈ [0, Δ)`.
///
/// The infinite fold is truncated once the remaining terms are bounded by
/// [`SERIES_TAIL_TOLERANCE`]: past the Erlang mode the terms decrease, so the
/// remainder is at most `Pr(W_l > x)/Δ`.
pub fn wrapped_erlang_pdf(l: u32, omega: f64, delta: f64, t: f64) -> Result<f64, AnalyticError> {
    if l == 0 {
        return Err(AnalyticError::InvalidArgument(
            "request index l must be at least 1".into(),
        ));
    }
    if !(omega.is_finite() && omega > 0.0) || !(delta.is_finite() && delta > 0.0) {
        return Err(AnalyticError::InvalidArgument(format!(
            "omega and delta must be positive (omega={omega}, delta={delta})"
        )));
    }
    if !(0.0..delta).contains(&t) {
        return Err(AnalyticError::InvalidArgument(format!(
            "t = {t} outside [0, {delta})"
        )));
    }
    let mode = f64::from(l - 1) / omega;
    let mut sum = CompensatedSum::default();
    for i in 0..MAX_SERIES_TERMS {
        let x = t + i as f64 * delta;
        sum.add(erlang_pdf(l, omega, x));
        if x >= mode && erlang_survival(l, omega, x) / delta < SERIES_TAIL_TOLERANCE {
            return Ok(sum.value());
        }
    }
    Err(AnalyticError::NumericalInstability {
        what: "wrapped_erlang_pdf",
        correction: f64::INFINITY,
    })
}
