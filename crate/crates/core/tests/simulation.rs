use cellstore::analytic;
use cellstore::model::reference_codes;
use cellstore::simulate::{run, simulate};
use cellstore::{Estimator, NetworkParams, SimConfig, StorageCode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

const MU: f64 = 50.0;
const Z99: f64 = 2.575_829_303_548_901;
const Z95: f64 = 1.959_963_984_540_054;

fn config(code: StorageCode, mu_delta: f64, horizon: u64, seed: u64) -> SimConfig {
    SimConfig {
        horizon_intervals: horizon,
        seed,
        ..SimConfig::new(code, NetworkParams::default(), mu_delta / MU)
    }
}

#[test]
fn d2d_share_within_99_percent_ci() {
    for (ci, code) in reference_codes(1.0).into_iter().enumerate() {
        for (di, mu_delta) in [0.05, 0.2, 0.5, 1.0].into_iter().enumerate() {
            let seed = 500 + 10 * ci as u64 + di as u64;
            let r = run(&config(code, mu_delta, 20_000, seed)).unwrap();
            let exact =
                analytic::d2d_download_probability(code.n(), code.h(), MU, mu_delta / MU).unwrap();
            let hw99 = r.ci_halfwidth_95.pr_d2d_download * Z99 / Z95;
            let gap = (r.pr_d2d_download - exact).abs();
            if hw99 > 0.0 {
                assert!(
                    gap <= hw99,
                    "{} μΔ={mu_delta}: {gap:e} > {hw99:e}",
                    code.label()
                );
            } else {
                // No BS download observed; the one-sided 99% bound for a zero
                // count is about 4.6 / requests.
                assert_eq!(r.pr_d2d_download, 1.0);
                let bound = 4.61 / r.requests_served as f64;
                assert!(1.0 - exact <= bound, "{} μΔ={mu_delta}", code.label());
            }
        }
    }
}

#[test]
fn departures_and_passage_time_match_theory() {
    for code in reference_codes(1.0) {
        let mu_delta = 0.5;
        let r = run(&config(code, mu_delta, 20_000, 41)).unwrap();
        let n = f64::from(code.n());
        let expected = n * (1.0 - f64::exp(-mu_delta));
        let hw = r.ci_halfwidth_95.mean_departures * Z99 / Z95;
        assert!(
            (r.mean_departures - expected).abs() <= hw,
            "{}",
            code.label()
        );

        let passage = r
            .mean_passage_time
            .expect("direct estimator observes passages");
        let hw = r.ci_halfwidth_95.mean_passage_time.unwrap() * Z99 / Z95;
        let expected = analytic::hypoexp_mean(code.n(), code.h(), MU);
        assert!(
            (passage - expected).abs() <= hw,
            "{}: {passage} vs {expected}",
            code.label()
        );
    }
}

#[test]
fn ci_shrinks_like_inverse_sqrt_horizon() {
    let code = StorageCode::mds(10, 2, 1.0).unwrap();
    let short = run(&config(code, 0.5, 20_000, 3)).unwrap();
    let long = run(&config(code, 0.5, 40_000, 3)).unwrap();
    let ratio = long.ci_halfwidth_95.total_cost_rate / short.ci_halfwidth_95.total_cost_rate;
    let target = std::f64::consts::FRAC_1_SQRT_2;
    assert!((ratio / target - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn single_node_availability() {
    let code = StorageCode::mds(1, 1, 1.0).unwrap();
    let r = run(&config(code, 1.0, 20_000, 9)).unwrap();
    assert!(
        (r.pr_d2d_download - (1.0 - f64::exp(-1.0))).abs() < 0.01,
        "{}",
        r.pr_d2d_download
    );
}

#[test]
fn mds_mean_repairs() {
    let code = StorageCode::mds(10, 2, 1.0).unwrap();
    let r = run(&config(code, 0.5, 20_000, 5)).unwrap();
    let repairs = r.mean_repairs_d2d + r.mean_repairs_bs;
    assert!((repairs - 3.935).abs() < 0.05, "{repairs}");
}

#[test]
fn replicated_runs_agree_with_analytic_cost() {
    let cases = [
        (StorageCode::mds(10, 2, 1.0).unwrap(), 0.5),
        (StorageCode::mbr(10, 3, 9, 1.0).unwrap(), 0.1),
    ];
    for (code, mu_delta) in cases {
        let cfg = SimConfig {
            replications: 20,
            ..config(code, mu_delta, 2000, 77)
        };
        let r = simulate(&cfg).unwrap();
        let exact = analytic::total_cost(&code, &cfg.params, cfg.delta)
            .unwrap()
            .total;
        let hw = r.ci_halfwidth_95.total_cost_rate;
        assert!(
            (r.total_cost_rate - exact).abs() <= 3.0 * hw,
            "{}: {} vs {exact} (hw {hw})",
            code.label(),
            r.total_cost_rate
        );
    }
}

#[test]
fn weighted_and_direct_estimators_agree() {
    let code = StorageCode::msr(10, 2, 5, 1.0).unwrap();
    let direct = simulate(&SimConfig {
        replications: 10,
        ..config(code, 0.2, 4000, 13)
    })
    .unwrap();
    let weighted = simulate(&SimConfig {
        replications: 10,
        estimator: Estimator::Weighted,
        ..config(code, 0.2, 4000, 13)
    })
    .unwrap();
    let hw = direct.ci_halfwidth_95.total_cost_rate + weighted.ci_halfwidth_95.total_cost_rate;
    assert!((direct.total_cost_rate - weighted.total_cost_rate).abs() <= 2.0 * hw);
}

// Oracles below sample lifetimes directly, without the simulator.

fn lifetimes(rng: &mut ChaCha8Rng, n: u32) -> Vec<f64> {
    let exp = Exp::new(MU).unwrap();
    (0..n).map(|_| exp.sample(rng)).collect()
}

#[test]
fn repair_cost_matches_brute_force() {
    let params = NetworkParams::default();
    let delta = 0.1 / MU;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for code in reference_codes(1.0) {
        let samples = 200_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let survivors = lifetimes(&mut rng, code.n())
                .into_iter()
                .filter(|&l| l >= delta)
                .count() as u32;
            let lost = f64::from(code.n() - survivors);
            let per_bit = if survivors >= code.r() {
                params.rho_d2d() * code.gamma_d2d()
            } else {
                params.rho_bs() * code.gamma_bs()
            };
            let c = lost * per_bit / (params.file_size() * delta);
            sum += c;
            sum_sq += c * c;
        }
        let mean = sum / samples as f64;
        let sd = ((sum_sq / samples as f64 - mean * mean) / samples as f64).sqrt();
        let exact = analytic::repair_cost(&code, &params, delta).unwrap();
        assert!(
            (mean - exact).abs() <= 4.0 * sd,
            "{}: {mean} vs {exact}",
            code.label()
        );
    }
}

#[test]
fn d2d_probability_matches_brute_force() {
    let (n, h, mu_delta) = (10, 2, 0.5);
    let delta = mu_delta / MU;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let samples = 1_000_000;
    let mut misses = 0u64;
    for _ in 0..samples {
        let t = rng.random::<f64>() * delta;
        let alive = lifetimes(&mut rng, n)
            .into_iter()
            .filter(|&l| l > t)
            .count() as u32;
        if alive < h {
            misses += 1;
        }
    }
    let miss = misses as f64 / samples as f64;
    let exact = 1.0 - analytic::d2d_download_probability(n, h, MU, delta).unwrap();
    let sd = (exact * (1.0 - exact) / samples as f64).sqrt();
    assert!((miss - exact).abs() <= 4.0 * sd, "{miss} vs {exact}");
}
