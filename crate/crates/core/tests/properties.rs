use cellstore::analytic::{self, expected_repairs};
use cellstore::experiments::{self, find_delta_max, find_optimal_delta, sweep_delta};
use cellstore::model::reference_codes;
use cellstore::{Engine, NetworkParams, StorageCode};
use proptest::prelude::*;

const MU: f64 = 50.0;

fn params() -> NetworkParams {
    NetworkParams::default()
}

fn access() -> impl Strategy<Value = (u32, u32)> {
    (1u32..=14).prop_flat_map(|n| (Just(n), 1..=n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn repairs_telescope_to_expected_departures(
        (n, r) in access(),
        mu_delta in 1e-6f64..30.0,
    ) {
        let split = expected_repairs(n, r, MU, mu_delta / MU).unwrap();
        let expected = f64::from(n) * (1.0 - (-mu_delta).exp());
        prop_assert!((split.total() - expected).abs() <= 1e-12 * f64::from(n).max(1.0));
        prop_assert!(split.d2d >= 0.0 && split.bs >= 0.0);
    }

    #[test]
    fn d2d_probability_is_a_decreasing_probability(
        (n, h) in access(),
        a in 1e-6f64..20.0,
        b in 1e-6f64..20.0,
    ) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p_lo = analytic::d2d_download_probability(n, h, MU, lo / MU).unwrap();
        let p_hi = analytic::d2d_download_probability(n, h, MU, hi / MU).unwrap();
        prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
        prop_assert!(p_hi <= p_lo + 1e-12, "{p_hi} > {p_lo}");
    }

    #[test]
    fn d2d_probability_near_one_for_tiny_intervals((n, h) in access()) {
        let p = analytic::d2d_download_probability(n, h, MU, 1e-8 / MU).unwrap();
        prop_assert!(p > 1.0 - 1e-6);
    }

    #[test]
    fn download_cost_between_all_d2d_and_all_bs(
        code_idx in 0usize..6,
        mu_delta in 1e-5f64..50.0,
    ) {
        let p = params();
        let code = reference_codes(1.0)[code_idx];
        let d = analytic::download_cost(&code, &p, mu_delta / MU).unwrap();
        let all_d2d = analytic::limit_delta_zero(&code, &p).download;
        let all_bs = p.bs_only_cost();
        let (lo, hi) = (all_d2d.min(all_bs), all_d2d.max(all_bs));
        prop_assert!(d >= lo * (1.0 - 1e-12) && d <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn hypoexp_pdf_is_nonnegative((n, h) in (1u32..=12).prop_flat_map(|n| (Just(n), 1..=n))) {
        let mean = analytic::hypoexp_mean(n, h, MU);
        for j in 0..10_000 {
            let t = 30.0 * mean * f64::from(j) / 10_000.0;
            let f = analytic::hypoexp_pdf(n, h, MU, t).unwrap();
            prop_assert!(f >= 0.0, "pdf({t}) = {f}");
        }
    }

    #[test]
    fn msr_at_r_equals_k_is_mds(
        n in 2u32..=14,
        k_frac in 0.0f64..1.0,
        mu_delta in 1e-4f64..20.0,
    ) {
        let k = 1 + ((f64::from(n - 1) * k_frac) as u32).min(n - 2);
        let msr = StorageCode::msr(n, k, k, 1.0).unwrap();
        let mds = StorageCode::mds(n, k, 1.0).unwrap();
        prop_assert_eq!(msr.alpha(), mds.alpha());
        prop_assert_eq!(msr.gamma_d2d(), mds.gamma_d2d());
        let p = params();
        let a = analytic::total_cost(&msr, &p, mu_delta / MU).unwrap();
        let b = analytic::total_cost(&mds, &p, mu_delta / MU).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn delta_max_straddles_the_bs_cost(code_idx in 0usize..6, rho in 5.0f64..1000.0) {
        let p = params().with_rho_bs(rho).unwrap();
        let code = reference_codes(1.0)[code_idx];
        let tol = 1e-7;
        let res = find_delta_max(&code, &p, tol).unwrap();
        if let (Some(d), false) = (res.delta_max, res.censored) {
            let below = analytic::total_cost(&code, &p, d - 10.0 * tol).unwrap().total;
            let above = analytic::total_cost(&code, &p, d + 10.0 * tol).unwrap().total;
            prop_assert!(below < p.bs_only_cost(), "{below} at Δmax − 10 tol");
            prop_assert!(above > p.bs_only_cost(), "{above} at Δmax + 10 tol");
        }
    }

    #[test]
    fn optimum_is_no_worse_than_the_scan(code_idx in 0usize..6, rho in 5.0f64..1000.0) {
        let p = params().with_rho_bs(rho).unwrap();
        let code = reference_codes(1.0)[code_idx];
        let best = find_optimal_delta(&code, &p, 1e-7).unwrap();
        prop_assert!(!best.scan.is_empty());
        for &(delta, total) in &best.scan {
            prop_assert!(best.cost_star.total <= total, "scan {delta}: {total}");
        }
    }
}

// The Δ→0 correction is linear in μΔ; at 1e-7 every reference code is within
// 1e-3 of the limit.
#[test]
fn near_zero_interval_matches_instantaneous_repair() {
    let p = params();
    for code in reference_codes(1.0) {
        let exact = analytic::total_cost(&code, &p, 1e-7 / MU).unwrap().total;
        let limit = analytic::limit_delta_zero(&code, &p).total;
        let gap = (exact - limit).abs() / limit;
        assert!(gap < 1e-3, "{}: {gap}", code.label());
    }
}

#[test]
fn near_zero_gap_shrinks_linearly() {
    let p = params();
    for code in reference_codes(1.0) {
        let limit = analytic::limit_delta_zero(&code, &p).total;
        let gap = |md: f64| (analytic::total_cost(&code, &p, md / MU).unwrap().total - limit).abs();
        let ratio = gap(1e-6) / gap(1e-7);
        assert!((ratio - 10.0).abs() < 0.2, "{}: {ratio}", code.label());
    }
}

#[test]
fn sweep_rho_is_monotone_in_rho() {
    let p = params();
    let codes = reference_codes(1.0);
    let rhos = experiments::logspace(1.0, 1000.0, 25);
    let rows = experiments::sweep_rho(&codes, &p, &rhos, 1e-7).unwrap();
    for code in &codes {
        let series: Vec<f64> = rows
            .iter()
            .filter(|r| r.code == code.label())
            .map(|r| r.mu_delta_max.unwrap_or(0.0))
            .collect();
        assert_eq!(series.len(), rhos.len());
        for w in series.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "{}: {series:?}", code.label());
        }
    }
}

#[test]
fn msr_r2_curve_equals_mds_curve() {
    let p = params();
    let grid = experiments::logspace(1e-4 / MU, 20.0 / MU, 200);
    let msr = StorageCode::msr(10, 2, 2, 1.0).unwrap();
    let mds = StorageCode::mds(10, 2, 1.0).unwrap();
    let a = sweep_delta(&msr, &p, &grid, Engine::Analytic).unwrap();
    let b = sweep_delta(&mds, &p, &grid, Engine::Analytic).unwrap();
    assert_eq!(a.rows, b.rows);
}
