//! Property tests for structural invariants of the model, the barrier pair and
//! the simulators.

use std::f64::consts::PI;

use angbbm::model::{self, ModelParams};
use angbbm::pde;
use angbbm::sim::{self, SimConfig};
use angbbm::Execution;
use proptest::prelude::*;

proptest! {
    #[test]
    fn sin_pow_rate_is_periodic_even_and_bounded(alpha in 0.1f64..4.0, theta in -20.0f64..20.0) {
        let p = ModelParams::sin_pow(alpha).unwrap();
        let b = p.branching_rate(theta);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!((b - p.branching_rate(theta + 2.0 * PI)).abs() < 1e-9);
        prop_assert!((b - p.branching_rate(-theta)).abs() < 1e-12);
    }

    #[test]
    fn pow_clamp_rate_is_bounded(alpha in 0.1f64..4.0, beta in 0.01f64..3.0, theta in -10.0f64..10.0) {
        let p = ModelParams::new(alpha, beta, model::RateFamily::PowClamp).unwrap();
        let b = p.branching_rate(theta);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!(b <= 1.0 - beta * model::wrap_angle(theta).abs().powf(alpha) + 1e-12 || b == 0.0);
    }

    #[test]
    fn wrapped_angle_lies_in_half_open_circle(theta in -1e4f64..1e4) {
        let w = model::wrap_angle(theta);
        prop_assert!(w > -PI - 1e-12 && w <= PI + 1e-12);
        prop_assert!(((theta - w) / (2.0 * PI) - ((theta - w) / (2.0 * PI)).round()).abs() < 1e-6);
    }

    #[test]
    fn sin_pow_rate_increases_with_alpha(a in 0.1f64..3.0, da in 0.0f64..3.0, theta in -PI..PI) {
        let lo = ModelParams::sin_pow(a).unwrap().branching_rate(theta);
        let hi = ModelParams::sin_pow(a + da).unwrap().branching_rate(theta);
        prop_assert!(lo <= hi + 1e-15);
    }

    #[test]
    fn theta1_forms_agree(alpha in 0.05f64..1.95, beta in 0.1f64..10.0, lambda0 in 0.1f64..5.0) {
        let a = model::theta1(alpha, beta, lambda0);
        let b = model::theta1_expanded(alpha, beta, lambda0);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn barriers_sandwich_the_singular_rate(alpha in 0.3f64..2.0, rho in 200.0f64..5000.0, horizon in 0.1f64..0.8, u in 0.0f64..1.0) {
        let (e1, e2) = pde::choose_eps(rho, horizon, alpha).unwrap();
        let b = pde::build_barriers(horizon, e1, e2, alpha).unwrap();
        let t = u * horizon;
        let s = (1.0 - t).powf(-alpha);
        prop_assert!(b.lower_at(t) <= s * (1.0 + 1e-12));
        prop_assert!(b.upper_at(t) >= s * (1.0 - 1e-12));
    }

    #[test]
    fn centering_is_increasing_for_large_t(alpha in 0.2f64..1.9, t in 50.0f64..1e4) {
        let lambda0 = 1.0;
        let c = model::DerivedConstants::new(alpha, 2f64.powf(-alpha), lambda0).unwrap();
        let m0 = model::centering_m(t, &c).unwrap();
        let m1 = model::centering_m(t * 1.01, &c).unwrap();
        prop_assert!(m1 > m0);
        prop_assert!(m0 < std::f64::consts::SQRT_2 * t);
    }
}

/// Kolmogorov distance between a sample and the Exp(rate) law.
fn ks_exponential(mut xs: Vec<f64>, rate: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn thinned_proposals_are_a_poisson_process_at_the_local_rate() {
    let params = ModelParams::sin_pow(1.0).unwrap();
    for theta in [0.0, 1.0, 2.5] {
        let rate = params.branching_rate(theta);
        let events = sim::lineage_events(&params, 77, sim::ROOT_ID, theta, 20_000);
        let proposals: Vec<f64> = events.windows(2).map(|w| w[1].0 - w[0].0).collect();
        let accepted: Vec<f64> = events.iter().filter(|e| e.1).map(|e| e.0).collect();
        let gaps: Vec<f64> = accepted.windows(2).map(|w| w[1] - w[0]).collect();
        // 1.63/√n is the 1% critical value of the Kolmogorov statistic.
        let d = ks_exponential(proposals.clone(), 1.0);
        assert!(
            d < 1.63 / (proposals.len() as f64).sqrt(),
            "θ={theta}: proposals D={d}"
        );
        let d = ks_exponential(gaps.clone(), rate);
        assert!(
            d < 1.63 / (gaps.len() as f64).sqrt(),
            "θ={theta}: accepted D={d}"
        );
    }
}

#[test]
fn replicates_do_not_depend_on_execution_mode() {
    let params = ModelParams::sin_pow(1.0).unwrap();
    let mut cfg = SimConfig::new(4.0, 5);
    cfg.snapshot_times = vec![1.0, 2.0];
    cfg.record_positions = true;
    let par = sim::run_replicates(&params, &cfg, 6, Execution::Parallel).unwrap();
    let seq = sim::run_replicates(&params, &cfg, 6, Execution::Sequential).unwrap();
    assert_eq!(par, seq);
}

#[test]
fn coupled_populations_are_nested_in_alpha() {
    let params = ModelParams::sin_pow(0.5).unwrap();
    let mut cfg = SimConfig::new(5.0, 3);
    cfg.record_positions = true;
    let coupled = sim::run_coupled(
        &params,
        &[0.5, 1.0, 2.0, f64::INFINITY],
        &cfg,
        Execution::Sequential,
    )
    .unwrap();
    assert!(sim::lineage_sets_nested(&coupled.runs));
    let sizes: Vec<usize> = coupled.runs.iter().map(|r| r.population.len()).collect();
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "{sizes:?}");
}

#[test]
fn homogeneous_expected_population_is_exponential() {
    let params = ModelParams::homogeneous();
    let cfg = SimConfig::new(2.0, 11);
    let runs = sim::run_replicates(&params, &cfg, 4000, Execution::default()).unwrap();
    let sizes: Vec<f64> = runs.iter().map(|r| r.population.len() as f64).collect();
    let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
    // Yule process: N_t is geometric with mean e^t and variance e^{2t} − e^t.
    let e = 2f64.exp();
    let se = ((e * e - e) / sizes.len() as f64).sqrt();
    assert!((mean - e).abs() < 4.0 * se, "mean {mean} vs {e} (se {se})");
}

proptest! {
    #[test]
    fn sin_pow_small_angle_expansion(alpha in 0.1f64..4.0, theta in -0.1f64..0.1) {
        // b(θ) = 1 − β|θ|^α + O(θ²) with β = 2^{−α}; the constant 1 is a choice.
        let b = ModelParams::sin_pow(alpha).unwrap().branching_rate(theta);
        prop_assert!((b - 1.0 + (theta / 2.0).abs().powf(alpha)).abs() <= theta * theta);
    }
}
