//! Independent oracles for the closed-form and spectral values the crate
//! relies on. Each reference is computed here from first principles.

use std::f64::consts::{PI, SQRT_2};

use angbbm::acceptance::AIRY_LEVELS;
use angbbm::kernel::AbsMoment;
use angbbm::model::{self, DerivedConstants};
use angbbm::pde;
use angbbm::spectral;
use statrs::function::gamma::gamma;

/// Ai(x) and Ai'(x) from the Maclaurin series; accurate to ~1e-12 for |x| <= 6.
fn airy(x: f64) -> (f64, f64) {
    let c1 = 0.355_028_053_887_817_2;
    let c2 = 0.258_819_403_792_806_8;
    // f = Σ a_k x^{3k}, g = Σ b_k x^{3k+1} with a_{k+1} = a_k / ((3k+2)(3k+3)), b_{k+1} = b_k / ((3k+3)(3k+4)).
    let (mut f, mut df, mut g, mut dg) = (0.0, 0.0, 0.0, 0.0);
    let (mut a, mut b) = (1.0, 1.0);
    for k in 0..60 {
        let n = 3 * k;
        f += a * x.powi(n);
        if n > 0 {
            df += a * n as f64 * x.powi(n - 1);
        }
        g += b * x.powi(n + 1);
        dg += b * (n + 1) as f64 * x.powi(n);
        a /= ((n + 2) * (n + 3)) as f64;
        b /= ((n + 3) * (n + 4)) as f64;
    }
    (c1 * f - c2 * g, c1 * df - c2 * dg)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) < 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Levels of -f'' + |x| f: even states sit at zeros of Ai'(-λ), odd ones at zeros of Ai(-λ).
fn linear_levels(n: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let step = 0.01;
    let mut x = step;
    while roots.len() < n {
        let (a0, d0) = airy(-x);
        let (a1, d1) = airy(-(x + step));
        if d0 * d1 < 0.0 {
            roots.push(bisect(|l| airy(-l).1, x, x + step));
        }
        if a0 * a1 < 0.0 {
            roots.push(bisect(|l| airy(-l).0, x, x + step));
        }
        x += step;
    }
    roots.sort_by(f64::total_cmp);
    roots.truncate(n);
    roots
}

#[test]
fn frozen_airy_levels_match_series_oracle() {
    let oracle = linear_levels(3);
    for (want, got) in oracle.iter().zip(AIRY_LEVELS) {
        assert!((want - got).abs() < 1e-9, "{want} vs {got}");
    }
}

#[test]
fn linear_potential_spectrum_matches_airy_zeros() {
    let oracle = linear_levels(6);
    let sys = spectral::solve_spectrum(1.0, 6, 1e-9).unwrap();
    for (n, want) in oracle.iter().enumerate() {
        let err = (sys.eigenvalues[n] - want).abs();
        assert!(err < 1e-6, "level {n}: {} vs {want}", sys.eigenvalues[n]);
    }
}

#[test]
fn quadratic_transport_matrix_matches_ladder_operators() {
    // With x d/dx = (a² − a†² − 1)/2, the entry <φ_j, (1/2 + x d/dx) φ_i> / 4 is
    // (√(i(i−1)) δ_{j,i−2} − √((i+1)(i+2)) δ_{j,i+2}) / 8.
    let n = 6;
    let sys = spectral::solve_spectrum(2.0, n, 1e-9).unwrap();
    let mats = pde::galerkin_matrices(&sys, n).unwrap();
    // Hermite functions are positive far to the right; align signs with that convention.
    let sign: Vec<f64> = (0..n)
        .map(|k| sys.phi(k, (2.0 * k as f64 + 1.0).sqrt() + 2.5).signum())
        .collect();
    for i in 0..n {
        for j in 0..n {
            let fi = i as f64;
            let mut want = 0.0;
            if j + 2 == i {
                want = (fi * (fi - 1.0)).sqrt() / 8.0;
            }
            if j == i + 2 {
                want = -((fi + 1.0) * (fi + 2.0)).sqrt() / 8.0;
            }
            let got = mats.a[(i, j)] * sign[i] * sign[j];
            assert!(
                (got - want).abs() < 1e-5,
                "A[{i}][{j}] = {got}, want {want}"
            );
        }
    }
    assert!((mats.a[(0, 2)] * sign[0] * sign[2] + SQRT_2 / 8.0).abs() < 1e-6);
}

#[test]
fn centering_matches_direct_arithmetic() {
    let lambda0 = AIRY_LEVELS[0];
    let c = DerivedConstants::new(1.0, 1.0, lambda0).unwrap();
    let t: f64 = 1000.0;
    // κ = 2/3, ϑ₁ = 3 λ₀ 2^{−2/3}, log coefficient 3/(2√2) − 1/(6√2).
    let theta1 = 3.0 * lambda0 * 2f64.powf(-2.0 / 3.0);
    let want = SQRT_2 * t
        - theta1 / SQRT_2 * t.cbrt()
        - (3.0 / (2.0 * SQRT_2) - 1.0 / (6.0 * SQRT_2)) * t.ln();
    let got = model::centering_m(t, &c).unwrap();
    assert!((got - want).abs() < 1e-9);
    assert!((got - 1394.086).abs() < 1e-3, "m(1000) = {got}");
}

#[test]
fn theta_constants_from_definitions() {
    for (alpha, beta) in [(0.5, 1.0), (1.0, 0.5), (1.5, 2.0)] {
        let lambda0 = spectral::solve_spectrum(alpha, 1, 1e-7)
            .unwrap()
            .eigenvalues[0];
        let c = DerivedConstants::new(alpha, beta, lambda0).unwrap();
        let kappa = 2.0 * alpha / (2.0 + alpha);
        assert!((c.kappa - kappa).abs() < 1e-15);
        let theta1 = lambda0 * (beta / 2f64.powf(alpha)).powf(2.0 / (2.0 + alpha)) / (1.0 - kappa);
        assert!((c.theta1 - theta1).abs() < 1e-12 * theta1);
        assert!((c.theta2 - (2.0 * beta).powf(1.0 / (2.0 + alpha))).abs() < 1e-15);
    }
}

#[test]
fn absolute_moment_at_zero_mean_uses_gamma() {
    for alpha in [0.25, 0.5, 1.0, 1.5, 2.0, 3.0] {
        let want = 2f64.powf(alpha / 2.0) * gamma((alpha + 1.0) / 2.0) / PI.sqrt();
        let got = AbsMoment::new(alpha).eval(0.0, 1.0);
        assert!(
            (got - want).abs() < 1e-12 * want,
            "α={alpha}: {got} vs {want}"
        );
    }
    // E|N(m, 1)| = √(2/π) e^{−m²/2} + m erf(m/√2).
    for m in [0.3f64, 1.0, 2.5, 6.0, 9.0] {
        let want =
            (2.0 / PI).sqrt() * (-0.5 * m * m).exp() + m * statrs::function::erf::erf(m / SQRT_2);
        let got = AbsMoment::new(1.0).eval(m, 1.0);
        assert!((got - want).abs() < 1e-10 * want, "m={m}: {got} vs {want}");
    }
}

#[test]
fn singular_rate_integral_matches_quadrature() {
    let (kappa, horizon) = (2.0 / 3.0, 0.9);
    let n = 200_000;
    // Midpoint rule on ∫₀^T (1−s)^{−κ} ds.
    let h = horizon / n as f64;
    let quad: f64 = (0..n)
        .map(|i| (1.0 - (i as f64 + 0.5) * h).powf(-kappa) * h)
        .sum();
    let got = model::integral_singular_rate(kappa, horizon);
    assert!((got - quad).abs() < 1e-7, "{got} vs {quad}");
}
