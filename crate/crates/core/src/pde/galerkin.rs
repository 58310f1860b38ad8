//! Coefficients of the renormalised solution in the moving eigenbasis
//! `φ_{q(t),n}` and their evolution `c' = (−ϱ q^{2/(2+α)} D + (q'/q) A) c`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::barriers::{build_barriers, choose_eps, Side};
use super::Schedule;
use crate::error::{Error, Result};
use crate::numeric;
use crate::spectral::EigenSystem;

/// Diagonal D = (λ_i − λ_0) and antisymmetric A for the first `n` levels.
#[derive(Clone, Debug)]
pub struct GalerkinMatrices {
    pub alpha: f64,
    /// Eigenvalues at q = 1.
    pub lambdas: Vec<f64>,
    pub d: Vec<f64>,
    pub a: DMatrix<f64>,
    /// max |A_raw + A_rawᵀ| before antisymmetrisation.
    pub defect: f64,
}

/// Fourth-order centred derivative of uniformly spaced samples (zero at the two
/// outermost points on each side, where the eigenfunctions have decayed).
fn derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        d[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h);
    }
    d
}

const DEFECT_LIMIT: f64 = 1e-5;

pub fn galerkin_matrices(sys: &EigenSystem, n: usize) -> Result<GalerkinMatrices> {
    if n == 0 || n > sys.len() {
        return Err(Error::domain(format!(
            "need 1 <= N <= {} levels, got N = {n}",
            sys.len()
        )));
    }
    let alpha = sys.alpha;
    let scale = sys.q.powf(2.0 / (2.0 + alpha));
    let lambdas: Vec<f64> = sys.eigenvalues[..n].iter().map(|l| l / scale).collect();
    let mut d: Vec<f64> = lambdas.iter().map(|l| l - lambdas[0]).collect();
    d[0] = 0.0;

    let h = sys.h;
    let grid = sys.full_grid();
    let phis: Vec<Vec<f64>> = (0..n).map(|k| sys.full_line(k)).collect();
    let x_dphi: Vec<Vec<f64>> = phis
        .iter()
        .map(|p| {
            derivative(p, h)
                .iter()
                .zip(&grid)
                .map(|(dp, x)| x * dp)
                .collect()
        })
        .collect();
    let mut raw = DMatrix::zeros(n, n);
    let mut prod = vec![0.0; grid.len()];
    for i in 0..n {
        for j in 0..n {
            for (k, p) in prod.iter_mut().enumerate() {
                *p = phis[j][k] * (0.5 * phis[i][k] + x_dphi[i][k]);
            }
            raw[(i, j)] = numeric::simpson(&prod, h) / (2.0 + alpha);
        }
    }
    let sym = &raw + raw.transpose();
    let defect = sym.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if defect > DEFECT_LIMIT {
        return Err(Error::Accuracy(format!(
            "quadrature defect {defect:e} of the transport matrix exceeds {DEFECT_LIMIT:e}"
        )));
    }
    let a = (&raw - raw.transpose()) * 0.5;
    Ok(GalerkinMatrices {
        alpha,
        lambdas,
        d,
        a,
        defect,
    })
}

#[derive(Clone, Debug)]
pub struct CoefficientOptions {
    pub dt_max: f64,
    /// Largest |Δ log q| per step.
    pub dlogq_max: f64,
    /// Drop the transport term (test hook).
    pub ablate_transport: bool,
}

impl Default for CoefficientOptions {
    fn default() -> Self {
        CoefficientOptions {
            dt_max: 1e-4,
            dlogq_max: 1e-3,
            ablate_transport: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefficientPath {
    pub schedule: String,
    pub rho: f64,
    pub times: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    /// Largest relative increase of ‖c‖₂ over a single step (≤ 0 up to rounding).
    pub max_norm_increase: f64,
    pub steps: usize,
}

impl CoefficientPath {
    pub fn last(&self) -> &[f64] {
        self.coefficients.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Whether ‖c‖₂ never increases by more than `slack` between outputs.
    pub fn norm_monotone(&self, slack: f64) -> bool {
        self.norms.windows(2).all(|w| w[1] <= w[0] + slack) && self.max_norm_increase <= slack
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for n in 0..self.coefficients.first().map_or(0, Vec::len) {
            write!(w, ",c_{n}")?;
        }
        writeln!(w, ",norm")?;
        for ((t, c), norm) in self.times.iter().zip(&self.coefficients).zip(&self.norms) {
            write!(w, "{t:e}")?;
            for v in c {
                write!(w, ",{v:e}")?;
            }
            writeln!(w, ",{norm:e}")?;
        }
        Ok(())
    }
}

fn norm(c: &DVector<f64>) -> f64 {
    c.norm()
}

/// Integrate the coefficient flow from `c0` through `output_times` (which must
/// start at or after 0 and end at the horizon).
pub fn evolve_coefficients(
    c0: &[f64],
    schedule: &Schedule,
    rho: f64,
    mats: &GalerkinMatrices,
    output_times: &[f64],
    opts: &CoefficientOptions,
) -> Result<CoefficientPath> {
    let n = mats.d.len();
    if c0.len() != n {
        return Err(Error::domain(format!(
            "c0 has {} entries but the matrices have {n}",
            c0.len()
        )));
    }
    if c0.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("c0 must be finite"));
    }
    if matches!(schedule, Schedule::Off) {
        return Err(Error::domain("the coefficient flow needs a positive q"));
    }
    let alpha = mats.alpha;
    let mut stops: Vec<f64> = output_times.to_vec();
    if let Schedule::Barrier(pair, _) = schedule {
        let horizon = output_times.last().copied().unwrap_or(0.0);
        stops.extend(
            pair.breakpoints()
                .into_iter()
                .filter(|b| *b > 0.0 && *b < horizon),
        );
    }
    stops.sort_by(|a, b| a.total_cmp(b));
    stops.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let identity = DMatrix::<f64>::identity(n, n);
    let mut c = DVector::from_column_slice(c0);
    let mut t = 0.0;
    let mut times = Vec::new();
    let mut coefficients = Vec::new();
    let mut norms = Vec::new();
    let mut max_increase = f64::NEG_INFINITY;
    let mut steps = 0;
    let mut next_out = 0;
    let mut record = |t: f64, c: &DVector<f64>, next_out: &mut usize| {
        while *next_out < output_times.len() && (output_times[*next_out] - t).abs() < 1e-14 {
            times.push(output_times[*next_out]);
            coefficients.push(c.iter().copied().collect::<Vec<_>>());
            norms.push(norm(c));
            *next_out += 1;
        }
    };
    record(0.0, &c, &mut next_out);
    let decay = |c: &mut DVector<f64>, a: f64, b: f64| {
        let w = rho * schedule.integral_power(alpha, a, b);
        for (ci, di) in c.iter_mut().zip(&mats.d) {
            *ci *= (-di * w).exp();
        }
    };
    for &stop in &stops {
        if stop <= t {
            continue;
        }
        let dlog = schedule.log_increment(alpha, t, stop).abs();
        let sub = ((stop - t) / opts.dt_max)
            .ceil()
            .max((dlog / opts.dlogq_max).ceil())
            .max(1.0) as usize;
        let start = t;
        for k in 0..sub {
            let a = start + (stop - start) * k as f64 / sub as f64;
            let b = if k + 1 == sub {
                stop
            } else {
                start + (stop - start) * (k + 1) as f64 / sub as f64
            };
            let mid = 0.5 * (a + b);
            let before = norm(&c);
            decay(&mut c, a, mid);
            let theta = schedule.log_increment(alpha, a, b);
            if theta != 0.0 && !opts.ablate_transport {
                // Cayley transform: orthogonal because A is antisymmetric.
                let half = &mats.a * (0.5 * theta);
                let lhs = &identity - &half;
                let rhs = (&identity + &half) * &c;
                c = lhs.lu().solve(&rhs).ok_or_else(|| Error::Numerical {
                    message: format!("singular Cayley system at t = {a}"),
                    last: vec![theta],
                })?;
            }
            decay(&mut c, mid, b);
            let after = norm(&c);
            if before > 0.0 {
                max_increase = max_increase.max((after - before) / before);
            }
            if !after.is_finite() || after > before * (1.0 + 1e-10) + 1e-300 {
                return Err(Error::Numerical {
                    message: format!("coefficient norm grew from {before} to {after} at t = {b}"),
                    last: vec![before, after],
                });
            }
            steps += 1;
        }
        t = stop;
        record(t, &c, &mut next_out);
    }
    Ok(CoefficientPath {
        schedule: schedule.label(),
        rho,
        times,
        coefficients,
        norms,
        max_norm_increase: max_increase.max(0.0),
        steps,
    })
}

/// W(x) = Σ c_n φ_{q,n}(x).
pub fn reconstruct(c: &[f64], q: f64, sys: &EigenSystem, xs: &[f64]) -> Vec<f64> {
    let a = sys.alpha;
    let ratio = q / sys.q;
    let xs_scale = ratio.powf(1.0 / (2.0 + a));
    let v_scale = ratio.powf(1.0 / (2.0 * (2.0 + a)));
    xs.iter()
        .map(|&x| {
            c.iter()
                .enumerate()
                .map(|(n, cn)| cn * v_scale * sys.phi(n, xs_scale * x))
                .sum()
        })
        .collect()
}

/// Initial coefficients c_n(0) = φ_{q(0),n}(ξ).
pub fn initial_coefficients(sys: &EigenSystem, n: usize, q0: f64, xi: f64) -> Vec<f64> {
    (0..n).map(|k| reconstruct_single(sys, k, q0, xi)).collect()
}

fn reconstruct_single(sys: &EigenSystem, n: usize, q: f64, x: f64) -> f64 {
    let a = sys.alpha;
    let ratio = q / sys.q;
    ratio.powf(1.0 / (2.0 * (2.0 + a))) * sys.phi(n, ratio.powf(1.0 / (2.0 + a)) * x)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct C0Stability {
    pub alpha: f64,
    pub horizon: f64,
    pub xi: f64,
    pub rhos: Vec<f64>,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    pub deviation_lower: Vec<f64>,
    pub deviation_upper: Vec<f64>,
    /// Slope of log deviation against log ϱ (worse of the two barriers).
    pub fitted_exponent: f64,
}

/// |c₀(T) − c₀(0)| under both barriers for each ϱ.
pub fn check_c0_stability(
    sys: &EigenSystem,
    n_modes: usize,
    rhos: &[f64],
    horizon: f64,
    xi: f64,
    opts: &CoefficientOptions,
) -> Result<C0Stability> {
    let mats = galerkin_matrices(sys, n_modes)?;
    let alpha = sys.alpha;
    let mut out = C0Stability {
        alpha,
        horizon,
        xi,
        rhos: rhos.to_vec(),
        eps1: Vec::new(),
        eps2: Vec::new(),
        deviation_lower: Vec::new(),
        deviation_upper: Vec::new(),
        fitted_exponent: f64::NAN,
    };
    for &rho in rhos {
        let (e1, e2) = choose_eps(rho, horizon, alpha)?;
        let pair = build_barriers(horizon, e1, e2, alpha)?;
        out.eps1.push(e1);
        out.eps2.push(e2);
        for side in [Side::Lower, Side::Upper] {
            let q0 = pair.value(side, 0.0);
            let c0 = initial_coefficients(sys, n_modes, q0, xi);
            let schedule = Schedule::Barrier(pair.clone(), side);
            let path = evolve_coefficients(&c0, &schedule, rho, &mats, &[0.0, horizon], opts)?;
            let dev = (path.last()[0] - c0[0]).abs();
            match side {
                Side::Lower => out.deviation_lower.push(dev),
                Side::Upper => out.deviation_upper.push(dev),
            }
        }
    }
    if rhos.len() >= 2 {
        let xs: Vec<f64> = rhos.iter().map(|r| r.ln()).collect();
        let ys: Vec<f64> = out
            .deviation_lower
            .iter()
            .zip(&out.deviation_upper)
            .map(|(a, b)| a.max(*b).ln())
            .collect();
        out.fitted_exponent = numeric::fit_line(&xs, &ys).slope;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::solve_spectrum;

    #[test]
    fn constant_q_is_exact() {
        let sys = solve_spectrum(1.0, 6, 1e-9).unwrap();
        let mats = galerkin_matrices(&sys, 6).unwrap();
        assert_eq!(mats.d[0], 0.0);
        let c0 = initial_coefficients(&sys, 6, 1.0, 0.3);
        let path = evolve_coefficients(
            &c0,
            &Schedule::Constant(1.0),
            10.0,
            &mats,
            &[0.0, 0.2],
            &Default::default(),
        )
        .unwrap();
        let end = path.last();
        assert!((end[0] - c0[0]).abs() < 1e-12);
        let want = c0[1] * (-10.0 * mats.d[1] * 0.2).exp();
        assert!((end[1] - want).abs() <= 1e-10 * want.abs());
    }

    #[test]
    fn mixed_parity_entries_vanish() {
        let sys = solve_spectrum(1.0, 6, 1e-9).unwrap();
        let mats = galerkin_matrices(&sys, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if (i + j) % 2 == 1 {
                    assert!(mats.a[(i, j)].abs() < 1e-12);
                }
            }
        }
        assert!(mats.defect < 1e-6);
    }
}
