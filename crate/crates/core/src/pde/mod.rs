//! Finite-difference evolution of `∂_t u = ϱ(∂²u − q(t)|x|^α u)` and the
//! objects built on it: the fundamental solution `g`, the weighted kernel `G`,
//! the barrier pair and the Galerkin coefficient flow.
//!
//! Space is discretised with the fourth-order compact (Numerov) stencil and
//! time with Crank–Nicolson, evaluating the potential at the step midpoint.
//! The first steps are tiny and grow geometrically so that the rough initial
//! data is smoothed before steps become large. The solution is renormalised
//! every step and the accumulated log-scale is tracked separately, because
//! the killing drives `u` far below the floating-point range.

mod barriers;
mod galerkin;

use std::io::Write;

pub use barriers::{build_barriers, choose_eps, BarrierPair, Piece, Side};
pub use galerkin::{
    check_c0_stability, evolve_coefficients, galerkin_matrices, initial_coefficients, reconstruct,
    C0Stability, CoefficientOptions, CoefficientPath, GalerkinMatrices,
};

use crate::error::{Error, Result};
use crate::model::{integral_singular_rate, kappa};
use crate::numeric;

/// Time profile q(t) multiplying the potential.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    /// (1 − t)^{−α}.
    Singular,
    Barrier(BarrierPair, Side),
    Constant(f64),
    /// Potential switched off; pure diffusion.
    Off,
}

impl Schedule {
    pub fn q(&self, alpha: f64, t: f64) -> f64 {
        match self {
            Schedule::Singular => (1.0 - t).powf(-alpha),
            Schedule::Barrier(pair, side) => pair.value(*side, t),
            Schedule::Constant(q) => *q,
            Schedule::Off => 0.0,
        }
    }

    /// ∫_a^b q^{2/(2+α)}.
    pub fn integral_power(&self, alpha: f64, a: f64, b: f64) -> f64 {
        match self {
            Schedule::Singular => {
                let k = kappa(alpha);
                ((1.0 - a).powf(1.0 - k) - (1.0 - b).powf(1.0 - k)) / (1.0 - k)
            }
            Schedule::Barrier(pair, side) => pair.integral_power(*side, a, b),
            Schedule::Constant(q) => q.powf(2.0 / (2.0 + alpha)) * (b - a),
            Schedule::Off => 0.0,
        }
    }

    /// log q(b) − log q(a).
    pub fn log_increment(&self, alpha: f64, a: f64, b: f64) -> f64 {
        match self {
            Schedule::Constant(_) | Schedule::Off => 0.0,
            _ => self.q(alpha, b).ln() - self.q(alpha, a).ln(),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Schedule::Barrier(pair, _) => pair.breakpoints(),
            _ => Vec::new(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Schedule::Singular => "singular".into(),
            Schedule::Barrier(_, Side::Lower) => "barrier_lower".into(),
            Schedule::Barrier(_, Side::Upper) => "barrier_upper".into(),
            Schedule::Constant(q) => format!("constant({q})"),
            Schedule::Off => "off".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PdeOptions {
    /// Space step.
    pub h: f64,
    /// Half-width of the spatial domain; chosen automatically when `None`.
    pub x_max: Option<f64>,
    /// Bound on ϱ·max(1, q(t))·Δt.
    pub step_cap: f64,
    /// Largest step allowed regardless of the cap.
    pub dt_max: f64,
    /// Budget on the number of time steps.
    pub max_steps: usize,
    /// Extrapolate in time from runs at Δt and Δt/2.
    pub time_richardson: bool,
    /// Extrapolate in space from grids h and h/2 (fundamental solutions only).
    pub space_richardson: bool,
}

impl Default for PdeOptions {
    fn default() -> Self {
        PdeOptions {
            h: 0.01,
            x_max: None,
            step_cap: 0.002,
            dt_max: 1e-3,
            max_steps: 4_000_000,
            time_richardson: false,
            space_richardson: false,
        }
    }
}

/// Solution samples at the requested output times.
///
/// The physical value is `values[i][j] * exp(log_scale[i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeField {
    pub rho: f64,
    pub alpha: f64,
    pub schedule: String,
    pub time_grid: Vec<f64>,
    pub space_grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub log_scale: Vec<f64>,
    /// Most negative value seen relative to the running maximum.
    pub min_relative_value: f64,
    pub steps: usize,
}

impl PdeField {
    pub fn h(&self) -> f64 {
        self.space_grid[1] - self.space_grid[0]
    }

    /// log of ∫u dx at output `i`.
    pub fn log_mass(&self, i: usize) -> f64 {
        let m = numeric::trapezoid(&self.values[i], self.h());
        m.ln() + self.log_scale[i]
    }

    /// Interpolated value at output `i`, scaled by `exp(log_scale + extra_log)`.
    pub fn value_at(&self, i: usize, x: f64, extra_log: f64) -> Result<f64> {
        let x0 = self.space_grid[0];
        let v = numeric::interp_cubic(&self.values[i], x0, self.h(), x)
            .ok_or_else(|| Error::domain(format!("x = {x} outside the PDE grid")))?;
        Ok(v * (self.log_scale[i] + extra_log).exp())
    }

    /// Samples at output `i`, scaled by `exp(log_scale + extra_log)`.
    pub fn scaled(&self, i: usize, extra_log: f64) -> Vec<f64> {
        let f = (self.log_scale[i] + extra_log).exp();
        self.values[i].iter().map(|v| v * f).collect()
    }

    /// Long-format CSV `t,x,value,log_scale` (physical value = value·e^{log_scale}).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,value,log_scale")?;
        for (i, t) in self.time_grid.iter().enumerate() {
            for (x, v) in self.space_grid.iter().zip(&self.values[i]) {
                writeln!(w, "{t:e},{x:e},{v:e},{:e}", self.log_scale[i])?;
            }
        }
        Ok(())
    }

    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "rho": self.rho,
            "alpha": self.alpha,
            "schedule": self.schedule,
            "h": self.h(),
            "x_max": self.space_grid.last(),
            "points": self.space_grid.len(),
            "steps": self.steps,
            "output_times": self.time_grid,
            "min_relative_value": self.min_relative_value,
        })
    }
}

/// Default domain half-width for a start point ξ.
pub fn default_x_max(xi: f64) -> f64 {
    10.0 + xi.abs()
}

/// Steps the adaptive grid needs to reach `horizon` (ignoring the start-up ramp).
fn steps_needed(schedule: &Schedule, alpha: f64, rho: f64, horizon: f64, opts: &PdeOptions) -> f64 {
    let n = 400;
    let dt = horizon / n as f64;
    (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) * dt;
            let q = schedule.q(alpha, t).max(1.0);
            dt * (rho * q / opts.step_cap.min(0.4 * opts.h)).max(1.0 / opts.dt_max)
        })
        .sum()
}

fn check_budget(
    schedule: &Schedule,
    alpha: f64,
    rho: f64,
    horizon: f64,
    opts: &PdeOptions,
) -> Result<()> {
    let fits = |t: f64| {
        let scale = if matches!(schedule, Schedule::Off) {
            1.0
        } else {
            schedule.q(alpha, t).max(1.0).powf(-1.0 / (2.0 + alpha))
        };
        steps_needed(schedule, alpha, rho, t, opts) <= opts.max_steps as f64
            && scale >= 20.0 * opts.h
    };
    if fits(horizon) {
        return Ok(());
    }
    let mut lo = 0.0;
    let mut hi = horizon;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Resource {
        message: format!(
            "T = {horizon} needs more than {} steps or a finer grid; largest feasible T is about {lo:.6}",
            opts.max_steps
        ),
        suggested_max_t: Some(lo),
    })
}

/// Evolve `initial` (sampled on `space_grid`, zero at both ends) to the output times.
pub fn solve_pde(
    initial: &[f64],
    space_grid: &[f64],
    rho: f64,
    alpha: f64,
    schedule: &Schedule,
    output_times: &[f64],
    opts: &PdeOptions,
) -> Result<PdeField> {
    if !(rho > 0.0) || !(alpha > 0.0) {
        return Err(Error::domain("rho and alpha must be positive"));
    }
    if initial.len() != space_grid.len() || initial.len() < 5 {
        return Err(Error::domain(
            "initial data must match a grid of at least 5 points",
        ));
    }
    if initial.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::domain("initial data must be finite and nonnegative"));
    }
    let horizon = output_times.iter().cloned().fold(0.0, f64::max);
    if !(horizon < 1.0) {
        return Err(Error::domain(format!(
            "final time must be below 1, got {horizon}"
        )));
    }
    if output_times.windows(2).any(|w| w[1] <= w[0])
        || output_times.first().is_some_and(|t| *t < 0.0)
    {
        return Err(Error::domain(
            "output times must be increasing and nonnegative",
        ));
    }
    check_budget(schedule, alpha, rho, horizon, opts)?;
    if opts.time_richardson {
        let coarse = evolve(
            initial,
            space_grid,
            rho,
            alpha,
            schedule,
            output_times,
            opts,
            1.0,
        )?;
        let fine = evolve(
            initial,
            space_grid,
            rho,
            alpha,
            schedule,
            output_times,
            opts,
            0.5,
        )?;
        return Ok(combine_richardson(coarse, fine));
    }
    evolve(
        initial,
        space_grid,
        rho,
        alpha,
        schedule,
        output_times,
        opts,
        1.0,
    )
}

/// Second-order extrapolation 4/3·fine − 1/3·coarse, done on a common scale.
fn combine_richardson(coarse: PdeField, mut fine: PdeField) -> PdeField {
    for i in 0..fine.values.len() {
        let shift = (coarse.log_scale[i] - fine.log_scale[i]).exp();
        for (f, c) in fine.values[i].iter_mut().zip(&coarse.values[i]) {
            *f = (4.0 * *f - c * shift) / 3.0;
        }
    }
    fine.steps += coarse.steps;
    fine.min_relative_value = fine.min_relative_value.min(coarse.min_relative_value);
    fine
}

/// Extrapolate coarse-grid values with a run on the halved grid.
///
/// The leading error is O(h^p) with p = min(2, 1 + α): the initial width and
/// the |x|^α kink at the origin.
fn combine_space_richardson(coarse: &mut PdeField, fine: &PdeField, alpha: f64) {
    let w = 2f64.powf((1.0 + alpha).min(2.0));
    for i in 0..coarse.values.len() {
        let shift = (fine.log_scale[i] - coarse.log_scale[i]).exp();
        for (j, c) in coarse.values[i].iter_mut().enumerate() {
            let f = fine.values[i][2 * j] * shift;
            *c = (w * f - *c) / (w - 1.0);
        }
    }
    coarse.steps += fine.steps;
    coarse.min_relative_value = coarse.min_relative_value.min(fine.min_relative_value);
}

#[allow(clippy::too_many_arguments)]
fn evolve(
    initial: &[f64],
    space_grid: &[f64],
    rho: f64,
    alpha: f64,
    schedule: &Schedule,
    output_times: &[f64],
    opts: &PdeOptions,
    step_factor: f64,
) -> Result<PdeField> {
    let n = space_grid.len();
    let h = space_grid[1] - space_grid[0];
    let inv_h2 = 1.0 / (h * h);
    let shape: Vec<f64> = space_grid.iter().map(|x| x.abs().powf(alpha)).collect();

    let mut u = initial.to_vec();
    u[0] = 0.0;
    u[n - 1] = 0.0;
    let peak = u.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::domain("initial data vanishes on the grid interior"));
    }
    u.iter_mut().for_each(|v| *v /= peak);
    let mut log_scale = peak.ln();

    let mut stops: Vec<f64> = output_times.to_vec();
    let horizon = stops.last().copied().unwrap_or(0.0);
    stops.extend(
        schedule
            .breakpoints()
            .into_iter()
            .filter(|b| *b > 0.0 && *b < horizon),
    );
    stops.sort_by(|a, b| a.total_cmp(b));
    stops.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let mut out_values = Vec::with_capacity(output_times.len());
    let mut out_scale = Vec::with_capacity(output_times.len());
    let mut next_out = 0;
    while next_out < output_times.len() && output_times[next_out] <= 0.0 {
        out_values.push(u.clone());
        out_scale.push(log_scale);
        next_out += 1;
    }

    let m = n - 2; // interior unknowns
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut pot = vec![0.0; n];

    // Crank-Nicolson barely damps the stiffest grid modes; keeping ϱΔt below
    // a multiple of h makes them decay faster than the ground state does.
    let step_cap = opts.step_cap.min(0.4 * h);
    let mut t = 0.0;
    let mut dt = 0.05 * h * h / rho * step_factor;
    let mut steps = 0usize;
    let mut min_rel: f64 = 0.0;
    let mut stop_idx = 0;
    while stop_idx < stops.len() && stops[stop_idx] <= 0.0 {
        stop_idx += 1;
    }
    while stop_idx < stops.len() {
        let target = stops[stop_idx];
        let q_here = schedule.q(alpha, (t + dt).min(target)).max(1.0);
        let cap = (step_cap / (rho * q_here)).min(opts.dt_max) * step_factor;
        let mut step = dt.min(cap);
        let mut reached = false;
        if t + step >= target - 1e-15 {
            step = target - t;
            reached = true;
        }
        let t_mid = t + 0.5 * step;
        let q_mid = schedule.q(alpha, t_mid);
        for (p, s) in pot.iter_mut().zip(&shape) {
            *p = q_mid * s;
        }
        let a = 0.5 * step * rho;
        for k in 0..m {
            let i = k + 1;
            // (M − a(δ²/h² − M V)) on the left, (M + a(δ²/h² − M V)) on the right.
            let lo_c = 1.0 / 12.0;
            let di_c = 10.0 / 12.0;
            sub[k] = lo_c - a * (inv_h2 - lo_c * pot[i - 1]);
            diag[k] = di_c - a * (-2.0 * inv_h2 - di_c * pot[i]);
            sup[k] = lo_c - a * (inv_h2 - lo_c * pot[i + 1]);
            let mu = lo_c * (u[i - 1] + u[i + 1]) + di_c * u[i];
            let lap = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv_h2;
            let mvu = lo_c * (pot[i - 1] * u[i - 1] + pot[i + 1] * u[i + 1]) + di_c * pot[i] * u[i];
            rhs[k] = mu + a * (lap - mvu);
        }
        numeric::solve_tridiagonal(&sub, &diag, &sup, &mut rhs);
        u[1..n - 1].copy_from_slice(&rhs);
        let peak = u.iter().cloned().fold(0.0, f64::max);
        let lowest = u.iter().cloned().fold(0.0, f64::min);
        if !(peak > 0.0) || !peak.is_finite() {
            return Err(Error::Numerical {
                message: format!("solution lost positivity or finiteness at t = {t}"),
                last: vec![peak, lowest],
            });
        }
        min_rel = min_rel.min(lowest / peak);
        u.iter_mut().for_each(|v| *v /= peak);
        log_scale += peak.ln();
        t = if reached { target } else { t + step };
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Resource {
                message: format!("step budget {} exhausted at t = {t}", opts.max_steps),
                suggested_max_t: Some(t),
            });
        }
        if reached {
            while next_out < output_times.len() && (output_times[next_out] - t).abs() < 1e-14 {
                out_values.push(u.clone());
                out_scale.push(log_scale);
                next_out += 1;
            }
            stop_idx += 1;
        } else {
            dt = (dt * 1.05).min(cap);
        }
    }
    Ok(PdeField {
        rho,
        alpha,
        schedule: schedule.label(),
        time_grid: output_times.to_vec(),
        space_grid: space_grid.to_vec(),
        values: out_values,
        log_scale: out_scale,
        min_relative_value: min_rel,
        steps,
    })
}

/// Symmetric grid `[-x_max, x_max]` with spacing close to `h` and a node at 0.
pub fn symmetric_grid(x_max: f64, h: f64) -> Vec<f64> {
    let half = (x_max / h).round() as usize;
    let h = x_max / half as f64;
    (0..=2 * half)
        .map(|j| (j as f64 - half as f64) * h)
        .collect()
}

/// Normalised Gaussian of standard deviation `width` centred at `xi`, sampled on `grid`.
pub fn narrow_gaussian(grid: &[f64], xi: f64, width: f64) -> Vec<f64> {
    let h = grid[1] - grid[0];
    let mut v: Vec<f64> = grid
        .iter()
        .map(|x| (-(x - xi).powi(2) / (2.0 * width * width)).exp())
        .collect();
    let n = v.len();
    v[0] = 0.0;
    v[n - 1] = 0.0;
    let mass = numeric::trapezoid(&v, h);
    v.iter_mut().for_each(|a| *a /= mass);
    v
}

/// Grid approximation of x ↦ g(0, ξ; T, x).
#[derive(Clone, Debug)]
pub struct FundamentalSolution {
    pub xi: f64,
    pub horizon: f64,
    pub field: PdeField,
    /// Max relative change at |x| ≤ 2 when the initial width is halved, if computed.
    pub width_halving_change: Option<f64>,
}

impl FundamentalSolution {
    pub fn at(&self, x: f64) -> Result<f64> {
        self.field.value_at(self.field.time_grid.len() - 1, x, 0.0)
    }

    /// log g(0, ξ; T, x); useful when g underflows.
    pub fn log_at(&self, x: f64) -> Result<f64> {
        let i = self.field.time_grid.len() - 1;
        let v = self.field.value_at(i, x, -self.field.log_scale[i])?;
        Ok(v.ln() + self.field.log_scale[i])
    }

    /// exp(λ₀ ϱ ∫₀^T (1−s)^{−κ} ds) g(0, ξ; T, x).
    pub fn renormalized(&self, x: f64, lambda0: f64) -> Result<f64> {
        let i = self.field.time_grid.len() - 1;
        let k = kappa(self.field.alpha);
        let extra = lambda0 * self.field.rho * integral_singular_rate(k, self.horizon);
        self.field.value_at(i, x, extra)
    }

    pub fn mass(&self) -> f64 {
        self.field.log_mass(self.field.time_grid.len() - 1).exp()
    }
}

/// g(0, ξ; T, ·) from a Gaussian of width 2h centred at ξ.
pub fn fundamental_solution_g(
    xi: f64,
    horizon: f64,
    rho: f64,
    alpha: f64,
    schedule: &Schedule,
    opts: &PdeOptions,
    width_halving: bool,
) -> Result<FundamentalSolution> {
    if !(horizon > 0.0 && horizon < 1.0) {
        return Err(Error::domain(format!(
            "T must lie in (0, 1), got {horizon}"
        )));
    }
    let x_max = opts.x_max.unwrap_or_else(|| default_x_max(xi));
    let grid = symmetric_grid(x_max, opts.h);
    let h = grid[1] - grid[0];
    let initial = narrow_gaussian(&grid, xi, 2.0 * h);
    let mut field = solve_pde(&initial, &grid, rho, alpha, schedule, &[horizon], opts)?;
    if opts.space_richardson {
        let fine_grid = symmetric_grid(x_max, 0.5 * h);
        let fine_initial = narrow_gaussian(&fine_grid, xi, h);
        let fine = solve_pde(
            &fine_initial,
            &fine_grid,
            rho,
            alpha,
            schedule,
            &[horizon],
            opts,
        )?;
        combine_space_richardson(&mut field, &fine, alpha);
    }
    let width_halving_change = if width_halving {
        let narrower = narrow_gaussian(&grid, xi, h);
        let other = solve_pde(&narrower, &grid, rho, alpha, schedule, &[horizon], opts)?;
        let a = field.scaled(0, -field.log_scale[0]);
        let b = other.scaled(0, -field.log_scale[0]);
        let peak = a.iter().cloned().fold(0.0, f64::max);
        let change = grid
            .iter()
            .zip(a.iter().zip(&b))
            .filter(|(x, _)| x.abs() <= 2.0)
            .map(|(_, (p, q))| (p - q).abs() / peak)
            .fold(0.0, f64::max);
        Some(change)
    } else {
        None
    };
    Ok(FundamentalSolution {
        xi,
        horizon,
        field,
        width_halving_change,
    })
}

/// G(s, x; t, y) through the change of variables to the PDE with
/// ϱ = β^{2/(2+α)} 2^{−2α/(2+α)} t^{1−κ} and horizon 1 − s/t.
pub fn kernel_g_from_g(s: f64, x: f64, t: f64, y: f64, beta: f64, alpha: f64) -> Result<f64> {
    kernel_g_from_g_with(
        s,
        x,
        t,
        y,
        beta,
        alpha,
        &Schedule::Singular,
        &PdeOptions::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn kernel_g_from_g_with(
    s: f64,
    x: f64,
    t: f64,
    y: f64,
    beta: f64,
    alpha: f64,
    schedule: &Schedule,
    opts: &PdeOptions,
) -> Result<f64> {
    if !(0.0 < s && s < t) {
        return Err(Error::domain(format!(
            "need 0 < s < t, got s = {s}, t = {t}"
        )));
    }
    let rho = kernel_rho(beta, alpha, t);
    let scale = (2.0 * rho / t).sqrt();
    let g = fundamental_solution_g(scale * y, 1.0 - s / t, rho, alpha, schedule, opts, false)?;
    let x_end = scale * x;
    let grid = &g.field.space_grid;
    if x_end.abs() > 0.9 * grid[grid.len() - 1] {
        return Err(Error::domain(format!(
            "end point {x} maps to {x_end}, beyond the trusted part of the PDE grid"
        )));
    }
    Ok(scale * g.at(x_end)?)
}

/// ϱ used by the kernel-to-PDE change of variables.
pub fn kernel_rho(beta: f64, alpha: f64, t: f64) -> f64 {
    beta.powf(2.0 / (2.0 + alpha))
        * 2f64.powf(-2.0 * alpha / (2.0 + alpha))
        * t.powf(1.0 - kappa(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_conserves_mass() {
        let opts = PdeOptions {
            h: 0.02,
            x_max: Some(12.0),
            ..Default::default()
        };
        let g = fundamental_solution_g(0.3, 0.5, 2.0, 1.0, &Schedule::Off, &opts, false).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-10, "mass {}", g.mass());
        // Variance 2ϱT on top of the initial width.
        let h = g.field.h();
        let want = (-(0.0f64 - 0.3).powi(2) / (2.0 * (2.0 + 4.0 * h * h))).exp()
            / (2.0 * std::f64::consts::PI * (2.0 + 4.0 * h * h)).sqrt();
        assert!((g.at(0.0).unwrap() - want).abs() < 1e-6);
    }

    #[test]
    fn killing_is_symmetric_and_sub_stochastic() {
        let opts = PdeOptions {
            h: 0.02,
            x_max: Some(12.0),
            ..Default::default()
        };
        let g =
            fundamental_solution_g(0.0, 0.3, 40.0, 1.0, &Schedule::Singular, &opts, false).unwrap();
        assert!(g.mass() <= 1.0);
        for x in [0.3, 1.1, 2.5] {
            let (a, b) = (g.at(x).unwrap(), g.at(-x).unwrap());
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
        assert!(g.field.min_relative_value > -1e-12);
    }

    #[test]
    fn resource_error_suggests_horizon() {
        let opts = PdeOptions {
            max_steps: 10_000,
            ..Default::default()
        };
        match fundamental_solution_g(0.0, 0.999, 200.0, 1.0, &Schedule::Singular, &opts, false) {
            Err(Error::Resource {
                suggested_max_t: Some(t),
                ..
            }) => assert!(t > 0.0 && t < 0.999),
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn gaussian_limit_of_kernel() {
        let opts = PdeOptions {
            h: 0.01,
            x_max: Some(8.0),
            ..Default::default()
        };
        let (s, t, x, y) = (1.0, 4.0, 0.3, -0.5);
        let got = kernel_g_from_g_with(s, x, t, y, 1.0, 1.0, &Schedule::Off, &opts).unwrap();
        let var = t - s;
        let want =
            (-(y - x) * (y - x) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        assert!((got - want).abs() < 1e-3 * want, "{got} vs {want}");
    }
}
