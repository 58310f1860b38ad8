//! Eigenpairs of the Schrödinger-type operator `-f'' + q|x|^α f` on the line.
//!
//! The operator commutes with `x ↦ -x`, so even and odd levels are solved
//! separately on the half-line with a mirror (even) or antisymmetric (odd)
//! condition at the origin. The half-line grid is cell-centred,
//! `x_i = (i + 1/2) h`, so the potential is never sampled at its kink.
//! Eigenvalues of the tridiagonal discretisation are extrapolated over three
//! nested grids.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::numeric::{self, PivotedTridiagonal};

/// Tuning knobs for [`solve_spectrum_with`].
#[derive(Clone, Debug)]
pub struct SpectrumOptions {
    pub q: f64,
    /// Coarsest grid spacing; the solve also uses h/2 and h/4.
    pub base_h: f64,
    /// Number of times the base spacing may be halved to reach the accuracy.
    pub max_refinements: usize,
    /// Override the automatic truncation point.
    pub x_max: Option<f64>,
    pub exec: Execution,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            q: 1.0,
            base_h: 1.0 / 256.0,
            max_refinements: 4,
            x_max: None,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenSystem {
    pub alpha: f64,
    pub q: f64,
    /// Grid spacing of the stored eigenfunctions.
    pub h: f64,
    /// Half-line abscissae `(i + 1/2) h`.
    pub grid: Vec<f64>,
    /// Extrapolated eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues of the finest discretisation (consistent with the stored vectors).
    pub grid_eigenvalues: Vec<f64>,
    /// Estimated absolute error of each extrapolated eigenvalue.
    pub error_estimates: Vec<f64>,
    /// Half-line samples; full-line values follow from the parity of the level.
    pub eigenfunctions: Vec<Vec<f64>>,
    pub accuracy: f64,
}

/// Solve at q = 1 with default options.
pub fn solve_spectrum(alpha: f64, n_max: usize, accuracy: f64) -> Result<EigenSystem> {
    solve_spectrum_with(alpha, n_max, accuracy, &SpectrumOptions::default())
}

pub fn solve_spectrum_with(
    alpha: f64,
    n_max: usize,
    accuracy: f64,
    opts: &SpectrumOptions,
) -> Result<EigenSystem> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if n_max == 0 {
        return Err(Error::domain("n_max must be at least 1"));
    }
    if !(opts.q > 0.0) {
        return Err(Error::domain(format!("q must be positive, got {}", opts.q)));
    }
    if !(accuracy > 0.0) {
        return Err(Error::domain("accuracy must be positive"));
    }
    let x_max = match opts.x_max {
        Some(x) => x,
        None => truncation_point(alpha, opts.q, n_max)?,
    };
    let p2 = (2.0 + alpha).min(4.0);

    let mut h = opts.base_h;
    let mut solves: Vec<GridSolve> = vec![
        GridSolve::new(alpha, opts.q, h, x_max, n_max, opts.exec, false),
        GridSolve::new(alpha, opts.q, h / 2.0, x_max, n_max, opts.exec, false),
    ];
    let mut last: Option<(Vec<f64>, Vec<f64>)> = None;
    for refinement in 0..=opts.max_refinements {
        let finest = GridSolve::new(alpha, opts.q, h / 4.0, x_max, n_max, opts.exec, true);
        solves.push(finest);
        let k = solves.len();
        let (a, b, c) = (&solves[k - 3], &solves[k - 2], &solves[k - 1]);
        let mut values = Vec::with_capacity(n_max);
        let mut errors = Vec::with_capacity(n_max);
        for n in 0..n_max {
            let three = richardson3(a.lambda[n], b.lambda[n], c.lambda[n], h, p2);
            let two = richardson2(b.lambda[n], c.lambda[n], 2.0);
            values.push(three);
            errors.push((three - two).abs());
        }
        let worst = errors.iter().cloned().fold(0.0, f64::max);
        if worst <= accuracy {
            let finest = solves.pop().expect("finest grid present");
            return Ok(finest.into_system(values, errors, accuracy));
        }
        if let Some((prev, _)) = &last {
            // Stop early once refinement no longer changes anything measurable.
            let moved = prev
                .iter()
                .zip(&values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if moved <= 0.1 * accuracy {
                let finest = solves.pop().expect("finest grid present");
                return Ok(finest.into_system(values, errors, accuracy));
            }
        }
        last = Some((values, errors));
        if refinement < opts.max_refinements {
            // Keep only what the next level reuses; drop the stored vectors.
            let keep = solves.split_off(k - 2);
            solves = keep;
            solves[1].vectors.clear();
            h /= 2.0;
        }
    }
    let (values, errors) = last.expect("at least one level ran");
    let worst = (0..n_max)
        .max_by(|&i, &j| errors[i].total_cmp(&errors[j]))
        .unwrap_or(0);
    Err(Error::Numerical {
        message: format!(
            "eigenvalue {worst} did not reach accuracy {accuracy:e} (estimated error {:e})",
            errors[worst]
        ),
        last: vec![values[worst], values[worst] - errors[worst]],
    })
}

/// λ* from λ(h) = λ* + a h^2 + b h^p on grids h, h/2, h/4.
fn richardson3(l1: f64, l2: f64, l3: f64, h: f64, p: f64) -> f64 {
    let hs = [h, h / 2.0, h / 4.0];
    let ls = [l1, l2, l3];
    // Solve [1 h² h^p] [λ a b]ᵀ = λ(h) by eliminating λ* first; the
    // coefficients are scaled by h to keep the system well conditioned.
    let r = |i: usize| ((hs[i] / h).powi(2), (hs[i] / h).powf(p));
    let (a1, b1) = r(0);
    let (a2, b2) = r(1);
    let (a3, b3) = r(2);
    let (d1, d2) = (ls[0] - ls[2], ls[1] - ls[2]);
    let (m11, m12, m21, m22) = (a1 - a3, b1 - b3, a2 - a3, b2 - b3);
    let det = m11 * m22 - m12 * m21;
    let a = (d1 * m22 - m12 * d2) / det;
    let b = (m11 * d2 - m21 * d1) / det;
    l3 - a * a3 - b * b3
}

fn richardson2(coarse: f64, fine: f64, p: f64) -> f64 {
    let r = 2f64.powf(p);
    (r * fine - coarse) / (r - 1.0)
}

/// Rough eigenvalue of level `n` from the Weyl law, used only to size the domain.
fn weyl_guess(alpha: f64, n: usize) -> f64 {
    let c = (2.0 / PI) * approx_weyl_integral(alpha);
    (((n as f64) + 1.0) / c).powf(2.0 * alpha / (alpha + 2.0))
}

fn approx_weyl_integral(alpha: f64) -> f64 {
    let m = 2000;
    (0..m)
        .map(|i| {
            let u = (i as f64 + 0.5) / m as f64;
            (1.0 - u.powf(alpha)).sqrt()
        })
        .sum::<f64>()
        / m as f64
}

/// Point beyond which every requested eigenfunction is below ~1e-16.
fn truncation_point(alpha: f64, q: f64, n_max: usize) -> Result<f64> {
    let lambda = 1.5 * weyl_guess(alpha, n_max - 1) + 2.0;
    // Work at q = 1 and map back: the q-problem is the unit problem scaled in x.
    let turning = lambda.powf(1.0 / alpha);
    let mut x = turning;
    let mut action = 0.0;
    let dx = 1e-3 * (1.0 + turning);
    while action < 40.0 {
        let v = x.powf(alpha) - lambda;
        action += v.max(0.0).sqrt() * dx;
        x += dx;
        if x > 1e6 {
            return Err(Error::Numerical {
                message: "could not size the truncated domain".into(),
                last: vec![x, action],
            });
        }
    }
    let scale = q.powf(-1.0 / (2.0 + alpha));
    Ok((x * scale).max(30.0))
}

struct GridSolve {
    alpha: f64,
    q: f64,
    h: f64,
    grid: Vec<f64>,
    lambda: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

impl GridSolve {
    fn new(
        alpha: f64,
        q: f64,
        h: f64,
        x_max: f64,
        n_max: usize,
        exec: Execution,
        keep_vectors: bool,
    ) -> Self {
        let n = (x_max / h).ceil() as usize;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let potential: Vec<f64> = grid.iter().map(|x| q * x.powf(alpha)).collect();
        let inv_h2 = 1.0 / (h * h);
        let off = vec![-inv_h2; n - 1];
        let make_diag = |odd: bool| -> Vec<f64> {
            let mut d: Vec<f64> = potential.iter().map(|v| v + 2.0 * inv_h2).collect();
            d[0] = potential[0] + if odd { 3.0 } else { 1.0 } * inv_h2;
            d
        };
        let diags = [make_diag(false), make_diag(true)];
        let pairs = exec::map_indexed(n_max, exec, |level| {
            let d = &diags[level % 2];
            let k = level / 2;
            let approx = kth_eigenvalue(d, &off, k);
            let v = inverse_iteration(d, &off, approx);
            let lam = rayleigh(&v, &potential, h, level % 2 == 1);
            (lam, if keep_vectors { v } else { Vec::new() })
        });
        let (lambda, vectors): (Vec<f64>, Vec<Vec<f64>>) = pairs.into_iter().unzip();
        GridSolve {
            alpha,
            q,
            h,
            grid,
            lambda,
            vectors,
        }
    }

    fn into_system(
        self,
        eigenvalues: Vec<f64>,
        error_estimates: Vec<f64>,
        accuracy: f64,
    ) -> EigenSystem {
        let h = self.h;
        let eigenfunctions = self
            .vectors
            .into_iter()
            .map(|mut v| {
                let norm = (2.0 * h * v.iter().map(|a| a * a).sum::<f64>()).sqrt();
                v.iter_mut().for_each(|a| *a /= norm);
                // Positive beyond the last zero.
                let peak = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
                let tail = v.iter().rposition(|a| a.abs() > 1e-3 * peak).unwrap_or(0);
                if v[tail] < 0.0 {
                    v.iter_mut().for_each(|a| *a = -*a);
                }
                v
            })
            .collect();
        EigenSystem {
            alpha: self.alpha,
            q: self.q,
            h,
            grid: self.grid,
            eigenvalues,
            grid_eigenvalues: self.lambda,
            error_estimates,
            eigenfunctions,
            accuracy,
        }
    }
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = diag[0] - x;
    if d < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let prev = if d == 0.0 {
            f64::EPSILON * off[i - 1].abs()
        } else {
            d
        };
        d = diag[i] - x - off[i - 1] * off[i - 1] / prev;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// k-th smallest eigenvalue by Sturm-sequence bisection.
fn kth_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while sturm_count(diag, off, hi) <= k {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn inverse_iteration(diag: &[f64], off: &[f64], shift: f64) -> Vec<f64> {
    let n = diag.len();
    let lu = PivotedTridiagonal::new_symmetric(diag, off, shift);
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64 / 13.0)
        .collect();
    for _ in 0..4 {
        let rhs = v.clone();
        lu.solve(&mut v);
        // One step of iterative refinement against the unfactored matrix.
        let mut r: Vec<f64> = (0..n)
            .map(|i| {
                let mut t = (diag[i] - shift) * v[i];
                if i > 0 {
                    t += off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    t += off[i] * v[i + 1];
                }
                rhs[i] - t
            })
            .collect();
        lu.solve(&mut r);
        v.iter_mut().zip(&r).for_each(|(a, c)| *a += c);
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
    }
    v
}

/// Rayleigh quotient in difference form, accurate relative to λ itself.
fn rayleigh(v: &[f64], potential: &[f64], h: f64, odd: bool) -> f64 {
    let n = v.len();
    let mut kinetic = 0.0;
    for i in 0..n - 1 {
        kinetic += (v[i] - v[i + 1]).powi(2);
    }
    kinetic += v[n - 1] * v[n - 1];
    if odd {
        kinetic += 2.0 * v[0] * v[0];
    }
    let pot: f64 = v.iter().zip(potential).map(|(a, p)| p * a * a).sum();
    let mass: f64 = v.iter().map(|a| a * a).sum();
    (kinetic / (h * h) + pot) / mass
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn x_max(&self) -> f64 {
        self.grid.last().copied().unwrap_or(0.0) + 0.5 * self.h
    }

    fn parity(n: usize) -> f64 {
        if n.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Sample `n` at signed half-line index `j` (index −1−i mirrors index i).
    fn sample(&self, n: usize, j: isize) -> f64 {
        let v = &self.eigenfunctions[n];
        if j < 0 {
            let i = (-j - 1) as usize;
            if i < v.len() {
                Self::parity(n) * v[i]
            } else {
                0.0
            }
        } else if (j as usize) < v.len() {
            v[j as usize]
        } else {
            0.0
        }
    }

    /// φ_n(x) on the full line by cubic interpolation; zero beyond the domain.
    pub fn phi(&self, n: usize, x: f64) -> f64 {
        let ax = x.abs();
        let sign = if x < 0.0 { Self::parity(n) } else { 1.0 };
        let u = ax / self.h - 0.5;
        let base = u.floor() as isize;
        let t = u - base as f64;
        let y = [
            self.sample(n, base - 1),
            self.sample(n, base),
            self.sample(n, base + 1),
            self.sample(n, base + 2),
        ];
        // Lagrange weights on nodes −1, 0, 1, 2.
        let l0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let l1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let l2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let l3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        sign * (l0 * y[0] + l1 * y[1] + l2 * y[2] + l3 * y[3])
    }

    /// Uniform full-line grid `-x_{N-1}, …, -x_0, x_0, …, x_{N-1}`.
    pub fn full_grid(&self) -> Vec<f64> {
        self.grid
            .iter()
            .rev()
            .map(|x| -x)
            .chain(self.grid.iter().copied())
            .collect()
    }

    /// Level `n` sampled on [`Self::full_grid`].
    pub fn full_line(&self, n: usize) -> Vec<f64> {
        let v = &self.eigenfunctions[n];
        let s = Self::parity(n);
        v.iter()
            .rev()
            .map(|a| s * a)
            .chain(v.iter().copied())
            .collect()
    }

    /// Full-line inner product ⟨φ_m, φ_n⟩ (midpoint rule).
    pub fn inner(&self, m: usize, n: usize) -> f64 {
        if (m + n) % 2 == 1 {
            return 0.0;
        }
        let s: f64 = self.eigenfunctions[m]
            .iter()
            .zip(&self.eigenfunctions[n])
            .map(|(a, b)| a * b)
            .sum();
        2.0 * self.h * s
    }

    /// Sign changes of φ_n on the full line, ignoring numerically zero samples.
    pub fn sign_changes(&self, n: usize) -> usize {
        let v = self.full_line(n);
        let peak = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let mut last = 0.0;
        let mut changes = 0;
        for a in v {
            if a.abs() < 1e-8 * peak {
                continue;
            }
            if last != 0.0 && a.signum() != last {
                changes += 1;
            }
            last = a.signum();
        }
        changes
    }

    /// Max interior residual |−φ″ + q|x|^α φ − λφ| using the finest-grid eigenvalue.
    pub fn residual(&self, n: usize) -> f64 {
        let v = &self.eigenfunctions[n];
        let lam = self.grid_eigenvalues[n];
        let h2 = self.h * self.h;
        let mut worst: f64 = 0.0;
        for (i, (&vi, &x)) in v.iter().zip(&self.grid).enumerate() {
            let left = self.sample(n, i as isize - 1);
            let right = self.sample(n, i as isize + 1);
            let lap = (left - 2.0 * vi + right) / h2;
            let r = -lap + self.q * x.powf(self.alpha) * vi - lam * vi;
            worst = worst.max(r.abs());
        }
        worst
    }

    /// Exact rescaling to another q: λ ↦ (q'/q)^{2/(2+α)} λ and
    /// φ(x) ↦ (q'/q)^{1/(2(2+α))} φ((q'/q)^{1/(2+α)} x).
    pub fn rescale_to_q(&self, q: f64) -> Result<EigenSystem> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::domain(format!("q must be positive, got {q}")));
        }
        let ratio = q / self.q;
        let a = self.alpha;
        let x_scale = ratio.powf(-1.0 / (2.0 + a));
        let v_scale = ratio.powf(1.0 / (2.0 * (2.0 + a)));
        let l_scale = ratio.powf(2.0 / (2.0 + a));
        Ok(EigenSystem {
            alpha: a,
            q,
            h: self.h * x_scale,
            grid: self.grid.iter().map(|x| x * x_scale).collect(),
            eigenvalues: self.eigenvalues.iter().map(|l| l * l_scale).collect(),
            grid_eigenvalues: self.grid_eigenvalues.iter().map(|l| l * l_scale).collect(),
            error_estimates: self.error_estimates.iter().map(|e| e * l_scale).collect(),
            eigenfunctions: self
                .eigenfunctions
                .iter()
                .map(|v| v.iter().map(|a| a * v_scale).collect())
                .collect(),
            accuracy: self.accuracy * l_scale,
        })
    }

    /// CSV with header `x,phi_0,…` over the full line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "x")?;
        for n in 0..self.len() {
            write!(w, ",phi_{n}")?;
        }
        writeln!(w)?;
        let full: Vec<Vec<f64>> = (0..self.len()).map(|n| self.full_line(n)).collect();
        for (i, x) in self.full_grid().iter().enumerate() {
            write!(w, "{x:e}")?;
            for col in &full {
                write!(w, ",{:e}", col[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn sidecar(&self) -> SpectrumSidecar {
        SpectrumSidecar {
            alpha: self.alpha,
            q: self.q,
            lambdas: self.eigenvalues.clone(),
            grid_lambdas: self.grid_eigenvalues.clone(),
            error_estimates: self.error_estimates.clone(),
            accuracy: self.accuracy,
            h: self.h,
            x_max: self.x_max(),
            half_line_points: self.grid.len(),
        }
    }
}

/// JSON metadata written next to an exported spectrum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumSidecar {
    pub alpha: f64,
    pub q: f64,
    pub lambdas: Vec<f64>,
    pub grid_lambdas: Vec<f64>,
    pub error_estimates: Vec<f64>,
    pub accuracy: f64,
    pub h: f64,
    pub x_max: f64,
    pub half_line_points: usize,
}

/// c_α = (2/π) ∫₀¹ √(1 − u^α) du.
pub fn weyl_constant(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let integral = numeric::tanh_sinh(|u| (1.0 - u.powf(alpha)).max(0.0).sqrt(), 0.0, 1.0, 1e-13)?;
    Ok(2.0 / PI * integral)
}

/// Relative error of λ_n against the Weyl asymptote for n ≥ 1.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeylReport {
    pub alpha: f64,
    pub c_alpha: f64,
    pub levels: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    pub asymptote: Vec<f64>,
    pub relative_errors: Vec<f64>,
    /// Whether the relative errors never increase along the reported levels.
    pub monotone_decreasing: bool,
}

pub fn weyl_check(sys: &EigenSystem) -> Result<WeylReport> {
    let c = weyl_constant(sys.alpha)?;
    let p = 2.0 * sys.alpha / (sys.alpha + 2.0);
    let levels: Vec<usize> = (1..sys.len()).collect();
    let scale = sys.q.powf(2.0 / (2.0 + sys.alpha));
    let asymptote: Vec<f64> = levels
        .iter()
        .map(|&n| scale * (n as f64 / c).powf(p))
        .collect();
    let eigenvalues: Vec<f64> = levels.iter().map(|&n| sys.eigenvalues[n]).collect();
    let relative_errors: Vec<f64> = eigenvalues
        .iter()
        .zip(&asymptote)
        .map(|(l, w)| (l - w).abs() / w)
        .collect();
    let monotone_decreasing = relative_errors.windows(2).all(|w| w[1] <= w[0]);
    Ok(WeylReport {
        alpha: sys.alpha,
        c_alpha: c,
        levels,
        eigenvalues,
        asymptote,
        relative_errors,
        monotone_decreasing,
    })
}

/// Constant C of the tail bound |φ_n(x)| ≤ (n+1)³ exp(−(x^{(2+α)/2} − C n)/(2+α)),
/// fitted as the smallest value consistent with levels `1..=n_top` wherever
/// x^{(2+α)/2} ≥ 20 and the sample is above the round-off floor.
pub fn fit_tail_constant(sys: &EigenSystem, n_top: usize) -> f64 {
    let a = sys.alpha;
    let p = (2.0 + a) / 2.0;
    let mut c: f64 = 0.0;
    for n in 1..=n_top.min(sys.len() - 1) {
        for (i, &x) in sys.grid.iter().enumerate() {
            let v = sys.eigenfunctions[n][i].abs();
            let xp = (x * sys.q.powf(1.0 / (2.0 + a))).powf(p);
            if xp < 20.0 || v < 1e-12 {
                continue;
            }
            let need = ((2.0 + a) * (v.ln() - 3.0 * ((n + 1) as f64).ln()) + xp) / n as f64;
            c = c.max(need);
        }
    }
    c
}

/// Whether the tail bound with constant `c` holds for levels `0..=n_top`.
pub fn tail_bound_holds(sys: &EigenSystem, n_top: usize, c: f64) -> bool {
    let a = sys.alpha;
    let p = (2.0 + a) / 2.0;
    (0..=n_top.min(sys.len() - 1)).all(|n| {
        sys.grid.iter().enumerate().all(|(i, &x)| {
            let xp = x.powf(p);
            if xp < c * n as f64 + 20.0 {
                return true;
            }
            let bound = ((n + 1) as f64).powi(3) * (-(xp - c * n as f64) / (2.0 + a)).exp();
            sys.eigenfunctions[n][i].abs() <= bound + 1e-15
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let sys = solve_spectrum(2.0, 3, 1e-8).unwrap();
        for (n, l) in sys.eigenvalues.iter().enumerate() {
            assert!((l - (2 * n + 1) as f64).abs() < 1e-7, "level {n}: {l}");
        }
        let phi0 = PI.powf(-0.25);
        assert!((sys.phi(0, 0.0) - phi0).abs() < 1e-5);
        assert!((sys.phi(0, 1.3) - phi0 * (-0.5f64 * 1.69).exp()).abs() < 1e-5);
        assert!((sys.phi(1, -0.7) + sys.phi(1, 0.7)).abs() < 1e-14);
    }

    #[test]
    fn orthonormal_with_correct_nodes() {
        let sys = solve_spectrum(1.0, 6, 1e-8).unwrap();
        for m in 0..6 {
            assert_eq!(sys.sign_changes(m), m);
            for n in 0..6 {
                let want = if m == n { 1.0 } else { 0.0 };
                assert!((sys.inner(m, n) - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rescale_identity() {
        let sys = solve_spectrum(1.0, 2, 1e-8).unwrap();
        assert_eq!(sys.rescale_to_q(1.0).unwrap(), sys);
        assert!(sys.rescale_to_q(0.0).is_err());
    }

    #[test]
    fn weyl_constants() {
        assert!((weyl_constant(2.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((weyl_constant(1.0).unwrap() - 4.0 / (3.0 * PI)).abs() < 1e-12);
        assert!(weyl_constant(400.0).unwrap() < 2.0 / PI);
    }

    #[test]
    fn bad_inputs() {
        assert!(solve_spectrum(-1.0, 3, 1e-8).is_err());
        assert!(solve_spectrum(1.0, 0, 1e-8).is_err());
    }

    #[test]
    fn refinement_cap_reports_estimates() {
        let opts = SpectrumOptions {
            max_refinements: 0,
            base_h: 0.25,
            ..Default::default()
        };
        match solve_spectrum_with(1.0, 3, 1e-14, &opts) {
            Err(Error::Numerical { last, .. }) => assert_eq!(last.len(), 2),
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }
}
