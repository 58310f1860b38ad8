//! Monte Carlo estimates of Brownian motion weighted by
//! `exp(−β ∫ |B_r/(√2 r)|^α (1 + f(B_r, r)) dr)`.
//!
//! Path `i` of an estimate is drawn from its own Philox stream `(seed, i)`, so
//! an estimate does not depend on how the work is split across threads, and
//! two estimates with the same seed and step see the same Brownian paths
//! (common random numbers).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::model::ModelParams;
use crate::numeric::{self, Moments};
use crate::rng::CounterRng;
use statrs::function::gamma::ln_gamma;

/// Paths per parallel work item. Fixed so the reduction order never changes.
const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    /// Brownian motion started at `start`.
    ForwardWiener { start: f64 },
    /// Brownian bridge pinned at `start` and `end`.
    Bridge { start: f64, end: f64 },
}

/// Skeleton sampler on a uniform grid of `[s, t]` with spacing at most `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSampler {
    pub seed: u64,
    pub step: f64,
    pub scheme: Scheme,
}

impl PathSampler {
    /// Number of intervals and their common length.
    pub fn grid(&self, s: f64, t: f64) -> (usize, f64) {
        let n = ((t - s) / self.step).ceil().max(1.0) as usize;
        (n, (t - s) / n as f64)
    }

    /// Fill `out` with path `index` at times `s + k·dt`, `k = 0..=n`.
    pub fn sample(&self, index: u64, s: f64, t: f64, out: &mut Vec<f64>) {
        let (n, dt) = self.grid(s, t);
        let mut rng = CounterRng::new(self.seed, index as u128);
        out.clear();
        match self.scheme {
            Scheme::ForwardWiener { start } => {
                let sd = dt.sqrt();
                let mut b = start;
                out.push(b);
                for _ in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    b += sd * z;
                    out.push(b);
                }
            }
            Scheme::Bridge { start, end } => {
                let mut b = start;
                out.push(b);
                for k in 0..n - 1 {
                    // Remaining time before and after this step.
                    let left = (n - k) as f64 * dt;
                    let after = left - dt;
                    let mean = b + (end - b) * dt / left;
                    let sd = (dt * after / left).sqrt();
                    let z: f64 = rng.sample(StandardNormal);
                    b = mean + sd * z;
                    out.push(b);
                }
                out.push(end);
            }
        }
    }
}

/// The envelopes `f⁺` and `f⁻` bounding the correction term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub l: f64,
    pub a: f64,
    pub b: f64,
    /// Cap of the minus branch.
    pub eta: f64,
}

impl ErrorEnvelope {
    /// Envelope with η found by bisection for the given α.
    pub fn new(l: f64, a: f64, b: f64, alpha: f64) -> Result<Self> {
        if !(l > 0.0 && a > 0.0 && b > 0.0 && alpha > 0.0) {
            return Err(Error::domain(
                "envelope parameters L, a, b and alpha must be positive",
            ));
        }
        let eta = find_eta(l, a, b, alpha)?;
        Ok(ErrorEnvelope { l, a, b, eta })
    }

    fn raw(&self, y: f64, r: f64) -> f64 {
        self.l * ((y / r).abs().powf(self.a) + r.powf(-self.b))
    }

    pub fn plus(&self, y: f64, r: f64) -> f64 {
        self.raw(y, r).min(1.0)
    }

    pub fn minus(&self, y: f64, r: f64) -> f64 {
        -self.raw(y, r).min(self.eta)
    }

    /// Radius beyond which the minus branch keeps `(y/r)^α(1 + f⁻)` monotone.
    pub fn r0(&self) -> f64 {
        (2.0 * self.l).powf(1.0 / self.b)
    }
}

const ETA_GRID: usize = 1000;

/// Whether y ↦ (y/r)^α(1 − min(L(|y/r|^a + r^{−b}), η)) is non-decreasing on a
/// 10³ × 10³ grid of (y, r) with r ≥ (2L)^{1/b}.
///
/// The check uses the sign of the one-sided derivative in u = y/r, which is
/// u^{α−1}(α(1 − c) − (α + a)L u^a) below the point where the cap binds and
/// positive above it; that point is always on the grid.
pub fn eta_is_monotone(l: f64, a: f64, b: f64, alpha: f64, eta: f64) -> bool {
    let r0 = (2.0 * l).powf(1.0 / b);
    (0..ETA_GRID).all(|i| {
        let r = r0 * 10f64.powf(8.0 * i as f64 / (ETA_GRID - 1) as f64);
        let c = l * r.powf(-b);
        if c >= eta {
            // Capped everywhere: (y/r)^α(1 − η).
            return true;
        }
        let u_cap = ((eta - c) / l).powf(1.0 / a);
        let slope = |lu_a: f64| alpha * (1.0 - c) - (alpha + a) * lu_a;
        // Left limit at the kink, then points below it down to 10^{-3} u_cap.
        slope(eta - c) >= -1e-12
            && (1..ETA_GRID).all(|j| {
                let u = u_cap * 10f64.powf(-3.0 * j as f64 / (ETA_GRID - 1) as f64);
                slope(l * u.powf(a)) >= -1e-12
            })
    })
}

fn find_eta(l: f64, a: f64, b: f64, alpha: f64) -> Result<f64> {
    if eta_is_monotone(l, a, b, alpha, 0.5) {
        return Ok(0.5);
    }
    let mut lo = 1e-9;
    if !eta_is_monotone(l, a, b, alpha, lo) {
        return Err(Error::Numerical {
            message: "no admissible eta found for the minus envelope".into(),
            last: vec![lo],
        });
    }
    let mut hi = 0.5;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if eta_is_monotone(l, a, b, alpha, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    Ok(lo)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correction {
    /// f ≡ 0.
    #[default]
    None,
    Plus(ErrorEnvelope),
    Minus(ErrorEnvelope),
}

impl Correction {
    pub fn at(&self, y: f64, r: f64) -> f64 {
        match self {
            Correction::None => 0.0,
            Correction::Plus(e) => e.plus(y, r),
            Correction::Minus(e) => e.minus(y, r),
        }
    }
}

/// The integrand β|y/(√2 r)|^α(1 + f(y, r)).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub alpha: f64,
    pub beta: f64,
    pub correction: Correction,
}

impl Weight {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::domain(format!(
                "need alpha > 0 and beta >= 0, got {alpha}, {beta}"
            )));
        }
        Ok(Weight {
            alpha,
            beta,
            correction: Correction::None,
        })
    }

    /// The weight seen by the rotated coordinate of a model.
    pub fn for_model(params: &ModelParams) -> Result<Self> {
        Weight::new(params.alpha, params.effective_beta())
    }

    pub fn with_correction(mut self, correction: Correction) -> Self {
        self.correction = correction;
        self
    }

    /// ∫ of the integrand along a skeleton sampled every `dt` from time `s`.
    ///
    /// Trapezoidal rule away from 0. On steps that cross 0 or come within a
    /// few standard deviations of it, |y|^α is replaced by its mean under the
    /// Brownian bridge between the two skeleton points (4-point Gauss–Legendre
    /// in time), because the kink at 0 makes the trapezoidal sum biased by
    /// O(√dt) there.
    pub fn path_integral(&self, path: &[f64], s: f64, dt: f64) -> f64 {
        if self.beta == 0.0 {
            return 0.0;
        }
        let alpha = self.alpha;
        let moment = AbsMoment::new(alpha);
        let scale = |r: f64| (std::f64::consts::SQRT_2 * r).powf(-alpha);
        let rate =
            |y: f64, r: f64| y.abs().powf(alpha) * scale(r) * (1.0 + self.correction.at(y, r));
        let near = NEAR_ZERO_SDS * dt.sqrt();
        let mut total = 0.0;
        let mut r0 = s;
        let mut prev = rate(path[0], r0);
        for k in 1..path.len() {
            let r1 = s + k as f64 * dt;
            let next = rate(path[k], r1);
            let (y0, y1) = (path[k - 1], path[k]);
            if y0 * y1 <= 0.0 || y0.abs().min(y1.abs()) < near {
                let factor = 1.0 + 0.5 * (self.correction.at(y0, r0) + self.correction.at(y1, r1));
                let mut piece = 0.0;
                for (node, w) in GAUSS_LEGENDRE_4 {
                    let u = 0.5 * (1.0 + node);
                    let mean = y0 + (y1 - y0) * u;
                    let sd = (dt * u * (1.0 - u)).sqrt();
                    piece += 0.5 * w * moment.eval(mean, sd) * scale(r0 + u * dt);
                }
                total += dt * piece * factor;
            } else {
                total += 0.5 * dt * (prev + next);
            }
            prev = next;
            r0 = r1;
        }
        self.beta * total
    }
}

/// Distance from 0, in bridge standard deviations, below which a step is
/// integrated with the bridge mean.
const NEAR_ZERO_SDS: f64 = 2.5;

const GAUSS_LEGENDRE_4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// E|X|^α for X ~ N(m, σ²).
#[derive(Clone, Copy, Debug)]
pub struct AbsMoment {
    alpha: f64,
    /// 2^{α/2} Γ((α+1)/2)/√π.
    constant: f64,
}

impl AbsMoment {
    pub fn new(alpha: f64) -> Self {
        let constant = (0.5 * alpha * std::f64::consts::LN_2 + ln_gamma(0.5 * (alpha + 1.0))
            - 0.5 * std::f64::consts::PI.ln())
        .exp();
        AbsMoment { alpha, constant }
    }

    /// σ^α 2^{α/2} Γ((α+1)/2)/√π · e^{−z} ₁F₁((1+α)/2; 1/2; z) with z = m²/(2σ²).
    pub fn eval(&self, m: f64, sd: f64) -> f64 {
        let alpha = self.alpha;
        if sd == 0.0 {
            return m.abs().powf(alpha);
        }
        let z = m * m / (2.0 * sd * sd);
        if z > 25.0 {
            // Far from 0: E(m + σZ)^α = m^α Σ_k C(α, 2k)(2k−1)!! (σ/m)^{2k}.
            let r = sd * sd / (m * m);
            let c2 = alpha * (alpha - 1.0) / 2.0;
            let c4 = c2 * (alpha - 2.0) * (alpha - 3.0) / 12.0;
            let c6 = c4 * (alpha - 4.0) * (alpha - 5.0) / 30.0;
            return m.abs().powf(alpha) * (1.0 + r * (c2 + r * (3.0 * c4 + r * 15.0 * c6)));
        }
        let a = 0.5 * (1.0 + alpha);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 0..400 {
            let kf = k as f64;
            term *= (a + kf) / (0.5 + kf) * z / (kf + 1.0);
            sum += term;
            if term < 1e-16 * sum {
                break;
            }
        }
        self.constant * sd.powf(alpha) * (-z).exp() * sum
    }
}

/// Sample size, step, seed and execution mode of an estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub step: f64,
    pub seed: u64,
    #[serde(default)]
    pub exec: Execution,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_samples: 10_000,
            step: 0.01,
            seed: 0,
            exec: Execution::Parallel,
        }
    }
}

impl McConfig {
    fn check(&self) -> Result<()> {
        if self.n_samples < 100 {
            return Err(Error::config(format!(
                "need at least 100 samples, got {}",
                self.n_samples
            )));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::config(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub integrator_step: f64,
}

/// Mean and standard error of `f(path)` over `n` paths, reduced in chunk order.
fn monte_carlo<F>(sampler: &PathSampler, s: f64, t: f64, n: usize, exec: Execution, f: F) -> Moments
where
    F: Fn(&[f64], f64) -> f64 + Sync + Send,
{
    let (_, dt) = sampler.grid(s, t);
    let chunks = n.div_ceil(CHUNK);
    let parts = map_indexed(chunks, exec, |c| {
        let mut path = Vec::new();
        let mut m = Moments::default();
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            sampler.sample(i as u64, s, t, &mut path);
            m.push(f(&path, dt));
        }
        m
    });
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    total
}

fn check_times(s: f64, t: f64, step: f64) -> Result<()> {
    if !(s > 0.0) || !(t >= s) || !t.is_finite() {
        return Err(Error::domain(format!(
            "need 0 < s <= t, got s = {s}, t = {t}"
        )));
    }
    if step > s.min(1.0) / 10.0 + 1e-15 {
        return Err(Error::config(format!(
            "step {step} exceeds min(1, s)/10 = {}",
            s.min(1.0) / 10.0
        )));
    }
    Ok(())
}

/// E_{(s,x)}[exp(−∫_s^t weight)] from forward paths.
pub fn estimate_total_mass(
    s: f64,
    x: f64,
    t: f64,
    weight: &Weight,
    cfg: &McConfig,
) -> Result<KernelEstimate> {
    cfg.check()?;
    check_times(s, t, cfg.step)?;
    if t == s || weight.beta == 0.0 {
        return Ok(KernelEstimate {
            value: 1.0,
            stderr: 0.0,
            n_samples: cfg.n_samples,
            integrator_step: cfg.step,
        });
    }
    let sampler = PathSampler {
        seed: cfg.seed,
        step: cfg.step,
        scheme: Scheme::ForwardWiener { start: x },
    };
    let m = monte_carlo(&sampler, s, t, cfg.n_samples, cfg.exec, |p, dt| {
        (-weight.path_integral(p, s, dt)).exp()
    });
    Ok(KernelEstimate {
        value: m.mean(),
        stderr: m.stderr(),
        n_samples: cfg.n_samples,
        integrator_step: sampler.grid(s, t).1,
    })
}

/// Gaussian transition density from x to y over time `dt`.
pub fn heat_kernel(x: f64, y: f64, dt: f64) -> f64 {
    (-(y - x).powi(2) / (2.0 * dt)).exp() / (2.0 * std::f64::consts::PI * dt).sqrt()
}

/// G̃(s, x; t, y): bridge expectation of the weight times the heat kernel.
pub fn estimate_gtilde(
    s: f64,
    x: f64,
    t: f64,
    y: f64,
    weight: &Weight,
    cfg: &McConfig,
) -> Result<KernelEstimate> {
    cfg.check()?;
    check_times(s, t, cfg.step)?;
    if t == s {
        return Err(Error::domain("G~ needs t > s"));
    }
    let pre = heat_kernel(x, y, t - s);
    let sampler = PathSampler {
        seed: cfg.seed,
        step: cfg.step,
        scheme: Scheme::Bridge { start: x, end: y },
    };
    let m = monte_carlo(&sampler, s, t, cfg.n_samples, cfg.exec, |p, dt| {
        (-weight.path_integral(p, s, dt)).exp()
    });
    Ok(KernelEstimate {
        value: pre * m.mean(),
        stderr: pre * m.stderr(),
        n_samples: cfg.n_samples,
        integrator_step: sampler.grid(s, t).1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    /// Weighted mass of bridges leaving the tube |B_r| < r^{(κ+η)/2}.
    pub outside: KernelEstimate,
    pub gtilde: KernelEstimate,
    pub ratio: f64,
}

/// Share of G̃ carried by bridges that leave the tube |B_r| < r^{(κ+η)/2}.
#[allow(clippy::too_many_arguments)]
pub fn localization_probe(
    s: f64,
    x: f64,
    t: f64,
    y: f64,
    eta_exponent: f64,
    weight: &Weight,
    cfg: &McConfig,
) -> Result<LocalizationReport> {
    if !(eta_exponent > 0.0) {
        return Err(Error::domain("the tube exponent eta must be positive"));
    }
    let gtilde = estimate_gtilde(s, x, t, y, weight, cfg)?;
    let k = crate::model::kappa(weight.alpha);
    let power = 0.5 * (k + eta_exponent);
    let pre = heat_kernel(x, y, t - s);
    let sampler = PathSampler {
        seed: cfg.seed,
        step: cfg.step,
        scheme: Scheme::Bridge { start: x, end: y },
    };
    let m = monte_carlo(&sampler, s, t, cfg.n_samples, cfg.exec, |p, dt| {
        let exits = p
            .iter()
            .enumerate()
            .any(|(i, b)| b.abs() >= (s + i as f64 * dt).powf(power));
        if exits {
            (-weight.path_integral(p, s, dt)).exp()
        } else {
            0.0
        }
    });
    let outside = KernelEstimate {
        value: pre * m.mean(),
        stderr: pre * m.stderr(),
        n_samples: cfg.n_samples,
        integrator_step: gtilde.integrator_step,
    };
    let ratio = if gtilde.value > 0.0 {
        outside.value / gtilde.value
    } else {
        0.0
    };
    Ok(LocalizationReport {
        outside,
        gtilde,
        ratio,
    })
}

/// Exponent of E[exp(−β∫_s^t (Y_r/r)² dr)] ∼ C (s/t)^{(√(1+8β)−1)/4}.
pub fn alpha2_exponent(beta: f64) -> f64 {
    0.25 * ((1.0 + 8.0 * beta).sqrt() - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaTwoFit {
    pub beta: f64,
    pub t: f64,
    pub s_list: Vec<f64>,
    pub estimates: Vec<KernelEstimate>,
    /// Slope of log(estimate) against log(s/t).
    pub slope: f64,
    pub slope_stderr: f64,
    /// 95% confidence interval for the slope.
    pub ci: (f64, f64),
    pub r2: f64,
    pub expected: f64,
    /// Set when the fit is poor (r² < 0.99).
    pub warning: Option<String>,
}

/// Fit the α = 2 exponent by simulating the weight at each s in `s_list`.
///
/// With Y_r = √r W(log(r/s)) the weight becomes exp(−β∫W(u)² du) for an
/// Ornstein–Uhlenbeck process W with unit noise and drift −W/2, which is
/// sampled exactly; `cfg.step` is the spacing in u = log(r/s).
pub fn alpha2_exponent_fit(
    beta: f64,
    s_list: &[f64],
    t: f64,
    cfg: &McConfig,
) -> Result<AlphaTwoFit> {
    cfg.check()?;
    if !(beta >= 0.0) {
        return Err(Error::domain("beta must be nonnegative"));
    }
    if s_list.len() < 3 {
        return Err(Error::domain("need at least three values of s"));
    }
    if s_list.iter().any(|s| !(*s > 0.0 && *s < t)) {
        return Err(Error::domain("every s must satisfy 0 < s < t"));
    }
    let mut estimates = Vec::with_capacity(s_list.len());
    for (idx, &s) in s_list.iter().enumerate() {
        let span = (t / s).ln();
        let n_steps = (span / cfg.step).ceil().max(1.0) as usize;
        let du = span / n_steps as f64;
        let decay = (-0.5 * du).exp();
        let sd = (1.0 - (-du).exp()).sqrt();
        let seed = cfg.seed;
        let chunks = cfg.n_samples.div_ceil(CHUNK);
        let parts = map_indexed(chunks, cfg.exec, |c| {
            let mut m = Moments::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(cfg.n_samples) {
                let stream = ((idx as u128) << 64) | i as u128;
                let mut rng = CounterRng::new(seed, stream);
                let mut w = 0.0f64;
                let mut integral = 0.0;
                for _ in 0..n_steps {
                    let z: f64 = rng.sample(StandardNormal);
                    let next = w * decay + sd * z;
                    integral += 0.5 * du * (w * w + next * next);
                    w = next;
                }
                m.push((-beta * integral).exp());
            }
            m
        });
        let mut m = Moments::default();
        for p in &parts {
            m.merge(p);
        }
        estimates.push(KernelEstimate {
            value: m.mean(),
            stderr: m.stderr(),
            n_samples: cfg.n_samples,
            integrator_step: du,
        });
    }
    let xs: Vec<f64> = s_list.iter().map(|s| (s / t).ln()).collect();
    let ys: Vec<f64> = estimates.iter().map(|e| e.value.ln()).collect();
    let ws: Vec<f64> = estimates
        .iter()
        .map(|e| {
            let rel = if e.value > 0.0 {
                e.stderr / e.value
            } else {
                0.0
            };
            if rel > 0.0 {
                1.0 / (rel * rel)
            } else {
                1.0
            }
        })
        .collect();
    let fit = if beta == 0.0 {
        numeric::fit_line(&xs, &ys)
    } else {
        numeric::fit_line_weighted(&xs, &ys, &ws)
    };
    let half = 1.96 * fit.slope_stderr;
    let warning = (fit.r_squared < 0.99 && beta > 0.0)
        .then(|| format!("poor fit: r^2 = {:.4}", fit.r_squared));
    Ok(AlphaTwoFit {
        beta,
        t,
        s_list: s_list.to_vec(),
        estimates,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        ci: (fit.slope - half, fit.slope + half),
        r2: fit.r_squared,
        expected: alpha2_exponent(beta),
        warning,
    })
}

/// P(a Brownian bridge from (s, x) to (t, y) reaches K) = exp(−2(K−x)(K−y)/(t−s)).
pub fn bridge_barrier_probability(s: f64, x: f64, t: f64, y: f64, k: f64) -> Result<f64> {
    if !(t > s) {
        return Err(Error::domain(format!("need t > s, got s = {s}, t = {t}")));
    }
    if !(x < k && y < k) {
        return Err(Error::domain(format!(
            "need x, y < K, got x = {x}, y = {y}, K = {k}"
        )));
    }
    Ok((-2.0 * (k - x) * (k - y) / (t - s)).exp())
}

/// Monte Carlo estimate of the barrier probability from bridge skeletons.
///
/// Each path contributes 1 − Π(1 − p_i), where p_i is the exact probability
/// that the bridge between two consecutive skeleton points reaches K. This
/// removes the discretisation bias of checking the skeleton alone.
pub fn bridge_barrier_mc(
    s: f64,
    x: f64,
    t: f64,
    y: f64,
    k: f64,
    cfg: &McConfig,
) -> Result<KernelEstimate> {
    bridge_barrier_probability(s, x, t, y, k)?;
    cfg.check()?;
    let sampler = PathSampler {
        seed: cfg.seed,
        step: cfg.step,
        scheme: Scheme::Bridge { start: x, end: y },
    };
    let m = monte_carlo(&sampler, s, t, cfg.n_samples, cfg.exec, |p, dt| {
        let mut stay = 1.0;
        for w in p.windows(2) {
            if w[0] >= k || w[1] >= k {
                return 1.0;
            }
            stay *= 1.0 - (-2.0 * (k - w[0]) * (k - w[1]) / dt).exp();
        }
        1.0 - stay
    });
    Ok(KernelEstimate {
        value: m.mean(),
        stderr: m.stderr(),
        n_samples: cfg.n_samples,
        integrator_step: sampler.grid(s, t).1,
    })
}

/// log I₀(z) for z ≥ 0: power series below 20, asymptotic series above.
pub fn log_bessel_i0(z: f64) -> f64 {
    let z = z.abs();
    if z < 20.0 {
        let q = 0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            term *= q / (k as f64 * k as f64);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        sum.ln()
    } else {
        // Σ_k ((2k−1)!!)² / (k! (8z)^k), truncated at its smallest term.
        let mut term = 1.0f64;
        let mut sum = 1.0;
        for k in 1..60 {
            let next = term * ((2 * k - 1) as f64).powi(2) / (k as f64 * 8.0 * z);
            if next >= term {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 {
                break;
            }
        }
        z - 0.5 * (2.0 * std::f64::consts::PI * z).ln() + sum.ln()
    }
}

/// Density at z of the 2D Bessel process started at radius r0 after time s.
pub fn bessel_density(r0: f64, s: f64, z: f64) -> Result<f64> {
    if !(s > 0.0) || !(z >= 0.0) || !(r0 >= 0.0) {
        return Err(Error::domain(format!(
            "need s > 0, z >= 0 and r0 >= 0, got s = {s}, z = {z}, r0 = {r0}"
        )));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let log = (z / s).ln() - (r0 * r0 + z * z) / (2.0 * s) + log_bessel_i0(r0 * z / s);
    Ok(log.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridge_hits_endpoints() {
        let sampler = PathSampler {
            seed: 3,
            step: 0.1,
            scheme: Scheme::Bridge {
                start: 0.2,
                end: -1.0,
            },
        };
        let mut p = Vec::new();
        sampler.sample(5, 1.0, 2.05, &mut p);
        assert_eq!(p.len(), 12);
        assert_eq!(p[0], 0.2);
        assert_eq!(*p.last().unwrap(), -1.0);
    }

    #[test]
    fn abs_moment_closed_forms() {
        use statrs::function::erf::erf;
        let one = AbsMoment::new(1.0);
        let two = AbsMoment::new(2.0);
        for &(m, sd) in &[(0.0, 1.0), (0.3, 0.2), (-1.5, 0.7), (2.0, 0.01), (0.0, 0.0)] {
            let z = if sd > 0.0 { m / sd } else { f64::INFINITY };
            let want = if sd > 0.0 {
                sd * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * z * z).exp()
                    + m * erf(z / std::f64::consts::SQRT_2)
            } else {
                m.abs()
            };
            // statrs erf is good to about 1e-12 here.
            assert!((one.eval(m, sd) - want).abs() < 1e-10, "{m} {sd}");
            assert!((two.eval(m, sd) - (m * m + sd * sd)).abs() < 1e-12);
        }
    }

    #[test]
    fn bessel_series_and_asymptotic_meet() {
        // d/dz log I₀ = I₁/I₀ ≈ 0.97467 at z = 20.
        let below = log_bessel_i0(20.0 - 1e-6);
        let above = log_bessel_i0(20.0);
        assert!(
            (above - below - 0.974_670_5e-6).abs() < 1e-12,
            "{}",
            above - below
        );
        assert_eq!(log_bessel_i0(0.0), 0.0);
    }

    #[test]
    fn eta_closed_form() {
        // Monotonicity fails first as r → ∞, which gives η = min(1/2, α/(α+a)).
        let env = ErrorEnvelope::new(1.0, 2.0, 1.0, 1.0).unwrap();
        assert!((env.eta - 1.0 / 3.0).abs() < 1e-6, "{}", env.eta);
        assert_eq!(ErrorEnvelope::new(0.3, 0.5, 2.0, 1.5).unwrap().eta, 0.5);
    }
}
