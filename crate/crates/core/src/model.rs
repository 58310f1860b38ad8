//! Model parameters, branching-rate families and closed-form constants.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest number of samples accepted for a user-supplied rate table.
pub const MIN_TABLE_POINTS: usize = 16;

/// Wrap an angle to the half-open interval (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = theta.rem_euclid(two_pi);
    if w > PI {
        w -= two_pi;
    }
    // rem_euclid maps −π to π already; guard the boundary against rounding.
    if w <= -PI {
        w += two_pi;
    }
    w
}

/// Angle of a planar point in (−π, π]; the origin is assigned angle 0.
pub fn angle_of(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        return 0.0;
    }
    let a = y.atan2(x);
    if a == -PI {
        PI
    } else {
        a
    }
}

/// Branching rate sampled on the uniform grid θ_k = −π + 2πk/(n−1).
#[derive(Clone, Debug, PartialEq)]
pub struct RateTable {
    values: Vec<f64>,
    source: Option<PathBuf>,
}

impl RateTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_TABLE_POINTS {
            return Err(Error::config(format!(
                "rate table needs at least {MIN_TABLE_POINTS} points, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::config(format!(
                "rate table value {bad} outside [0, 1]"
            )));
        }
        let (first, last) = (values[0], values[values.len() - 1]);
        if first != last {
            return Err(Error::config(format!(
                "rate table is not 2π-periodic: b(−π) = {first} but b(π) = {last}"
            )));
        }
        Ok(RateTable {
            values,
            source: None,
        })
    }

    /// Table that is constant equal to `p` everywhere.
    pub fn constant(p: f64) -> Result<Self> {
        Self::new(vec![p; MIN_TABLE_POINTS])
    }

    /// Read one value per line; blank lines and lines starting with `#` are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                Error::config(format!(
                    "{}:{}: not a number: {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            values.push(v);
        }
        let mut t = Self::new(values)?;
        t.source = Some(path.to_path_buf());
        Ok(t)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let n = self.values.len();
        let u = (wrap_angle(theta) + PI) / (2.0 * PI) * (n - 1) as f64;
        let k = (u.floor() as usize).min(n - 2);
        let w = u - k as f64;
        let v = (1.0 - w) * self.values[k] + w * self.values[k + 1];
        v.clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RateFamily {
    /// b(θ) = 1 − |sin(θ/2)|^α.
    SinPow,
    /// b(θ) = max(1 − β|θ|^α, 0).
    PowClamp,
    /// b ≡ 1.
    Homogeneous,
    Custom(RateTable),
}

impl RateFamily {
    pub fn name(&self) -> &'static str {
        match self {
            RateFamily::SinPow => "sin_pow",
            RateFamily::PowClamp => "pow_clamp",
            RateFamily::Homogeneous => "homogeneous",
            RateFamily::Custom(_) => "custom",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub rate_family: RateFamily,
    pub validate_theorem_range: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    alpha: f64,
    beta: f64,
    rate_family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<PathBuf>,
    #[serde(default)]
    validate_theorem_range: bool,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, rate_family: RateFamily) -> Result<Self> {
        let p = ModelParams {
            alpha,
            beta,
            rate_family,
            validate_theorem_range: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn sin_pow(alpha: f64) -> Result<Self> {
        Self::new(alpha, 2f64.powf(-alpha), RateFamily::SinPow)
    }

    pub fn homogeneous() -> Self {
        ModelParams {
            alpha: 1.0,
            beta: 1.0,
            rate_family: RateFamily::Homogeneous,
            validate_theorem_range: false,
        }
    }

    pub fn constant_rate(p: f64) -> Result<Self> {
        Self::new(1.0, 1.0, RateFamily::Custom(RateTable::constant(p)?))
    }

    pub fn with_theorem_range(mut self) -> Result<Self> {
        self.validate_theorem_range = true;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::domain(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::domain(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if self.validate_theorem_range && !(self.alpha > 2.0 / 3.0 && self.alpha < 2.0) {
            return Err(Error::domain(format!(
                "alpha = {} outside the range (2/3, 2) covered by the tightness theorem",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        kappa(self.alpha)
    }

    /// Coefficient β of the small-angle expansion b(θ) ≈ 1 − β|θ|^α.
    ///
    /// For the sine family this is 2^{−α} regardless of the stored `beta`.
    pub fn effective_beta(&self) -> f64 {
        match self.rate_family {
            RateFamily::SinPow => 2f64.powf(-self.alpha),
            _ => self.beta,
        }
    }

    /// Whether b_α(θ) is pointwise non-decreasing in α, as needed for coupling.
    pub fn is_monotone_in_alpha(&self) -> bool {
        matches!(
            self.rate_family,
            RateFamily::SinPow | RateFamily::Homogeneous
        )
    }

    pub fn branching_rate(&self, theta: f64) -> f64 {
        branching_rate(theta, self)
    }

    /// Branching rate at a planar position.
    pub fn rate_at(&self, x: f64, y: f64) -> f64 {
        match self.rate_family {
            RateFamily::Homogeneous => 1.0,
            _ => self.branching_rate(angle_of(x, y)),
        }
    }

    pub fn to_config_string(&self) -> Result<String> {
        let table = match &self.rate_family {
            RateFamily::Custom(t) => {
                Some(t.source().map(Path::to_path_buf).ok_or_else(|| {
                    Error::config("custom rate table has no file path to serialize")
                })?)
            }
            _ => None,
        };
        let cfg = ConfigFile {
            alpha: self.alpha,
            beta: self.beta,
            rate_family: self.rate_family.name().to_string(),
            table,
            validate_theorem_range: self.validate_theorem_range,
        };
        Ok(toml::to_string(&cfg)?)
    }

    /// Parse a config; a relative table path is resolved against `base_dir`.
    pub fn from_config_str(text: &str, base_dir: &Path) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text)?;
        let rate_family = match cfg.rate_family.as_str() {
            "sin_pow" => RateFamily::SinPow,
            "pow_clamp" => RateFamily::PowClamp,
            "homogeneous" => RateFamily::Homogeneous,
            "custom" => {
                let path = cfg.table.as_ref().ok_or_else(|| {
                    Error::config("rate_family = \"custom\" requires a table path")
                })?;
                let resolved = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                let mut t = RateTable::from_file(&resolved)?;
                t.source = Some(path.clone());
                RateFamily::Custom(t)
            }
            other => return Err(Error::config(format!("unknown rate family {other:?}"))),
        };
        let p = ModelParams {
            alpha: cfg.alpha,
            beta: cfg.beta,
            rate_family,
            validate_theorem_range: cfg.validate_theorem_range,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Branching rate b(θ) for the configured family.
pub fn branching_rate(theta: f64, params: &ModelParams) -> f64 {
    let w = wrap_angle(theta);
    match &params.rate_family {
        RateFamily::SinPow => 1.0 - (0.5 * w).sin().abs().powf(params.alpha),
        RateFamily::PowClamp => (1.0 - params.beta * w.abs().powf(params.alpha)).max(0.0),
        RateFamily::Homogeneous => 1.0,
        RateFamily::Custom(t) => t.eval(w),
    }
}

pub fn kappa(alpha: f64) -> f64 {
    2.0 * alpha / (2.0 + alpha)
}

/// ∫₀^T (1−s)^{−κ} ds.
pub fn integral_singular_rate(kappa: f64, horizon: f64) -> f64 {
    (1.0 - (1.0 - horizon).powf(1.0 - kappa)) / (1.0 - kappa)
}

/// ϑ₁ written as λ₀ β^{2/(2+α)} 2^{−2α/(2+α)} / (1 − κ).
pub fn theta1(alpha: f64, beta: f64, lambda0: f64) -> f64 {
    let k = kappa(alpha);
    lambda0 * beta.powf(2.0 / (2.0 + alpha)) * 2f64.powf(-2.0 * alpha / (2.0 + alpha)) / (1.0 - k)
}

/// ϑ₁ written as λ₀ (2+α)/(2−α) β^{2/(2+α)} / 2^{2α/(2+α)}.
pub fn theta1_expanded(alpha: f64, beta: f64, lambda0: f64) -> f64 {
    lambda0 * (2.0 + alpha) / (2.0 - alpha) * beta.powf(2.0 / (2.0 + alpha))
        / 2f64.powf(2.0 * alpha / (2.0 + alpha))
}

/// Constants derived from (α, β) and the ground-state eigenvalue λ₀.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub lambda0: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl DerivedConstants {
    pub fn new(alpha: f64, beta: f64, lambda0: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && lambda0 > 0.0) {
            return Err(Error::domain("alpha, beta and lambda0 must be positive"));
        }
        Ok(DerivedConstants {
            alpha,
            beta,
            kappa: kappa(alpha),
            lambda0,
            theta1: theta1(alpha, beta, lambda0),
            theta2: (2.0 * beta).powf(1.0 / (2.0 + alpha)),
        })
    }

    /// Constants for a model, using its effective small-angle β.
    pub fn for_model(params: &ModelParams, lambda0: f64) -> Result<Self> {
        Self::new(params.alpha, params.effective_beta(), lambda0)
    }

    /// Coefficient of log t in the centering.
    pub fn log_coefficient(&self) -> f64 {
        let a = self.alpha;
        3.0 / (2.0 * SQRT_2) - a / (2.0 * SQRT_2 * (2.0 + a))
    }

    /// Time scale factor ϱ = β^{2/(2+α)} 2^{−2α/(2+α)} t^{1−κ} linking the kernel to the PDE.
    pub fn rho_at(&self, t: f64) -> f64 {
        let a = self.alpha;
        self.beta.powf(2.0 / (2.0 + a)) * 2f64.powf(-2.0 * a / (2.0 + a)) * t.powf(1.0 - self.kappa)
    }
}

fn polynomial_part(s: f64, c: &DerivedConstants) -> f64 {
    SQRT_2 * s - c.theta1 / SQRT_2 * s.powf(1.0 - c.kappa)
}

/// Centering m(t) = √2 t − (ϑ₁/√2) t^{1−κ} − (3/(2√2) − α/(2√2(2+α))) log t, for t ≥ 1.
pub fn centering_m(t: f64, c: &DerivedConstants) -> Result<f64> {
    if !(t >= 1.0) || !t.is_finite() {
        return Err(Error::domain(format!("centering needs t >= 1, got {t}")));
    }
    Ok(polynomial_part(t, c) - c.log_coefficient() * t.ln())
}

/// Curved barrier m⁺(s) = √2 s − (ϑ₁/√2) s^{1−κ} + 10 log s, for s ≥ 1.
pub fn barrier_m_plus(s: f64, c: &DerivedConstants) -> Result<f64> {
    if !(s >= 1.0) || !s.is_finite() {
        return Err(Error::domain(format!("barrier needs s >= 1, got {s}")));
    }
    Ok(polynomial_part(s, c) + 10.0 * s.ln())
}

/// Conjectured log-coefficients outside the theorem range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjectureReport {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    /// Log-coefficient conjectured for α = 2: 3/(2√2) + (√(1+8β) − 1)/(4√2).
    pub alpha_two_log_coefficient: f64,
    /// Log-coefficient conjectured for α > 2: (1 + 1/α)/√2.
    pub alpha_above_two_log_coefficient: f64,
    /// Exponent (√(1+8β) − 1)/4 of the α = 2 weighted Gaussian functional.
    pub alpha_two_exponent: f64,
    pub in_theorem_range: bool,
}

pub fn conjectured_corrections(params: &ModelParams) -> ConjectureReport {
    let beta = params.effective_beta();
    let root = (1.0 + 8.0 * beta).sqrt();
    ConjectureReport {
        alpha: params.alpha,
        beta,
        kappa: params.kappa(),
        alpha_two_log_coefficient: 3.0 / (2.0 * SQRT_2) + (root - 1.0) / (4.0 * SQRT_2),
        alpha_above_two_log_coefficient: (1.0 + 1.0 / params.alpha) / SQRT_2,
        alpha_two_exponent: (root - 1.0) / 4.0,
        in_theorem_range: params.alpha > 2.0 / 3.0 && params.alpha < 2.0,
    }
}

impl ConjectureReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "alpha = {}, beta = {}, kappa = {}",
            self.alpha, self.beta, self.kappa
        );
        let _ = writeln!(
            s,
            "conjectured log coefficient (alpha = 2): {}",
            self.alpha_two_log_coefficient
        );
        let _ = writeln!(
            s,
            "conjectured log coefficient (alpha > 2): {}",
            self.alpha_above_two_log_coefficient
        );
        if !self.in_theorem_range {
            let _ = writeln!(
                s,
                "note: alpha outside (2/3, 2); the tightness theorem does not apply"
            );
        }
        s
    }
}

/// Lower and upper tubes g_t^∓ used to define good particles, and the set Γ_{s0}(t).
#[derive(Clone, Copy, Debug)]
pub struct Tube {
    pub t: f64,
    pub s0: f64,
    pub eps: f64,
    pub m_t: f64,
}

impl Tube {
    pub fn new(t: f64, s0: f64, eps: f64, c: &DerivedConstants) -> Result<Self> {
        if !(0.0 <= s0 && s0 < t) {
            return Err(Error::domain("tube needs 0 <= s0 < t"));
        }
        Ok(Tube {
            t,
            s0,
            eps,
            m_t: centering_m(t, c)?,
        })
    }

    pub fn upper(&self, s: f64) -> f64 {
        self.m_t / self.t * s
            - ((s - self.s0).min(self.t - s))
                .max(0.0)
                .powf((1.0 - self.eps) / 2.0)
    }

    pub fn lower(&self, s: f64) -> f64 {
        self.m_t / self.t * s - s.powf((1.0 + self.eps) / 2.0)
    }

    /// Whether a path sampled at `(s, x, y)` points is a member of Γ_{s0}(t).
    pub fn contains(&self, samples: &[(f64, f64, f64)], sigma: f64) -> bool {
        let Some(&(_, x_end, _)) = samples.last() else {
            return false;
        };
        if !(x_end >= self.m_t - 1.0 && x_end <= self.m_t) {
            return false;
        }
        samples
            .iter()
            .filter(|(s, _, _)| *s >= self.s0)
            .all(|&(s, x, y)| y.abs() <= sigma * s && x >= self.lower(s) && x <= self.upper(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_boundaries() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn sin_pow_special_values() {
        let p = ModelParams::sin_pow(1.0).unwrap();
        assert_eq!(p.branching_rate(0.0), 1.0);
        assert!(p.branching_rate(PI).abs() < 1e-15);
        assert!((p.branching_rate(2.0 * PI + 0.3) - p.branching_rate(0.3)).abs() < 1e-12);
    }

    #[test]
    fn origin_has_full_rate() {
        let p = ModelParams::sin_pow(1.0).unwrap();
        assert_eq!(p.rate_at(0.0, 0.0), 1.0);
    }

    #[test]
    fn pow_clamp_floor() {
        let p = ModelParams::new(1.0, 1.0, RateFamily::PowClamp).unwrap();
        assert_eq!(p.branching_rate(2.0), 0.0);
        assert!((p.branching_rate(0.25) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn table_rejects_bad_input() {
        assert!(RateTable::new(vec![0.5; 8]).is_err());
        let mut v = vec![0.5; 16];
        v[15] = 0.4;
        assert!(RateTable::new(v).is_err());
        let mut v = vec![0.5; 16];
        v[3] = 1.2;
        assert!(RateTable::new(v).is_err());
    }

    #[test]
    fn table_interpolates() {
        let mut v: Vec<f64> = (0..17).map(|k| (k as f64 / 16.0 - 0.5).abs()).collect();
        v[16] = v[0];
        let t = RateTable::new(v).unwrap();
        assert!((t.eval(0.0) - 0.0).abs() < 1e-12);
        assert!((t.eval(PI / 2.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn theorem_range_enforced() {
        let p = ModelParams::new(2.5, 1.0, RateFamily::PowClamp).unwrap();
        assert!(p.with_theorem_range().is_err());
        assert!(ModelParams::new(-1.0, 1.0, RateFamily::PowClamp).is_err());
        assert!(ModelParams::new(1.0, 0.0, RateFamily::PowClamp).is_err());
    }

    #[test]
    fn centering_domain() {
        let c = DerivedConstants::new(1.0, 1.0, 1.0187929716).unwrap();
        assert!(centering_m(0.5, &c).is_err());
        let m1 = centering_m(1.0, &c).unwrap();
        assert!((m1 - (SQRT_2 - c.theta1 / SQRT_2)).abs() < 1e-14);
        assert!((c.log_coefficient() - 4.0 / (3.0 * SQRT_2)).abs() < 1e-15);
        assert!(barrier_m_plus(1.0, &c).unwrap() == m1);
        assert!(barrier_m_plus(0.9, &c).is_err());
    }

    #[test]
    fn conjectures() {
        let p = ModelParams::new(2.0, 1.0, RateFamily::PowClamp).unwrap();
        let r = conjectured_corrections(&p);
        assert!((r.alpha_two_log_coefficient - 2.0 / SQRT_2).abs() < 1e-14);
        assert!((r.alpha_two_exponent - 0.5).abs() < 1e-15);
        let p = ModelParams::new(4.0, 1.0, RateFamily::PowClamp).unwrap();
        assert!(
            (conjectured_corrections(&p).alpha_above_two_log_coefficient - 1.25 / SQRT_2).abs()
                < 1e-15
        );
        let p = ModelParams::new(2.0, 1e-12, RateFamily::PowClamp).unwrap();
        let r = conjectured_corrections(&p);
        assert!((r.alpha_two_log_coefficient - 3.0 / (2.0 * SQRT_2)).abs() < 1e-10);
    }

    #[test]
    fn config_round_trip() {
        let p = ModelParams::new(0.1 + 0.2, 1.0 / 3.0, RateFamily::PowClamp).unwrap();
        let text = p.to_config_string().unwrap();
        let q = ModelParams::from_config_str(&text, Path::new(".")).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.alpha.to_bits(), q.alpha.to_bits());
    }

    #[test]
    fn config_with_table() {
        let dir = tempfile::tempdir().unwrap();
        let body: String = (0..20).map(|_| "0.25\n").collect();
        std::fs::write(dir.path().join("b.txt"), body).unwrap();
        let text = "alpha = 1.0\nbeta = 1.0\nrate_family = \"custom\"\ntable = \"b.txt\"\n";
        let p = ModelParams::from_config_str(text, dir.path()).unwrap();
        assert_eq!(p.branching_rate(1.0), 0.25);
        let again =
            ModelParams::from_config_str(&p.to_config_string().unwrap(), dir.path()).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn tube_shapes() {
        let c = DerivedConstants::new(1.0, 1.0, 1.0187929716).unwrap();
        let tube = Tube::new(100.0, 1.0, 0.1, &c).unwrap();
        assert!(tube.lower(50.0) < tube.upper(50.0));
        assert!((tube.upper(100.0) - tube.m_t).abs() < 1e-12);
    }
}
