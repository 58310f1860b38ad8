//! Piecewise lower and upper bounds `q_*(t) ≤ (1-t)^{-α} ≤ q^*(t)` on `[0, T]`
//! that are constant near both ends of the interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::kappa;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// q_*, below the singular profile.
    Lower,
    /// q^*, above the singular profile.
    Upper,
}

/// One piece of a barrier on `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Piece {
    Constant {
        start: f64,
        end: f64,
        value: f64,
    },
    /// Straight line between the endpoint values.
    Linear {
        start: f64,
        end: f64,
        from: f64,
        to: f64,
    },
    /// The singular profile (1−t)^{−α} itself.
    Singular {
        start: f64,
        end: f64,
    },
}

impl Piece {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            Piece::Constant { start, end, .. }
            | Piece::Linear { start, end, .. }
            | Piece::Singular { start, end } => (start, end),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierPair {
    pub alpha: f64,
    pub horizon: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub lower: Vec<Piece>,
    pub upper: Vec<Piece>,
}

fn singular(alpha: f64, t: f64) -> f64 {
    (1.0 - t).powf(-alpha)
}

/// Build q_* and q^* on `[0, horizon]`.
pub fn build_barriers(horizon: f64, eps1: f64, eps2: f64, alpha: f64) -> Result<BarrierPair> {
    if !(alpha > 0.0) {
        return Err(Error::domain("alpha must be positive"));
    }
    if !(horizon > 0.0 && horizon < 1.0) {
        return Err(Error::domain(format!(
            "horizon must lie in (0, 1), got {horizon}"
        )));
    }
    if !(eps1 > 0.0 && eps1 <= horizon / 10.0) {
        return Err(Error::domain(format!(
            "need 0 < eps1 <= T/10, got eps1 = {eps1}, T = {horizon}"
        )));
    }
    if !(eps2 > 0.0 && eps2 <= horizon / 10.0) {
        return Err(Error::domain(format!(
            "need 0 < eps2 <= T/10, got eps2 = {eps2}, T = {horizon}"
        )));
    }
    if eps2 > (1.0 - horizon) / 10.0 {
        return Err(Error::domain(format!(
            "need eps2 <= (1 - T)/10, got eps2 = {eps2}, T = {horizon}"
        )));
    }
    let (e1, e2, t) = (eps1, eps2, horizon);
    let s = |u: f64| singular(alpha, u);
    let lower = vec![
        Piece::Constant {
            start: 0.0,
            end: e1,
            value: 1.0,
        },
        Piece::Linear {
            start: e1,
            end: 2.0 * e1,
            from: 1.0,
            to: s(2.0 * e1),
        },
        Piece::Singular {
            start: 2.0 * e1,
            end: t - e2,
        },
        Piece::Constant {
            start: t - e2,
            end: t,
            value: s(t - e2),
        },
    ];
    let upper = vec![
        Piece::Constant {
            start: 0.0,
            end: e1,
            value: s(e1),
        },
        Piece::Singular {
            start: e1,
            end: t - 2.0 * e2,
        },
        Piece::Linear {
            start: t - 2.0 * e2,
            end: t - e2,
            from: s(t - 2.0 * e2),
            to: s(t),
        },
        Piece::Constant {
            start: t - e2,
            end: t,
            value: s(t),
        },
    ];
    Ok(BarrierPair {
        alpha,
        horizon,
        eps1,
        eps2,
        lower,
        upper,
    })
}

/// Default (ε₁, ε₂) with δ = 1/(ϱ(1−T)^{1−κ}); checks T ≥ 20/ϱ and ϱ(1−T)^{1−κ} ≥ 10.
pub fn choose_eps(rho: f64, horizon: f64, alpha: f64) -> Result<(f64, f64)> {
    let k = kappa(alpha);
    let scaled = rho * (1.0 - horizon).powf(1.0 - k);
    if horizon < 20.0 / rho {
        return Err(Error::domain(format!(
            "need T >= 20/rho, got T = {horizon}, rho = {rho}"
        )));
    }
    if scaled < 10.0 {
        return Err(Error::domain(format!(
            "need rho (1 - T)^(1 - kappa) >= 10, got {scaled}"
        )));
    }
    let delta = 1.0 / scaled;
    let eps1 = (delta / rho).sqrt();
    let eps2 = (1.0 - horizon) * (delta / scaled).sqrt();
    Ok((eps1, eps2))
}

/// ∫_a^b (c + d u)^p du for a linear function that stays positive.
fn linear_power_integral(a: f64, b: f64, start: f64, end: f64, from: f64, to: f64, p: f64) -> f64 {
    let slope = (to - from) / (end - start);
    let at = |u: f64| from + slope * (u - start);
    if slope.abs() < 1e-300 {
        return from.powf(p) * (b - a);
    }
    (at(b).powf(p + 1.0) - at(a).powf(p + 1.0)) / (slope * (p + 1.0))
}

impl BarrierPair {
    pub fn pieces(&self, side: Side) -> &[Piece] {
        match side {
            Side::Lower => &self.lower,
            Side::Upper => &self.upper,
        }
    }

    fn piece_at(&self, side: Side, t: f64) -> &Piece {
        let pieces = self.pieces(side);
        pieces
            .iter()
            .find(|p| {
                let (a, b) = p.bounds();
                t >= a && t <= b
            })
            .unwrap_or(if t < 0.0 {
                &pieces[0]
            } else {
                &pieces[pieces.len() - 1]
            })
    }

    pub fn value(&self, side: Side, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon);
        match *self.piece_at(side, t) {
            Piece::Constant { value, .. } => value,
            Piece::Linear {
                start,
                end,
                from,
                to,
            } => from + (to - from) * (t - start) / (end - start),
            Piece::Singular { .. } => singular(self.alpha, t),
        }
    }

    pub fn lower_at(&self, t: f64) -> f64 {
        self.value(Side::Lower, t)
    }

    pub fn upper_at(&self, t: f64) -> f64 {
        self.value(Side::Upper, t)
    }

    /// q'(t)/q(t), using the right derivative at breakpoints.
    pub fn log_derivative(&self, side: Side, t: f64) -> f64 {
        let pieces = self.pieces(side);
        let piece = pieces
            .iter()
            .find(|p| {
                let (a, b) = p.bounds();
                t >= a && t < b
            })
            .unwrap_or(&pieces[pieces.len() - 1]);
        match *piece {
            Piece::Constant { .. } => 0.0,
            Piece::Linear {
                start,
                end,
                from,
                to,
            } => {
                let slope = (to - from) / (end - start);
                slope / (from + slope * (t - start))
            }
            Piece::Singular { .. } => self.alpha / (1.0 - t),
        }
    }

    /// Breakpoints of both barriers, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .lower
            .iter()
            .chain(&self.upper)
            .flat_map(|p| {
                let (a, b) = p.bounds();
                [a, b]
            })
            .collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        v
    }

    /// ∫_a^b q(u)^{2/(2+α)} du in closed form.
    pub fn integral_power(&self, side: Side, a: f64, b: f64) -> f64 {
        let p = 2.0 / (2.0 + self.alpha);
        let k = kappa(self.alpha);
        let mut total = 0.0;
        for piece in self.pieces(side) {
            let (s, e) = piece.bounds();
            let lo = a.max(s);
            let hi = b.min(e);
            if hi <= lo {
                continue;
            }
            total += match *piece {
                Piece::Constant { value, .. } => value.powf(p) * (hi - lo),
                Piece::Linear {
                    start,
                    end,
                    from,
                    to,
                } => linear_power_integral(lo, hi, start, end, from, to, p),
                Piece::Singular { .. } => {
                    ((1.0 - lo).powf(1.0 - k) - (1.0 - hi).powf(1.0 - k)) / (1.0 - k)
                }
            };
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> BarrierPair {
        build_barriers(0.5, 0.03, 0.02, 1.0).unwrap()
    }

    #[test]
    fn endpoint_values() {
        let b = pair();
        assert_eq!(b.lower_at(0.0), 1.0);
        assert!((b.upper_at(0.5) - 2.0).abs() < 1e-15);
        assert!((b.lower_at(0.25) - 1.0 / 0.75).abs() < 1e-15);
    }

    #[test]
    fn sandwich_on_grid() {
        for &alpha in &[0.8, 1.0, 1.5] {
            let b = build_barriers(0.6, 0.05, 0.03, alpha).unwrap();
            for i in 0..=10_000 {
                let t = 0.6 * i as f64 / 10_000.0;
                let s = (1.0 - t).powf(-alpha);
                assert!(b.lower_at(t) <= s * (1.0 + 1e-14), "lower at {t}");
                assert!(b.upper_at(t) >= s * (1.0 - 1e-14), "upper at {t}");
            }
        }
    }

    #[test]
    fn constraints_checked() {
        assert!(build_barriers(0.5, 0.06, 0.01, 1.0).is_err());
        assert!(build_barriers(0.9, 0.01, 0.02, 1.0).is_err());
        assert!(build_barriers(1.0, 0.01, 0.01, 1.0).is_err());
    }

    #[test]
    fn eps_choice_identity() {
        let (rho, t, alpha) = (100.0, 0.4, 1.0);
        let (e1, e2) = choose_eps(rho, t, alpha).unwrap();
        let delta = 1.0 / (rho * (1.0f64 - t).powf(1.0 - kappa(alpha)));
        assert!((rho * e1 * e1 - delta).abs() < 1e-15);
        assert!(e2 <= e1);
        assert!(choose_eps(10.0, 0.4, 1.0).is_err());
    }

    #[test]
    fn integral_matches_quadrature() {
        let b = pair();
        for side in [Side::Lower, Side::Upper] {
            let n = 200_000;
            let h = 0.5 / n as f64;
            let p = 2.0 / 3.0;
            let num: f64 = (0..n)
                .map(|i| b.value(side, (i as f64 + 0.5) * h).powf(p) * h)
                .sum();
            assert!((num - b.integral_power(side, 0.0, 0.5)).abs() < 1e-8);
        }
    }
}
