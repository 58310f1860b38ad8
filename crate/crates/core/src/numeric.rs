//! Small numerical building blocks shared by the solvers.

use crate::error::{Error, Result};

/// Tanh-sinh (double exponential) quadrature of `f` over `[a, b]`.
///
/// Handles integrable endpoint singularities such as square roots. Levels are
/// added until two successive estimates agree to `tol`.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    use std::f64::consts::FRAC_PI_2;
    let c = 0.5 * (b - a);
    // Abscissae are formed from the distance to the nearer endpoint so that
    // integrable endpoint singularities are sampled without cancellation.
    let eval = |t: f64| -> f64 {
        let s = FRAC_PI_2 * t.sinh();
        let cosh_s = s.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cosh_s * cosh_s);
        let x = if t >= 0.0 {
            b - c * 2.0 / (1.0 + (2.0 * s).exp())
        } else {
            a + c * 2.0 / (1.0 + (-2.0 * s).exp())
        };
        if x <= a || x >= b || w == 0.0 {
            return 0.0;
        }
        c * w * f(x)
    };
    let tmax = 6.5;
    let mut h = 1.0;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= tmax {
        sum += eval(k as f64 * h) + eval(-(k as f64) * h);
        k += 1;
    }
    let mut est = sum * h;
    for _level in 0..12 {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1;
        while (k as f64) * h <= tmax {
            let t = k as f64 * h;
            add += eval(t) + eval(-t);
            k += 2;
        }
        sum += add;
        let new = sum * h;
        if (new - est).abs() <= tol * new.abs().max(1.0) * 0.1 {
            return Ok(new);
        }
        est = new;
    }
    Err(Error::Numerical {
        message: "tanh-sinh quadrature did not converge".into(),
        last: vec![est],
    })
}

/// Composite Simpson rule on uniformly spaced samples (odd length preferred;
/// an even-length input uses Simpson 3/8 on the last four points).
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ if n % 2 == 1 => {
            let mut s = values[0] + values[n - 1];
            for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            s * h / 3.0
        }
        _ => {
            let head = simpson(&values[..n - 3], h);
            let t = &values[n - 4..];
            head + 3.0 * h / 8.0 * (t[0] + 3.0 * t[1] + 3.0 * t[2] + t[3])
        }
    }
}

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Solve a tridiagonal system by the Thomas algorithm. `sub[i]` multiplies
/// `x[i-1]` in row `i` (so `sub[0]` is ignored) and `sup[i]` multiplies `x[i+1]`.
/// Intended for diagonally dominant matrices.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = if n > 1 { sup[0] / beta } else { 0.0 };
    rhs[0] /= beta;
    for i in 1..n {
        beta = diag[i] - sub[i] * c[i - 1];
        if i + 1 < n {
            c[i] = sup[i] / beta;
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// LU factorisation with partial pivoting of a tridiagonal matrix, used for
/// inverse iteration where the shifted matrix is nearly singular.
pub struct PivotedTridiagonal {
    // Row i of U holds u0[i] at column i, u1[i] at i+1, u2[i] at i+2.
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl PivotedTridiagonal {
    /// Factor the symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`
    /// (`off[i]` couples rows i and i+1), shifted by `-shift`.
    pub fn new_symmetric(diag: &[f64], off: &[f64], shift: f64) -> Self {
        let n = diag.len();
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        // Current pivot row entries (cols i, i+1, i+2).
        let mut a0 = diag[0] - shift;
        let mut a1 = if n > 1 { off[0] } else { 0.0 };
        let mut a2 = 0.0;
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if a0 == 0.0 { f64::MIN_POSITIVE } else { a0 };
                break;
            }
            // Next row entries (cols i, i+1, i+2).
            let b0 = off[i];
            let b1 = diag[i + 1] - shift;
            let b2 = if i + 2 < n { off[i + 1] } else { 0.0 };
            if b0.abs() > a0.abs() {
                swapped[i] = true;
                u0[i] = b0;
                u1[i] = b1;
                u2[i] = b2;
                let m = a0 / b0;
                mult[i] = m;
                a0 = a1 - m * b1;
                a1 = a2 - m * b2;
            } else {
                let piv = if a0 == 0.0 { f64::MIN_POSITIVE } else { a0 };
                u0[i] = piv;
                u1[i] = a1;
                u2[i] = a2;
                let m = b0 / piv;
                mult[i] = m;
                a0 = b1 - m * a1;
                a1 = b2 - m * a2;
            }
            a2 = 0.0;
        }
        PivotedTridiagonal {
            u0,
            u1,
            u2,
            mult,
            swapped,
        }
    }

    pub fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                rhs.swap(i, i + 1);
            }
            rhs[i + 1] -= self.mult[i] * rhs[i];
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= self.u1[i] * rhs[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * rhs[i + 2];
            }
            rhs[i] = s / self.u0[i];
        }
    }
}

/// Least-squares line fit y ≈ intercept + slope·x.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_stderr = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LineFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    }
}

/// Weighted least-squares line fit with weights `w` (inverse variances).
pub fn fit_line_weighted(x: &[f64], y: &[f64], w: &[f64]) -> LineFit {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, c), b)| b * (a - mx) * (c - my))
        .sum();
    let syy: f64 = y.iter().zip(w).map(|(c, b)| b * (c - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, c), b)| b * (c - intercept - slope * a).powi(2))
        .sum();
    LineFit {
        slope,
        intercept,
        slope_stderr: (1.0 / sxx).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, p)
}

pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Running sums for mean/variance with a fixed combination order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn stderr(&self) -> f64 {
        let n = self.n as f64;
        let mean = self.mean();
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Bisection for a sign change of `f` on `[a, b]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numerical {
            message: format!("no sign change on [{a}, {b}]"),
            last: vec![fa, fb],
        });
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Cubic Lagrange interpolation of uniformly sampled data
/// starting at `x0` with spacing `h`. Outside the samples returns `None`.
pub fn interp_cubic(values: &[f64], x0: f64, h: f64, x: f64) -> Option<f64> {
    let n = values.len();
    if n < 4 {
        return None;
    }
    let u = (x - x0) / h;
    if u < -1e-9 || u > (n - 1) as f64 + 1e-9 {
        return None;
    }
    let i = (u.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let t = u - i as f64;
    let (y0, y1, y2, y3) = (values[i], values[i + 1], values[i + 2], values[i + 3]);
    let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    Some(l0 * y0 + l1 * y1 + l2 * y2 + l3 * y3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_sqrt_singularity() {
        let v = tanh_sinh(|u| (1.0 - u * u).sqrt(), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        let v = tanh_sinh(|u| 1.0 / u.sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let h = 0.1;
        for n in [7usize, 8] {
            let v: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(3)).collect();
            let exact = ((n - 1) as f64 * h).powi(4) / 4.0;
            assert!((simpson(&v, h) - exact).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn thomas_solves() {
        let sub = [0.0, 1.0, 1.0];
        let diag = [4.0, 4.0, 4.0];
        let sup = [1.0, 1.0, 0.0];
        let mut rhs = [5.0, 6.0, 5.0];
        solve_tridiagonal(&sub, &diag, &sup, &mut rhs);
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn pivoted_solver_matches() {
        let diag = [0.1, -2.0, 3.0, 0.5, 1.0];
        let off = [5.0, 1.0, -4.0, 2.0];
        let x_true = [1.0, -2.0, 0.5, 3.0, -1.0];
        let n = diag.len();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = (diag[i] - 0.3) * x_true[i];
            if i > 0 {
                rhs[i] += off[i - 1] * x_true[i - 1];
            }
            if i + 1 < n {
                rhs[i] += off[i] * x_true[i + 1];
            }
        }
        let lu = PivotedTridiagonal::new_symmetric(&diag, &off, 0.3);
        lu.solve(&mut rhs);
        for i in 0..n {
            assert!((rhs[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_interp_exact() {
        let v: Vec<f64> = (0..10)
            .map(|i| (i as f64 * 0.5).powi(3) - 2.0 * i as f64 * 0.5)
            .collect();
        let x = 2.3;
        let got = interp_cubic(&v, 0.0, 0.5, x).unwrap();
        assert!((got - (x * x * x - 2.0 * x)).abs() < 1e-12);
        assert!(interp_cubic(&v, 0.0, 0.5, 5.0).is_none());
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
    }
}
