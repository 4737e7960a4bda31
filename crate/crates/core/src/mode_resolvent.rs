//! Green kernels of the mode operators −∂_r² + e^{2r}μ² + n²/4 and their
//! action on grid functions.
//!
//! With k = λ − n/2 the mode operator minus Λ = λ(n − λ) is
//! −∂_r² + μ²e^{2r} + k². For μ > 0 its kernel is
//! I_k(μe^{r<}) K_k(μe^{r>}); for μ = 0 it is (2k)⁻¹e^{−k|r−t|}.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::{
    bessel_i_scaled, bessel_i_series_with_derivative, bessel_k_scaled, bessel_pair_scaled, BesselOrder,
};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};

/// Lower bound on Re k for the continued kernels of this module.
pub const CONTINUATION_RE_K_MIN: f64 = -0.25;

/// Orders closer than this to the threshold k = 0 are rejected.
pub const NEAR_THRESHOLD: f64 = 1e-3;

/// λ together with the derived k = λ − n/2 and Λ = λ(n − λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub n: usize,
    pub lambda: Complex64,
}

impl SpectralPoint {
    pub fn new(n: usize, lambda: Complex64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvariantViolation("dimension n must be positive".into()));
        }
        if !lambda.re.is_finite() || !lambda.im.is_finite() {
            return Err(Error::InvariantViolation(format!("non-finite λ = {lambda}")));
        }
        let p = SpectralPoint { n, lambda };
        let half = n as f64 / 2.0;
        let lhs = p.big_lambda();
        let rhs = half * half - p.k() * p.k();
        if (lhs - rhs).norm() > 1e-12 * (1.0 + lambda.norm_sqr()) {
            return Err(Error::InvariantViolation(format!(
                "Λ = λ(n−λ) = {lhs} disagrees with n²/4 − k² = {rhs}"
            )));
        }
        Ok(p)
    }

    pub fn from_k(n: usize, k: Complex64) -> Result<Self> {
        Self::new(n, k + n as f64 / 2.0)
    }

    pub fn k(&self) -> Complex64 {
        self.lambda - self.n as f64 / 2.0
    }

    /// Λ = λ(n − λ).
    pub fn big_lambda(&self) -> Complex64 {
        self.lambda * (self.n as f64 - self.lambda)
    }
}

/// Rejects orders outside the region where the mode kernels are defined.
pub fn check_order(k: Complex64, mu: f64) -> Result<()> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvariantViolation(format!("μ must be finite and nonnegative, got {mu}")));
    }
    if k.norm() < NEAR_THRESHOLD {
        return Err(Error::NearThreshold { abs_k: k.norm() });
    }
    if mu > 0.0 && k.re <= CONTINUATION_RE_K_MIN {
        return Err(Error::ContinuationOutOfRange {
            re_k: k.re,
            bound: CONTINUATION_RE_K_MIN,
        });
    }
    Ok(())
}

/// I_k(e^{min(r,t)}) K_k(e^{max(r,t)}).
pub fn green_kernel_q(k: Complex64, r: f64, t: f64) -> Result<Complex64> {
    check_order(k, 1.0)?;
    let order = BesselOrder::new(k)?;
    let (a, b) = if r <= t { (r, t) } else { (t, r) };
    let (za, zb) = (a.exp(), b.exp());
    let i = bessel_i_scaled(order, za)?;
    let kk = bessel_k_scaled(order, zb)?;
    Ok(i.value * kk.value * (za - zb).exp())
}

/// Kernel of the mode resolvent at cross-section frequency μ.
pub fn green_kernel_mode(k: Complex64, mu: f64, r: f64, t: f64) -> Result<Complex64> {
    check_order(k, mu)?;
    if mu == 0.0 {
        return Ok((-k * (r - t).abs()).exp() / (2.0 * k));
    }
    let shift = mu.ln();
    green_kernel_q(k, r + shift, t + shift)
}

/// Values of the two kernel factors along a grid, stored as mantissa and
/// real exponent: w(r_i) = mant_i · e^{expo_i}, w'(r_i) = dmant_i · e^{expo_i}.
#[derive(Debug, Clone)]
pub struct ModeTable {
    k: Complex64,
    mu: f64,
    i_mant: Vec<Complex64>,
    i_dmant: Vec<Complex64>,
    i_expo: Vec<f64>,
    k_mant: Vec<Complex64>,
    k_dmant: Vec<Complex64>,
    k_expo: Vec<f64>,
    wronskian_defect: f64,
}

const SUBSTEP_REACH: f64 = 0.5;
const SERIES_ANCHOR_MAX_Z: f64 = 0.5;

/// Advances (w, w') of w'' = (B e^{2s} + k²) w from s = 0 to s = h by the
/// Taylor series of w about 0.
fn taylor_step(w: Complex64, dw: Complex64, k2: Complex64, b: f64, h: f64) -> (Complex64, Complex64) {
    const MAX_TERMS: usize = 64;
    // 2^j / j!
    let mut e2 = [0.0f64; MAX_TERMS];
    e2[0] = 1.0;
    for j in 1..MAX_TERMS {
        e2[j] = e2[j - 1] * 2.0 / j as f64;
    }
    let mut c = [Complex64::new(0.0, 0.0); MAX_TERMS + 2];
    c[0] = w;
    c[1] = dw;
    let mut hp = h;
    let mut val = w + dw * h;
    let mut der = dw;
    for m in 0..MAX_TERMS {
        let mf = m as f64;
        let conv: Complex64 = (0..=m).map(|j| e2[j] * c[m - j]).sum();
        c[m + 2] = (k2 * c[m] + b * conv) / ((mf + 2.0) * (mf + 1.0));
        let term_d = c[m + 2] * (mf + 2.0) * hp;
        hp *= h;
        let term = c[m + 2] * hp;
        val += term;
        der += term_d;
        if m >= 3 && term.norm() <= 1e-18 * val.norm() && term_d.norm() <= 1e-18 * der.norm() {
            break;
        }
    }
    (val, der)
}

fn propagate(
    points: &[f64],
    k2: Complex64,
    mu: f64,
    kabs: f64,
    start: (Complex64, Complex64, f64),
    forward: bool,
) -> (Vec<Complex64>, Vec<Complex64>, Vec<f64>) {
    let n = points.len();
    let mut mant = vec![Complex64::new(0.0, 0.0); n];
    let mut dmant = mant.clone();
    let mut expo = vec![0.0; n];
    let first = if forward { 0 } else { n - 1 };
    mant[first] = start.0;
    dmant[first] = start.1;
    expo[first] = start.2;
    let order: Vec<usize> = if forward { (1..n).collect() } else { (0..n - 1).rev().collect() };
    for idx in order {
        let prev = if forward { idx - 1 } else { idx + 1 };
        let (mut w, mut dw) = (mant[prev], dmant[prev]);
        let (r0, r1) = (points[prev], points[idx]);
        let reach = (mu * r0.max(r1).exp()).max(kabs);
        let nsub = ((reach * (r1 - r0).abs() / SUBSTEP_REACH).ceil() as usize).max(1);
        let h = (r1 - r0) / nsub as f64;
        for s in 0..nsub {
            let rs = r0 + s as f64 * h;
            let b = mu * mu * (2.0 * rs).exp();
            (w, dw) = taylor_step(w, dw, k2, b, h);
        }
        let scale = w.norm() + dw.norm();
        let (scale, log_scale) = if scale > 0.0 && scale.is_finite() {
            (scale, scale.ln())
        } else {
            (1.0, 0.0)
        };
        mant[idx] = w / scale;
        dmant[idx] = dw / scale;
        expo[idx] = expo[prev] + log_scale;
    }
    (mant, dmant, expo)
}

impl ModeTable {
    /// For μ > 0 the increasing factor is anchored at the left end by the
    /// Bessel evaluators and carried rightward by Taylor steps of the mode
    /// ODE; the decaying factor is anchored at the right end and carried
    /// leftward. The Wronskian w₁w₂' − w₁'w₂ = −1 is checked at every node.
    pub fn new(k: Complex64, mu: f64, grid: &RadialGrid) -> Result<Self> {
        Self::on_points(k, mu, grid.points())
    }

    /// Same as [`ModeTable::new`] on an ascending list of nodes.
    pub fn on_points(k: Complex64, mu: f64, pts: &[f64]) -> Result<Self> {
        check_order(k, mu)?;
        let n = pts.len();
        if n < 2 {
            return Err(Error::InvariantViolation("mode table needs at least two nodes".into()));
        }
        if mu == 0.0 {
            let sk = 1.0 / (2.0 * k);
            let rot = |r: f64| Complex64::from_polar(1.0, k.im * r);
            let i_mant: Vec<Complex64> = pts.iter().map(|&r| rot(r)).collect();
            let i_dmant = i_mant.iter().map(|&m| k * m).collect();
            let i_expo = pts.iter().map(|&r| k.re * r).collect();
            let k_mant: Vec<Complex64> = pts.iter().map(|&r| sk * rot(-r)).collect();
            let k_dmant = k_mant.iter().map(|&m| -k * m).collect();
            let k_expo = pts.iter().map(|&r| -k.re * r).collect();
            return Ok(ModeTable {
                k,
                mu,
                i_mant,
                i_dmant,
                i_expo,
                k_mant,
                k_dmant,
                k_expo,
                wronskian_defect: 0.0,
            });
        }
        BesselOrder::new(k)?;
        let z_left = mu * pts[0].exp();
        let z_right = mu * pts[n - 1].exp();
        let (left_i, left_di, left_err) = if z_left <= SERIES_ANCHOR_MAX_Z {
            let (i, di) = bessel_i_series_with_derivative(k, z_left);
            (i, di, 0.0)
        } else {
            let p = bessel_pair_scaled(k, z_left)?;
            (p.i, z_left * p.di, p.rel_error)
        };
        let right = bessel_pair_scaled(k, z_right)?;
        let k2 = k * k;
        let (i_mant, i_dmant, i_expo) = propagate(pts, k2, mu, k.norm(), (left_i, left_di, z_left), true);
        let (k_mant, k_dmant, k_expo) =
            propagate(pts, k2, mu, k.norm(), (right.k, z_right * right.dk, -z_right), false);
        let mut defect = left_err.max(right.rel_error);
        for i in 0..n {
            let w = (i_mant[i] * k_dmant[i] - i_dmant[i] * k_mant[i]) * (i_expo[i] + k_expo[i]).exp();
            defect = defect.max((w + 1.0).norm());
        }
        if !defect.is_finite() || defect > 1e-6 {
            return Err(Error::QuadratureFailure {
                context: "mode table Wronskian",
                requested: 1e-6,
                estimate: defect,
            });
        }
        Ok(ModeTable {
            k,
            mu,
            i_mant,
            i_dmant,
            i_expo,
            k_mant,
            k_dmant,
            k_expo,
            wronskian_defect: defect,
        })
    }

    pub fn k(&self) -> Complex64 {
        self.k
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn len(&self) -> usize {
        self.i_mant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_mant.is_empty()
    }

    /// Largest |W + 1| over the grid, plus the anchor error estimates.
    pub fn wronskian_defect(&self) -> f64 {
        self.wronskian_defect
    }

    /// Kernel between grid nodes a and b.
    pub fn kernel(&self, a: usize, b: usize) -> Complex64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        self.i_mant[lo] * self.k_mant[hi] * (self.i_expo[lo] + self.k_expo[hi]).exp()
    }

    /// Modulus of the increasing factor as (mantissa modulus, exponent).
    pub fn increasing_factor(&self, i: usize) -> (Complex64, f64) {
        (self.i_mant[i], self.i_expo[i])
    }

    pub fn decaying_factor(&self, i: usize) -> (Complex64, f64) {
        (self.k_mant[i], self.k_expo[i])
    }

    /// Derivative mantissas at node i; they share the exponents of the factors.
    pub fn scaled_derivatives(&self, i: usize) -> (Complex64, Complex64) {
        (self.i_dmant[i], self.k_dmant[i])
    }

    /// r-derivatives of the two factors at node i, unscaled.
    pub fn derivatives(&self, i: usize) -> (Complex64, Complex64) {
        (
            self.i_dmant[i] * self.i_expo[i].exp(),
            self.k_dmant[i] * self.k_expo[i].exp(),
        )
    }

    /// Σ_m w_m |G(r_i, r_m)| f_m for nonnegative f, by the same running sums.
    pub fn abs_apply(&self, weights: &[f64], f: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        let mut acc = 0.0;
        for i in 0..n {
            if i > 0 {
                acc *= (self.i_expo[i - 1] - self.i_expo[i]).exp();
            }
            out[i] = self.k_mant[i].norm() * acc * (self.i_expo[i] + self.k_expo[i]).exp();
            acc += weights[i] * f[i] * self.i_mant[i].norm();
        }
        let mut acc = 0.0;
        for i in (0..n).rev() {
            if i + 1 < n {
                acc *= (self.k_expo[i + 1] - self.k_expo[i]).exp();
            }
            let diag = weights[i] * f[i] * self.k_mant[i].norm();
            out[i] += self.i_mant[i].norm() * (acc + diag) * (self.i_expo[i] + self.k_expo[i]).exp();
            acc += diag;
        }
        out
    }

    /// u_i = Σ_m w_m G(r_i, r_m) f_m in O(N) by running sums in scaled form.
    pub fn apply(&self, weights: &[f64], f: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut out = vec![zero; n];
        // lower[i] = e^{-expoI_i} Σ_{m<i} w_m f_m I_m
        let mut acc = zero;
        for i in 0..n {
            if i > 0 {
                acc *= (self.i_expo[i - 1] - self.i_expo[i]).exp();
            }
            out[i] = self.k_mant[i] * acc * (self.i_expo[i] + self.k_expo[i]).exp();
            acc += weights[i] * f[i] * self.i_mant[i];
        }
        let mut acc = zero;
        for i in (0..n).rev() {
            if i + 1 < n {
                acc *= (self.k_expo[i + 1] - self.k_expo[i]).exp();
            }
            let diag = weights[i] * f[i] * self.k_mant[i];
            out[i] += self.i_mant[i] * (acc + diag) * (self.i_expo[i] + self.k_expo[i]).exp();
            acc += diag;
        }
        out
    }
}

/// Applies the mode resolvent to a grid function by trapezoid quadrature of
/// the kernel.
pub fn apply_resolvent(k: Complex64, mu: f64, f: &GridFunction) -> Result<GridFunction> {
    check_support(f)?;
    let table = ModeTable::new(k, mu, &f.grid)?;
    let values = table.apply(f.grid.weights(), &f.values);
    GridFunction::new(f.grid.clone(), values)
}

/// Requires |f| ≤ 1e−12·max|f| on the outer 5% of the points at each end.
pub fn check_support(f: &GridFunction) -> Result<()> {
    let n = f.values.len();
    let band = ((n as f64) * 0.05).ceil() as usize;
    let peak = f.max_abs();
    let edge = f.values[..band.min(n)]
        .iter()
        .chain(f.values[n.saturating_sub(band)..].iter())
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    if edge > 1e-12 * peak {
        return Err(Error::SupportViolation(format!(
            "data reaches the grid boundary: edge value {edge:.3e} vs peak {peak:.3e}"
        )));
    }
    Ok(())
}

/// Three-point second difference at interior node i of an arbitrary grid.
fn second_difference(r: &[f64], u: &[Complex64], i: usize) -> Complex64 {
    let h1 = r[i] - r[i - 1];
    let h2 = r[i + 1] - r[i];
    ((u[i + 1] - u[i]) / h2 - (u[i] - u[i - 1]) / h1) * (2.0 / (h1 + h2))
}

/// Relative discrete L² residual of (−D² + μ²e^{2r} + k²)u = f over the
/// interior nodes.
pub fn residual_norm(k: Complex64, mu: f64, u: &GridFunction, f: &GridFunction) -> Result<f64> {
    if u.grid != f.grid {
        return Err(Error::InvariantViolation("u and f live on different grids".into()));
    }
    let r = u.grid.points();
    let w = u.grid.weights();
    let k2 = k * k;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..r.len() - 1 {
        let pu = -second_difference(r, &u.values, i) + (mu * mu * (2.0 * r[i]).exp() + k2) * u.values[i];
        num += w[i] * (pu - f.values[i]).norm_sqr();
        den += w[i] * f.values[i].norm_sqr();
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator("residual_norm: ‖f‖ = 0"));
    }
    Ok((num / den).sqrt())
}

/// (−D² + μ²e^{2r} + k²)g on interior nodes, zero at the two ends.
pub fn forward_operator(k: Complex64, mu: f64, g: &GridFunction) -> GridFunction {
    let r = g.grid.points();
    let k2 = k * k;
    let mut out = vec![Complex64::new(0.0, 0.0); r.len()];
    for i in 1..r.len() - 1 {
        out[i] = -second_difference(r, &g.values, i) + (mu * mu * (2.0 * r[i]).exp() + k2) * g.values[i];
    }
    GridFunction {
        grid: g.grid.clone(),
        values: out,
    }
}

/// Taylor coefficients a_j of f about `center`, from the discrete Cauchy
/// integral over `samples` equispaced points on a circle.
pub fn cauchy_coefficients<F>(f: F, center: Complex64, radius: f64, samples: usize) -> Result<Vec<Complex64>>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let values: Vec<Complex64> = (0..samples)
        .map(|l| f(center + Complex64::from_polar(radius, 2.0 * PI * l as f64 / samples as f64)))
        .collect::<Result<_>>()?;
    let mut coeffs = Vec::with_capacity(samples);
    for j in 0..samples {
        let mut s = Complex64::new(0.0, 0.0);
        for (l, v) in values.iter().enumerate() {
            s += v * Complex64::from_polar(1.0, -2.0 * PI * (j * l % samples) as f64 / samples as f64);
        }
        coeffs.push(s / (samples as f64 * radius.powi(j as i32)));
    }
    Ok(coeffs)
}

/// Sums the Taylor series up to the term where the estimated
/// truncation-plus-amplified-noise error is smallest.
pub fn extrapolate(coeffs: &[Complex64], center: Complex64, radius: f64, noise: f64, at: Complex64) -> Complex64 {
    let d = at - center;
    let ratio = d.norm() / radius;
    let scale = coeffs.first().map_or(0.0, |c| c.norm()).max(1e-300);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    let mut best = (f64::INFINITY, sum);
    for (j, c) in coeffs.iter().enumerate().take(coeffs.len() / 2) {
        sum += c * power;
        power *= d;
        let next = coeffs.get(j + 1).map_or(0.0, |c| (c * power).norm());
        let err = next + noise * scale * ratio.powi(j as i32 + 1);
        if err < best.0 {
            best = (err, sum);
        }
    }
    best.1
}

/// Direct kernel value at `at` next to its extrapolation from a Cauchy
/// circle of radius 0.15 around Re k = 0.2 on the same horizontal line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationSample {
    pub direct: Complex64,
    pub extrapolated: Complex64,
    pub rel_diff: f64,
}

pub fn continuation_check(mu: f64, r: f64, t: f64, at: Complex64) -> Result<ContinuationSample> {
    let center = Complex64::new(0.2, at.im);
    let radius = 0.15;
    let coeffs = cauchy_coefficients(|k| green_kernel_mode(k, mu, r, t), center, radius, 64)?;
    let extrapolated = extrapolate(&coeffs, center, radius, 1e-14, at);
    let direct = green_kernel_mode(at, mu, r, t)?;
    Ok(ContinuationSample {
        direct,
        extrapolated,
        rel_diff: (direct - extrapolated).norm() / direct.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spectral_point_identity() {
        let p = SpectralPoint::new(2, c(1.3, 4.0)).unwrap();
        assert!((p.k() - c(0.3, 4.0)).norm() < 1e-15);
        assert!((p.big_lambda() - (1.0 - p.k() * p.k())).norm() < 1e-13);
        assert!(SpectralPoint::new(0, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn half_integer_kernel() {
        // I_{1/2}(x) = √(2/πx) sinh x, K_{1/2}(x) = √(π/2x) e^{−x}
        let x = (-1.0f64).exp();
        let expected = (2.0 / (PI * x)).sqrt() * x.sinh() * (PI / 2.0).sqrt() * (-1.0f64).exp();
        let g = green_kernel_q(c(0.5, 0.0), 0.0, -1.0).unwrap();
        assert!((g - expected).norm() < 1e-12 * expected, "{g} vs {expected}");
    }

    #[test]
    fn kernel_symmetry_and_shift() {
        let k = c(0.3, 2.0);
        let a = green_kernel_q(k, -2.0, 1.0).unwrap();
        let b = green_kernel_q(k, 1.0, -2.0).unwrap();
        assert_eq!(a, b);
        let k = c(0.3, 1.0);
        let m1 = green_kernel_mode(k, 1.0, -0.7, 0.4).unwrap();
        assert_eq!(m1, green_kernel_q(k, -0.7, 0.4).unwrap());
        let m2 = green_kernel_mode(k, 2.0, -0.7, 0.4).unwrap();
        let q = green_kernel_q(k, -0.7 + 2f64.ln(), 0.4 + 2f64.ln()).unwrap();
        assert!((m2 - q).norm() <= 1e-15 * q.norm());
    }

    #[test]
    fn free_mode_diagonal() {
        assert_eq!(green_kernel_mode(c(1.0, 0.0), 0.0, 0.0, 0.0).unwrap(), c(0.5, 0.0));
    }

    #[test]
    fn order_checks() {
        assert!(matches!(
            green_kernel_mode(c(-0.3, 2.0), 1.0, 0.0, 0.0),
            Err(Error::ContinuationOutOfRange { .. })
        ));
        assert!(matches!(
            green_kernel_mode(c(1e-4, 0.0), 0.0, 0.0, 0.0),
            Err(Error::NearThreshold { .. })
        ));
        assert!(green_kernel_mode(c(-0.3, 2.0), 0.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn table_matches_pointwise_kernel() {
        let grid = RadialGrid::uniform(-12.0, 4.0, 0.01).unwrap();
        for &(k, mu) in &[(c(1.0, 2.0), 1.0), (c(0.1, 5.0), 2.0), (c(-0.2, 10.0), 3.0), (c(0.5, 29.0), 1.5)] {
            let t = ModeTable::new(k, mu, &grid).unwrap();
            let target = if k.im.abs() <= 10.0 { 1e-9 } else { 1e-6 };
            assert!(t.wronskian_defect() < target, "defect {}", t.wronskian_defect());
            for &(a, b) in &[(100usize, 900usize), (1000, 1100), (1200, 1200), (1300, 1500), (50, 1250)] {
                let direct = green_kernel_mode(k, mu, grid.points()[a], grid.points()[b]).unwrap();
                let tab = t.kernel(a, b);
                assert!(
                    (direct - tab).norm() <= 1e-8 * direct.norm() + 1e-300,
                    "k={k} mu={mu} ({a},{b}): {direct} vs {tab}"
                );
            }
        }
    }

    #[test]
    fn apply_matches_dense_sum() {
        let grid = RadialGrid::uniform(-6.0, 2.0, 0.05).unwrap();
        let f = GridFunction::from_fn(&grid, |r| c((-(r + 2.0).powi(2) * 4.0).exp(), 0.0));
        let k = c(0.4, 3.0);
        let t = ModeTable::new(k, 1.3, &grid).unwrap();
        let fast = t.apply(grid.weights(), &f.values);
        for i in (0..grid.len()).step_by(17) {
            let slow: Complex64 = (0..grid.len())
                .map(|m| grid.weights()[m] * t.kernel(i, m) * f.values[m])
                .sum();
            assert!((fast[i] - slow).norm() <= 1e-12 * slow.norm().max(1e-30));
        }
    }

    #[test]
    fn resolvent_inverts_forward_operator() {
        let grid = RadialGrid::uniform(-12.0, 4.0, 0.01).unwrap();
        let g = GridFunction::from_fn(&grid, |r| c((-(r + 1.0).powi(2) * 3.0).exp(), 0.0));
        for &mu in &[0.0, 1.0, 2.0] {
            let k = c(1.0, 2.0);
            let f = forward_operator(k, mu, &g);
            let u = apply_resolvent(k, mu, &f).unwrap();
            let err = GridFunction::new(grid.clone(), u.values.iter().zip(&g.values).map(|(a, b)| a - b).collect())
                .unwrap()
                .l2_norm()
                / g.l2_norm();
            assert!(err < 1e-3, "mu={mu}: {err}");
        }
    }

    #[test]
    fn residual_of_zero_is_one() {
        let grid = RadialGrid::uniform(-4.0, 4.0, 0.1).unwrap();
        let f = GridFunction::from_fn(&grid, |r| c((-r * r).exp(), 0.0));
        let u = GridFunction::zeros(&grid);
        assert!((residual_norm(c(1.0, 1.0), 1.0, &u, &f).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            residual_norm(c(1.0, 1.0), 1.0, &u, &u),
            Err(Error::ZeroDenominator(_))
        ));
    }

    #[test]
    fn support_violation_detected() {
        let grid = RadialGrid::uniform(-4.0, 4.0, 0.1).unwrap();
        let f = GridFunction::from_fn(&grid, |_| c(1.0, 0.0));
        assert!(matches!(
            apply_resolvent(c(1.0, 1.0), 0.0, &f),
            Err(Error::SupportViolation(_))
        ));
    }

    #[test]
    fn continuation_across_critical_line() {
        let s = continuation_check(1.0, -1.0, 0.5, c(-0.1, 3.0)).unwrap();
        assert!(s.rel_diff < 1e-8, "{s:?}");
    }

    #[test]
    fn diagonal_decays_with_mu_for_real_order() {
        for k in [c(0.5, 0.0), c(1.0, 0.0), c(-0.2, 0.0)] {
            let mut prev = f64::INFINITY;
            for mu in [1.0, 2.0, 4.0, 8.0] {
                let v = green_kernel_mode(k, mu, -0.5, -0.5).unwrap().norm();
                assert!(v < prev, "k={k} mu={mu}");
                prev = v;
            }
        }
    }

    #[test]
    fn diagonal_is_not_monotone_for_complex_order() {
        let a = green_kernel_mode(c(0.5, 2.0), 1.0, -0.5, -0.5).unwrap().norm();
        let b = green_kernel_mode(c(0.5, 2.0), 2.0, -0.5, -0.5).unwrap().norm();
        assert!((a - 0.243_362_908_017_002_42).abs() < 1e-9);
        assert!((b - 0.348_492_020_931_975_3).abs() < 1e-9);
    }
}
