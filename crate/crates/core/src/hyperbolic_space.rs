//! Radial waves and weighted resolvents on ℍ³, plus the ℍ²/ℍ³ kernel of the
//! half-wave propagator.
//!
//! Radial data on ℍ³ are reduced by w = sinh(d)·u: the shifted wave equation
//! ∂_t²u = −(Δ − 1)u becomes ∂_t²w = ∂_d²w with w(0) = 0, solved exactly by
//! d'Alembert with odd reflection. The boundary defining function is
//! x(d) = 2e^{−d}.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_real, GaussKronrod};
use crate::weight::smoothstep5;
use crate::weighted_operator::{NormSample, NormScan, MAX_DENSE_DIM};

/// Wave-kernel normalization on ℍ².
pub const C1: f64 = 1.0 / (4.0 * PI);
/// Wave-kernel normalization on ℍ³, in the sense of Riesz distributions.
pub const C2: f64 = 1.0 / (8.0 * PI);

/// Lower bound on Re λ for the continued ℍ³ resolvent.
pub const CONTINUATION_MARGIN: f64 = 0.125;

const SINGULAR_GAP: f64 = 1e-12;

/// c_n·(sinh²(t/2) − sinh²(d/2))_+^{−n/2}.
pub fn u1_kernel(t: f64, d: f64, n: usize, c_n: f64) -> Result<f64> {
    if !(n == 1 || n == 2) {
        return Err(Error::InvariantViolation(format!("u1_kernel supports n = 1, 2 (got {n})")));
    }
    if !(t > 0.0) || !(d >= 0.0) {
        return Err(Error::InvariantViolation(format!("u1_kernel needs t > 0, d ≥ 0 (got {t}, {d})")));
    }
    let gap = (0.5 * t).sinh().powi(2) - (0.5 * d).sinh().powi(2);
    if gap.abs() < SINGULAR_GAP {
        return Err(Error::SingularDiagonal { t, d });
    }
    if gap < 0.0 {
        return Ok(0.0);
    }
    Ok(c_n * gap.powf(-(n as f64) / 2.0))
}

/// x(d) = 2e^{−d}.
pub fn boundary_function(d: f64) -> f64 {
    2.0 * (-d).exp()
}

/// A radial function with two analytic derivatives and compact support.
pub trait RadialProfile {
    fn value(&self, d: f64) -> f64;
    fn derivative(&self, d: f64) -> f64;
    fn second_derivative(&self, d: f64) -> f64;
    /// Closed interval outside of which the profile vanishes.
    fn support(&self) -> (f64, f64);
}

/// A·exp(1 − 1/(1 − x²)), x = (d − center)/half_width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothBump {
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
}

impl SmoothBump {
    pub fn new(center: f64, half_width: f64, amplitude: f64) -> Self {
        SmoothBump {
            center,
            half_width,
            amplitude,
        }
    }

    fn parts(&self, d: f64) -> Option<(f64, f64, f64)> {
        let x = (d - self.center) / self.half_width;
        if x.abs() >= 1.0 {
            return None;
        }
        let q = 1.0 - x * x;
        let phi = self.amplitude * (1.0 - 1.0 / q).exp();
        let g1 = -2.0 * x / (q * q);
        let g2 = -2.0 / (q * q) - 8.0 * x * x / (q * q * q);
        Some((phi, g1, g2))
    }
}

impl RadialProfile for SmoothBump {
    fn value(&self, d: f64) -> f64 {
        self.parts(d).map_or(0.0, |p| p.0)
    }

    fn derivative(&self, d: f64) -> f64 {
        self.parts(d).map_or(0.0, |(phi, g1, _)| phi * g1 / self.half_width)
    }

    fn second_derivative(&self, d: f64) -> f64 {
        self.parts(d)
            .map_or(0.0, |(phi, g1, g2)| phi * (g1 * g1 + g2) / (self.half_width * self.half_width))
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

/// A·exp(−x²/2), x = (d − center)/sigma, cut to zero where |x| > 8.5
/// (below 2·10⁻¹⁶ of the peak).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub center: f64,
    pub sigma: f64,
    pub amplitude: f64,
}

const GAUSSIAN_CUT: f64 = 8.5;

impl GaussianBump {
    pub fn new(center: f64, sigma: f64, amplitude: f64) -> Self {
        GaussianBump {
            center,
            sigma,
            amplitude,
        }
    }

    fn x(&self, d: f64) -> Option<f64> {
        let x = (d - self.center) / self.sigma;
        (x.abs() <= GAUSSIAN_CUT).then_some(x)
    }
}

impl RadialProfile for GaussianBump {
    fn value(&self, d: f64) -> f64 {
        self.x(d).map_or(0.0, |x| self.amplitude * (-0.5 * x * x).exp())
    }

    fn derivative(&self, d: f64) -> f64 {
        self.x(d)
            .map_or(0.0, |x| -x / self.sigma * self.amplitude * (-0.5 * x * x).exp())
    }

    fn second_derivative(&self, d: f64) -> f64 {
        self.x(d).map_or(0.0, |x| {
            (x * x - 1.0) / (self.sigma * self.sigma) * self.amplitude * (-0.5 * x * x).exp()
        })
    }

    fn support(&self) -> (f64, f64) {
        (self.center - GAUSSIAN_CUT * self.sigma, self.center + GAUSSIAN_CUT * self.sigma)
    }
}

/// x^{1/2}·f with x = 2e^{−d}.
#[derive(Debug, Clone, Copy)]
pub struct HalfWeighted<'a, P: RadialProfile + ?Sized>(pub &'a P);

impl<P: RadialProfile + ?Sized> RadialProfile for HalfWeighted<'_, P> {
    fn value(&self, d: f64) -> f64 {
        boundary_function(d).sqrt() * self.0.value(d)
    }

    fn derivative(&self, d: f64) -> f64 {
        boundary_function(d).sqrt() * (self.0.derivative(d) - 0.5 * self.0.value(d))
    }

    fn second_derivative(&self, d: f64) -> f64 {
        boundary_function(d).sqrt()
            * (self.0.second_derivative(d) - self.0.derivative(d) + 0.25 * self.0.value(d))
    }

    fn support(&self) -> (f64, f64) {
        self.0.support()
    }
}

/// Exact d'Alembert evaluator of U₀(t)f = cos(t√(Δ − 1))f for radial f on ℍ³.
#[derive(Debug, Clone, Copy)]
pub struct RadialWave<'a, P: RadialProfile + ?Sized> {
    profile: &'a P,
}

/// Below this distance u is taken from its d → 0 limit.
const CENTER_LIMIT: f64 = 1e-6;

impl<'a, P: RadialProfile + ?Sized> RadialWave<'a, P> {
    pub fn new(profile: &'a P) -> Self {
        RadialWave { profile }
    }

    /// Odd extension of sinh(d)·f(d).
    pub fn w0(&self, s: f64) -> f64 {
        let a = s.abs();
        s.signum() * a.sinh() * self.profile.value(a)
    }

    /// Its derivative, an even function.
    pub fn dw0(&self, s: f64) -> f64 {
        let a = s.abs();
        a.cosh() * self.profile.value(a) + a.sinh() * self.profile.derivative(a)
    }

    fn d2w0(&self, s: f64) -> f64 {
        let a = s.abs();
        let p = self.profile;
        s.signum() * (a.sinh() * (p.value(a) + p.second_derivative(a)) + 2.0 * a.cosh() * p.derivative(a))
    }

    /// w(t, d) = (W(d + t) + W(d − t))/2.
    pub fn w(&self, t: f64, d: f64) -> f64 {
        0.5 * (self.w0(d + t) + self.w0(d - t))
    }

    pub fn w_t(&self, t: f64, d: f64) -> f64 {
        0.5 * (self.dw0(d + t) - self.dw0(d - t))
    }

    pub fn w_d(&self, t: f64, d: f64) -> f64 {
        0.5 * (self.dw0(d + t) + self.dw0(d - t))
    }

    pub fn u(&self, t: f64, d: f64) -> f64 {
        if d < CENTER_LIMIT {
            return self.dw0(t);
        }
        self.w(t, d) / d.sinh()
    }

    pub fn u_t(&self, t: f64, d: f64) -> f64 {
        if d < CENTER_LIMIT {
            return self.d2w0(t);
        }
        self.w_t(t, d) / d.sinh()
    }

    /// ∫₀^∞ (w_t² + w_d²) dd.
    pub fn energy(&self, t: f64) -> Result<f64> {
        let (d1, d2) = self.profile.support();
        let mut breaks = vec![0.0, (d1 - t).max(0.0), (d2 - t).max(0.0), (t - d2).max(0.0), (t - d1).max(0.0)];
        breaks.push(d1 + t);
        breaks.push(d2 + t);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let rule = GaussKronrod::new(0.0, 1e-14);
        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (v, _) = integrate_real(
                &rule,
                |d| {
                    let a = self.w_t(t, d);
                    let b = self.w_d(t, d);
                    a * a + b * b
                },
                w[0],
                w[1],
            )?;
            total += v;
        }
        Ok(total)
    }
}

/// u and ∂_t u sampled on a distance grid at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub t: f64,
    pub d: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl WaveState {
    /// Smallest interval containing every node with |u| > threshold.
    pub fn support_extent(&self, threshold: f64) -> Option<(f64, f64)> {
        let mut it = self.d.iter().zip(&self.u).filter(|(_, u)| u.abs() > threshold).map(|(d, _)| *d);
        let first = it.next()?;
        let last = it.next_back().unwrap_or(first);
        Some((first, last))
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, u| m.max(u.abs()))
    }
}

/// Uniform nodes 0, h, 2h, … up to d_max.
pub fn distance_grid(d_max: f64, h: f64) -> Result<Vec<f64>> {
    if !(d_max > 0.0) || !(h > 0.0) {
        return Err(Error::InvariantViolation(format!("distance grid needs d_max, h > 0 (got {d_max}, {h})")));
    }
    let n = (d_max / h).round() as usize;
    Ok((0..=n).map(|i| i as f64 * d_max / n as f64).collect())
}

/// States U₀(t)f₀ at the requested times on the nodes `d`.
pub fn radial_wave_solve<P: RadialProfile + ?Sized>(f0: &P, times: &[f64], d: &[f64]) -> Result<Vec<WaveState>> {
    let (d1, d2) = f0.support();
    let d_max = d.last().copied().unwrap_or(0.0);
    let t_end = times.iter().fold(0.0f64, |m, &t| m.max(t));
    if !(d1 > 0.0 && d2 > d1) {
        return Err(Error::SupportViolation(format!("data support [{d1}, {d2}] must lie in d > 0")));
    }
    if !(d2 < d_max - t_end) {
        return Err(Error::SupportViolation(format!(
            "data support ends at {d2} but the grid ends at {d_max} with t_end = {t_end}"
        )));
    }
    let wave = RadialWave::new(f0);
    Ok(times
        .iter()
        .map(|&t| WaveState {
            t,
            d: d.to_vec(),
            u: d.iter().map(|&x| wave.u(t, x)).collect(),
            v: d.iter().map(|&x| wave.u_t(t, x)).collect(),
        })
        .collect())
}

/// χ_t(m) = χ(4 artanh|m| / t) with χ ≡ 1 on [0, 1 − δ] and χ ≡ 0 past
/// 1 − δ/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffChi {
    delta: f64,
}

impl CutoffChi {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::InvariantViolation(format!("δ must lie in (0, 1/2) (got {delta})")));
        }
        Ok(CutoffChi { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn profile(&self, s: f64) -> f64 {
        1.0 - smoothstep5((s - (1.0 - self.delta)) / (0.5 * self.delta))
    }

    /// χ_t at the ball point of Euclidean radius |m| < 1.
    pub fn at_ball_radius(&self, t: f64, m: f64) -> f64 {
        self.profile(4.0 * m.atanh() / t)
    }

    /// χ_t at geodesic distance d from the center; |m| = tanh(d/2).
    pub fn at_distance(&self, t: f64, d: f64) -> f64 {
        self.profile(2.0 * d / t)
    }
}

/// max over the nodes of |χ_t U₀(t) χ_t f₀| relative to max|f₀|.
pub fn cutoff_sandwich<P: RadialProfile>(chi: &CutoffChi, f0: &P, t: f64, d: &[f64]) -> Result<f64> {
    let (d1, d2) = f0.support();
    let inner = d2 <= (1.0 - chi.delta()) * t / 2.0;
    if !inner {
        return Err(Error::SupportViolation(format!(
            "data support [{d1}, {d2}] is not inside the plateau of χ_t at t = {t}"
        )));
    }
    let peak = d.iter().fold(0.0f64, |m, &x| m.max(f0.value(x).abs()));
    if peak == 0.0 {
        return Ok(0.0);
    }
    let wave = RadialWave::new(f0);
    let worst = d
        .iter()
        .map(|&x| (chi.at_distance(t, x) * wave.u(t, x)).abs())
        .fold(0.0, f64::max);
    Ok(worst / peak)
}

/// Largest |u(t, 0)| over the given post-passage times, relative to max|f₀|.
pub fn huygens_defect<P: RadialProfile>(f0: &P, times: &[f64]) -> Result<f64> {
    let (_, d2) = f0.support();
    if let Some(&t) = times.iter().find(|&&t| t <= d2) {
        return Err(Error::InvariantViolation(format!("t = {t} is before the wave has left the center")));
    }
    let wave = RadialWave::new(f0);
    let (d1, _) = f0.support();
    let peak = (0..=400)
        .map(|i| f0.value(d1 + (d2 - d1) * i as f64 / 400.0).abs())
        .fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(0.0);
    }
    Ok(times.iter().map(|&t| wave.u(t, 0.0).abs()).fold(0.0, f64::max) / peak)
}

/// Dirichlet Green function of −∂² + κ² on [0, ∞).
pub fn dirichlet_green(kappa: Complex64, d: f64, dp: f64) -> Complex64 {
    ((-kappa * (d - dp).abs()).exp() - (-kappa * (d + dp)).exp()) / (2.0 * kappa)
}

fn check_lambda(lambda: Complex64) -> Result<Complex64> {
    let kappa = lambda - 1.0;
    if !(lambda.re > 1.0 - CONTINUATION_MARGIN) {
        return Err(Error::ContinuationOutOfRange {
            re_k: kappa.re,
            bound: -CONTINUATION_MARGIN,
        });
    }
    if kappa.norm() < 1e-3 {
        return Err(Error::NearThreshold { abs_k: kappa.norm() });
    }
    Ok(kappa)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceSettings {
    /// Time horizon T.
    pub horizon: f64,
    /// Distance step.
    pub step: f64,
    /// Relative tolerance on the weighted mass beyond the checked range.
    pub tail_tol: f64,
}

impl Default for LaplaceSettings {
    fn default() -> Self {
        LaplaceSettings {
            horizon: 60.0,
            step: 0.05,
            tail_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceCheck {
    pub lambda: Complex64,
    pub d: Vec<f64>,
    pub lhs: Vec<Complex64>,
    pub rhs: Vec<Complex64>,
    /// ‖lhs − rhs‖/‖lhs‖ in L²(4π sinh²d dd) over the checked range.
    pub discrepancy: f64,
    /// Relative weighted mass of lhs beyond the checked range.
    pub tail_bound: f64,
}

/// Compares (λ − 1)·x^{1/2}R(λ)x^{1/2}f₀, with R the ℍ³ resolvent applied
/// through its closed-form kernel, against ∫₀^T e^{t(1−λ)}x^{1/2}U₀(t)x^{1/2}f₀ dt
/// computed from the wave evaluator. The check covers d ≤ T − d₂, where the
/// time integral is complete; the remainder of lhs is bounded in closed form.
pub fn laplace_resolvent_check<P: RadialProfile>(
    lambda: Complex64,
    f0: &P,
    settings: &LaplaceSettings,
) -> Result<LaplaceCheck> {
    let kappa = check_lambda(lambda)?;
    let (d1, d2) = f0.support();
    if !(d1 > 0.0 && d2 > d1) {
        return Err(Error::SupportViolation(format!("data support [{d1}, {d2}] must lie in d > 0")));
    }
    let t_max = settings.horizon;
    let d_max = t_max - d2;
    if !(d_max >= d2) {
        return Err(Error::TailNotCertified {
            bound: f64::INFINITY,
            tol: settings.tail_tol,
        });
    }
    let n = (d_max / settings.step).floor() as usize;
    let h = d_max / n as f64;
    let d: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let weighted = HalfWeighted(f0);
    let wave = RadialWave::new(&weighted);
    let rule = GaussKronrod::new(1e-300, 1e-13).with_max_panels(20_000);
    let zero = Complex64::new(0.0, 0.0);

    let mut lhs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for &x in &d {
        let source = |s: f64| dirichlet_green(kappa, x, s) * (s.sinh() * weighted.value(s));
        let mut breaks = vec![d1, d2];
        if x > d1 && x < d2 {
            breaks.insert(1, x);
        }
        let integral = rule.integrate_pieces(source, &breaks)?.value;
        lhs.push(kappa * boundary_function(x).sqrt() / x.sinh() * integral);

        let mut tb = vec![0.0, t_max, d1 - x, d2 - x, x - d2, x - d1, x + d1, x + d2];
        tb.retain(|&t| (0.0..=t_max).contains(&t));
        tb.sort_by(f64::total_cmp);
        tb.dedup();
        let integrand = |t: f64| (-kappa * t).exp() * wave.u(t, x);
        let value = if tb.len() < 2 { zero } else { rule.integrate_pieces(integrand, &tb)?.value };
        rhs.push(boundary_function(x).sqrt() * value);
    }

    let mut diff2 = 0.0;
    let mut norm2 = 0.0;
    for i in 0..n {
        let m = 4.0 * PI * d[i].sinh().powi(2) * h;
        diff2 += (lhs[i] - rhs[i]).norm_sqr() * m;
        norm2 += lhs[i].norm_sqr() * m;
    }
    if norm2 == 0.0 {
        return Ok(LaplaceCheck {
            lambda,
            d,
            lhs,
            rhs,
            discrepancy: diff2.sqrt(),
            tail_bound: 0.0,
        });
    }

    // Past d₂ the lhs is κ√2 e^{−d/2} e^{−κd} A / sinh d exactly.
    let a = rule
        .integrate(|s| (kappa * s).sinh() / kappa * (s.sinh() * weighted.value(s)), d1, d2)?
        .value;
    let decay = 1.0 + 2.0 * kappa.re;
    let tail2 = 4.0 * PI * 2.0 * kappa.norm_sqr() * a.norm_sqr() * (-decay * d_max).exp() / decay;
    let tail_bound = (tail2 / norm2).sqrt();
    if tail_bound > settings.tail_tol {
        return Err(Error::TailNotCertified {
            bound: tail_bound,
            tol: settings.tail_tol,
        });
    }
    log::info!("laplace check at λ = {lambda}: d ≤ {d_max:.2}, tail bound {tail_bound:e}");
    Ok(LaplaceCheck {
        lambda,
        d,
        lhs,
        rhs,
        discrepancy: (diff2 / norm2).sqrt(),
        tail_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialScanSettings {
    pub d_max: f64,
    /// Largest distance step; refined so that |λ − 1|·h ≤ `phase_step`.
    pub max_step: f64,
    pub phase_step: f64,
}

impl Default for RadialScanSettings {
    fn default() -> Self {
        RadialScanSettings {
            d_max: 20.0,
            max_step: 0.05,
            phase_step: 0.3,
        }
    }
}

/// ‖x^{1/2}R(λ)x^{1/2}‖ on radial functions: the radial sector is unitarily
/// L²([0, ∞), dd), where the weighted resolvent has kernel
/// 2e^{−(d+d')/2}·G_D(d, d'). Midpoint Nyström plus dense SVD.
pub fn radial_weighted_norm(lambda: Complex64, settings: &RadialScanSettings) -> Result<f64> {
    let kappa = check_lambda(lambda)?;
    let h = settings.max_step.min(settings.phase_step / kappa.norm());
    let n = (settings.d_max / h).ceil() as usize;
    if n > MAX_DENSE_DIM {
        return Err(Error::DimensionTooLarge { dim: n, max: MAX_DENSE_DIM });
    }
    let h = settings.d_max / n as f64;
    let d: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let s: Vec<f64> = d.iter().map(|&x| 2f64.sqrt() * (-0.5 * x).exp() * h.sqrt()).collect();
    let mut m = Mat::<Complex64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = dirichlet_green(kappa, d[i], d[j]) * (s[i] * s[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    crate::linalg::largest_singular_value(&m)
}

/// Radial weighted norms at each λ, spread over `threads` workers.
pub fn decay_scan(lambdas: &[Complex64], settings: &RadialScanSettings, threads: usize) -> Result<NormScan> {
    if lambdas.is_empty() {
        return Err(Error::EmptyScan);
    }
    let threads = threads.max(1).min(lambdas.len());
    let mut norms: Vec<Option<Result<f64>>> = vec![None; lambdas.len()];
    std::thread::scope(|scope| {
        for (c, chunk) in norms.chunks_mut(lambdas.len().div_ceil(threads)).enumerate() {
            let start = c * lambdas.len().div_ceil(threads);
            scope.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(radial_weighted_norm(lambdas[start + i], settings));
                }
            });
        }
    });
    let mut samples = Vec::with_capacity(lambdas.len());
    for (lambda, norm) in lambdas.iter().zip(norms) {
        samples.push(NormSample {
            lambda: *lambda,
            norm: norm.expect("slot filled")?,
            modes_used: 1,
        });
    }
    NormScan::new(samples)
}

/// Least-squares fit of log norm = log c + p·log|λ − n/2|; returns (p, c).
pub fn fit_power_law(scan: &NormScan, half_n: f64) -> Result<(f64, f64)> {
    if scan.len() < 2 {
        return Err(Error::EmptyScan);
    }
    let pts: Vec<(f64, f64)> = scan
        .samples
        .iter()
        .map(|s| ((s.lambda - half_n).norm().ln(), s.norm.ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::ZeroDenominator("all samples share |λ − n/2|"));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let p = sxy / sxx;
    Ok((p, (my - p * mx).exp()))
}

/// ‖x^{1/2}U₀(t)x^{1/2}f₀‖/‖f₀‖ in L²(4π sinh²d dd).
pub fn weighted_propagator_ratio<P: RadialProfile>(f0: &P, t: f64) -> Result<f64> {
    let (d1, d2) = f0.support();
    let rule = GaussKronrod::new(1e-300, 1e-12);
    let (f_norm2, _) = integrate_real(&rule, |d| (f0.value(d) * d.sinh()).powi(2), d1, d2)?;
    if f_norm2 == 0.0 {
        return Ok(0.0);
    }
    let weighted = HalfWeighted(f0);
    let wave = RadialWave::new(&weighted);
    let mut breaks = vec![0.0, d1 - t, d2 - t, t - d2, t - d1, t + d1, t + d2];
    breaks.retain(|&b| b >= 0.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut u_norm2 = 0.0;
    for w in breaks.windows(2) {
        let (v, _) = integrate_real(
            &rule,
            |d| (boundary_function(d).sqrt() * wave.w(t, d)).powi(2),
            w[0],
            w[1],
        )?;
        u_norm2 += v;
    }
    Ok((u_norm2 / f_norm2).sqrt())
}

/// Smallest constant with ratio(t) ≤ const·e^{−t(1−δ)/4} on the samples.
pub fn fit_decay_constant(samples: &[(f64, f64)], delta: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyScan);
    }
    Ok(samples
        .iter()
        .map(|&(t, ratio)| ratio * (t * (1.0 - delta) / 4.0).exp())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u1_kernel_values() {
        assert_eq!(u1_kernel(1.0, 2.0, 2, C2).unwrap(), 0.0);
        let v = u1_kernel(1.0, 0.0, 2, C2).unwrap();
        assert!((v - C2 / 0.5f64.sinh().powi(2)).abs() < 1e-15);
        assert!(matches!(u1_kernel(1.0, 1.0, 2, C2), Err(Error::SingularDiagonal { .. })));
        assert!(u1_kernel(1.0, 0.5, 3, C2).is_err());
        // the gap shrinks as d grows toward the light cone
        let mut prev = 0.0;
        for i in 0..90 {
            let v = u1_kernel(3.0, i as f64 * 0.03, 1, C1).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn c1_matches_the_h2_resolvent() {
        // ∫₀^∞ e^{−t(λ−1/2)} U₁(t) dt reproduces (1/2π)Q_{λ−1}(cosh d); at
        // λ = 2, Q₁(x) = (x/2) ln((x+1)/(x−1)) − 1.
        let d: f64 = 0.7;
        let rule = GaussKronrod::new(1e-300, 1e-12);
        let a = (0.5 * d).sinh().powi(2);
        // substitute t = d + v² to remove the inverse square root
        let (val, _) = integrate_real(
            &rule,
            |v| {
                let t = d + v * v;
                let gap = (0.5 * t).sinh().powi(2) - a;
                2.0 * v * (-1.5 * t).exp() * C1 / gap.sqrt()
            },
            0.0,
            12.0,
        )
        .unwrap();
        let x = d.cosh();
        let q1 = 0.5 * x * ((x + 1.0) / (x - 1.0)).ln() - 1.0;
        assert!((val - q1 / (2.0 * PI)).abs() < 1e-10, "{val} vs {}", q1 / (2.0 * PI));
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let b = SmoothBump::new(2.0, 0.7, 1.3);
        let g = GaussianBump::new(2.0, 0.3, 0.8);
        let h = 1e-5;
        for &d in &[1.5, 1.9, 2.2, 2.5] {
            for p in [&b as &dyn RadialProfile, &g as &dyn RadialProfile, &HalfWeighted(&b) as &dyn RadialProfile] {
                let fd1 = (p.value(d + h) - p.value(d - h)) / (2.0 * h);
                let fd2 = (p.derivative(d + h) - p.derivative(d - h)) / (2.0 * h);
                assert!((fd1 - p.derivative(d)).abs() < 1e-7);
                assert!((fd2 - p.second_derivative(d)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn dalembert_solves_the_radial_wave_equation() {
        let b = SmoothBump::new(2.0, 0.6, 1.0);
        let wave = RadialWave::new(&b);
        let (t, d, h) = (0.9, 1.7, 1e-3);
        let utt = (wave.u(t + h, d) - 2.0 * wave.u(t, d) + wave.u(t - h, d)) / (h * h);
        let ud = (wave.u(t, d + h) - wave.u(t, d - h)) / (2.0 * h);
        let udd = (wave.u(t, d + h) - 2.0 * wave.u(t, d) + wave.u(t, d - h)) / (h * h);
        // ∂_t²u = ∂_d²u + 2 coth(d) ∂_d u + u
        let rhs = udd + 2.0 / d.tanh() * ud + wave.u(t, d);
        assert!((utt - rhs).abs() < 1e-4, "{utt} {rhs}");
        assert_eq!(wave.u(0.0, 2.1), b.value(2.1));
    }

    #[test]
    fn zero_data_gives_zero() {
        let b = SmoothBump::new(2.0, 0.5, 0.0);
        let grid = distance_grid(10.0, 0.1).unwrap();
        let states = radial_wave_solve(&b, &[1.0, 3.0], &grid).unwrap();
        assert!(states.iter().all(|s| s.max_abs() == 0.0));
    }

    #[test]
    fn huygens_at_the_center() {
        let b = SmoothBump::new(1.5, 0.5, 1.0);
        assert!(huygens_defect(&b, &[10.0]).unwrap() <= 1e-10);
        let grid = distance_grid(20.0, 0.01).unwrap();
        let s = &radial_wave_solve(&b, &[10.0], &grid).unwrap()[0];
        assert!(s.u[0].abs() <= 1e-10);
        assert!(radial_wave_solve(&b, &[19.0], &grid).is_err());
    }

    #[test]
    fn cutoff_profile() {
        let chi = CutoffChi::new(0.2).unwrap();
        assert_eq!(chi.profile(0.8), 1.0);
        assert_eq!(chi.profile(0.91), 0.0);
        assert!((chi.at_ball_radius(4.0, (0.5f64).tanh()) - chi.at_distance(4.0, 1.0)).abs() < 1e-14);
        assert!(CutoffChi::new(0.5).is_err());
        let b = SmoothBump::new(1.5, 0.5, 1.0);
        let grid = distance_grid(20.0, 0.01).unwrap();
        assert!(cutoff_sandwich(&chi, &b, 6.0, &grid).unwrap() <= 1e-12);
    }

    #[test]
    fn green_function_is_dirichlet() {
        let kappa = Complex64::new(0.3, 2.0);
        assert!(dirichlet_green(kappa, 0.0, 1.3).norm() < 1e-16);
        assert_eq!(dirichlet_green(kappa, 0.4, 1.3), dirichlet_green(kappa, 1.3, 0.4));
    }

    #[test]
    fn power_law_fit_is_exact_on_a_power() {
        let samples = [2.0, 4.0, 8.0]
            .iter()
            .map(|&s| NormSample {
                lambda: Complex64::new(1.0, s),
                norm: 3.0 * s.powf(-1.1),
                modes_used: 1,
            })
            .collect();
        let (p, c) = fit_power_law(&NormScan::new(samples).unwrap(), 1.0).unwrap();
        assert!((p + 1.1).abs() < 1e-12 && (c - 3.0).abs() < 1e-12);
    }
}
