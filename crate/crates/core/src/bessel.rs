//! Modified Bessel functions I_k(z), K_k(z) of complex order at real positive
//! argument, evaluated from integral representations by adaptive quadrature.
//!
//! Every routine exists in an exponentially scaled form (`e^{-z} I_k(z)` and
//! `e^{z} K_k(z)`) so that kernels built from products of the two stay finite
//! for arguments far beyond the overflow threshold of the unscaled values.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gamma::{gamma, rgamma};
use crate::quadrature::{GaussKronrod, QuadEstimate};

/// Accepted region of complex orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStrip {
    pub re_max: f64,
    pub im_max: f64,
}

impl Default for OrderStrip {
    fn default() -> Self {
        OrderStrip {
            re_max: 1.0,
            im_max: 30.0,
        }
    }
}

/// A validated complex order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselOrder {
    k: Complex64,
}

impl BesselOrder {
    pub fn new(k: Complex64) -> Result<Self> {
        Self::with_strip(k, OrderStrip::default())
    }

    pub fn with_strip(k: Complex64, strip: OrderStrip) -> Result<Self> {
        if !k.re.is_finite() || !k.im.is_finite() || k.re.abs() > strip.re_max || k.im.abs() > strip.im_max {
            return Err(Error::OrderOutOfStrip { re: k.re, im: k.im });
        }
        Ok(BesselOrder { k })
    }

    pub fn k(&self) -> Complex64 {
        self.k
    }

    pub fn neg(&self) -> BesselOrder {
        BesselOrder { k: -self.k }
    }

    /// Relative accuracy promised for this order.
    pub fn target_rel(&self) -> f64 {
        if self.k.im.abs() <= 10.0 {
            1e-10
        } else {
            1e-7
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselValue {
    pub value: Complex64,
    pub abs_error_estimate: f64,
}

impl BesselValue {
    pub fn rel_error(&self) -> f64 {
        let m = self.value.norm();
        if m == 0.0 {
            f64::INFINITY
        } else {
            self.abs_error_estimate / m
        }
    }

    fn scale(self, factor: f64) -> BesselValue {
        BesselValue {
            value: self.value * factor,
            abs_error_estimate: self.abs_error_estimate * factor,
        }
    }
}

/// Which representation produced an I value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IRoute {
    Poisson,
    Schlafli,
    Wronskian,
}

/// Scaled values and z-derivatives of I_k and K_k at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselPair {
    /// e^{-z} I_k(z)
    pub i: Complex64,
    /// e^{-z} I_k'(z)
    pub di: Complex64,
    /// e^{z} K_k(z)
    pub k: Complex64,
    /// e^{z} K_k'(z)
    pub dk: Complex64,
    pub rel_error: f64,
}

pub const DEFAULT_Z_SWITCH: f64 = 30.0;

const QUAD_REL: f64 = 1e-14;
const TAIL_DROP: f64 = 50.0;

fn rule() -> GaussKronrod {
    GaussKronrod::new(0.0, QUAD_REL).with_max_panels(6000)
}

fn check_z(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::InvariantViolation(format!("Bessel argument must be positive, got {z}")))
    }
}

fn quad_abs_error(est: &QuadEstimate) -> f64 {
    est.abs_error + est.roundoff_floor()
}

/// e^{-z} I_k(z) from the Poisson integral over (1-u^2)^{k-1/2} cosh(zu),
/// after the substitution u = 1 - e^{-v}. Requires Re k > -1/2.
pub fn bessel_i_poisson_scaled(k: Complex64, z: f64) -> Result<BesselValue> {
    check_z(z)?;
    let a = k.re + 0.5;
    if a <= 0.0 {
        return Err(Error::InvariantViolation(format!(
            "Poisson representation needs Re k > -1/2, got {}",
            k.re
        )));
    }
    let km = k - 0.5;
    let kp = k + 0.5;
    let f = |v: f64| {
        let s = (-v).exp();
        let w = Complex64::new(2.0 - s, 0.0);
        let damp = 0.5 * ((-z * s).exp() + (-z * (2.0 - s)).exp());
        (-kp * v).exp() * w.powc(km) * damp
    };
    let tail_const = 2f64.powf(km.re).max(1.0) / a;
    let rule = rule();
    let mut upper = 40.0 / a;
    let mut est = rule.integrate(f, 0.0, upper)?;
    loop {
        let tail = tail_const * (-a * upper).exp();
        if tail <= 1e-17 * est.value.norm() {
            est.abs_error += tail;
            break;
        }
        if upper > 4000.0 {
            return Err(Error::QuadratureFailure {
                context: "Poisson tail",
                requested: 1e-17 * est.value.norm(),
                estimate: tail,
            });
        }
        let next = upper + 20.0 / a;
        est = est.combine(rule.integrate(f, upper, next)?);
        upper = next;
    }
    // 2^{1-k} z^k / (Γ(k+1/2) √π)
    let pref = ((1.0 - k) * 2f64.ln() + k * z.ln()).exp() * rgamma(kp) / PI.sqrt();
    Ok(BesselValue {
        value: pref * est.value,
        abs_error_estimate: pref.norm() * quad_abs_error(&est),
    })
}

/// e^{-z} I_k(z) from the Schläfli form
/// (1/π)∫_0^π e^{z cos u} cos(ku) du − (sin kπ/π)∫_0^∞ e^{−z cosh u − ku} du.
///
/// The form is the contour integral (1/2π)∫ e^{z cos u − iku} du over
/// −π−i∞ → −π → π → π−i∞. Its horizontal leg is lowered to Im u = −Y, the
/// height of the saddle sin u = −ik/z, which leaves
/// (1/2π)∫_{−π}^{π} e^{z cos(x−iY) − ik(x−iY)} dx − (sin kπ/π)∫_Y^∞ e^{−z cosh y − ky} dy.
/// With Y = 0 this is the form above verbatim; the shift only removes the
/// e^{π|Im k|/2}-fold cancellation between the two terms.
pub fn bessel_i_schlafli_scaled(k: Complex64, z: f64) -> Result<BesselValue> {
    check_z(z)?;
    let y0 = schlafli_height(k, z);
    let (ch, sh_half) = (y0.cosh(), (y0 / 2.0).sinh());
    let shy = y0.sinh();
    let rule = rule();
    let first = rule.integrate(
        |x| {
            let h = (x / 2.0).sin();
            let re = -2.0 * z * ch * h * h + 2.0 * z * sh_half * sh_half - k.re * y0 + k.im * x;
            let im = z * x.sin() * shy - k.re * x - k.im * y0;
            Complex64::from_polar(re.exp(), im)
        },
        -PI,
        PI,
    )?;
    // Magnitude exponent of the second integrand (scaled by e^{-z}).
    let g = |u: f64| -z * (u.cosh() + 1.0) - k.re * u;
    let u_peak = if k.re < 0.0 { (-k.re / z).asinh() } else { 0.0 }.max(y0);
    let peak = g(u_peak);
    let mut upper = u_peak + 0.5;
    while g(upper) > peak - TAIL_DROP {
        upper += 0.5;
    }
    let mut second = rule.integrate(
        |u| Complex64::new(-z * (u.cosh() + 1.0), 0.0).exp() * (-k * u).exp(),
        y0,
        upper,
    )?;
    let slope = z * upper.sinh() + k.re;
    second.abs_error += g(upper).exp() / slope;
    let sin_kpi = (k * PI).sin();
    let value = first.value / (2.0 * PI) - sin_kpi * second.value / PI;
    let err = quad_abs_error(&first) / (2.0 * PI) + sin_kpi.norm() * quad_abs_error(&second) / PI;
    Ok(BesselValue {
        value,
        abs_error_estimate: err,
    })
}

/// Depth below the real axis of the saddle of z cos u − iku in the lower
/// half strip, or 0 when there is none.
fn schlafli_height(k: Complex64, z: f64) -> f64 {
    let w = Complex64::new(0.0, -1.0) * k / z;
    let s = w.asin();
    let mirror = Complex64::new(PI, 0.0) - s;
    [s, mirror]
        .iter()
        .filter(|c| c.im < 0.0)
        .map(|c| -c.im)
        .fold(0.0, f64::max)
}

fn canonical_order(nu: Complex64) -> Complex64 {
    if nu.re < 0.0 || (nu.re == 0.0 && nu.im < 0.0) {
        -nu
    } else {
        nu
    }
}

/// e^{z} K_ν(z) from ½∫_ℝ cosh-exponential integrand, evaluated along the
/// horizontal line Im w = α through the saddle of z cosh w + ν w. The
/// integrand is entire and decays in the strip |Im w| < π/2, so the value
/// equals the real-axis integral while avoiding its e^{π|Im ν|/2}
/// cancellation. Accepts any complex ν.
pub fn bessel_k_contour_scaled(nu: Complex64, z: f64) -> Result<BesselValue> {
    check_z(z)?;
    let nu = canonical_order(nu);
    let s = (nu / z).asinh();
    let cap = PI / 2.0 - 0.5f64.min(1.0 / nu.im.abs().max(1e-300));
    let alpha = (-s.im).clamp(-cap, cap);
    let (sa, ca) = alpha.sin_cos();
    let half_sa = (alpha / 2.0).sin();
    // g is the log-magnitude of the integrand; concave in u since cos α > 0.
    let g = |u: f64| {
        let sh = (u / 2.0).sinh();
        -z * (2.0 * sh * sh * ca - 2.0 * half_sa * half_sa) - nu.re * u + nu.im * alpha
    };
    let dg = |u: f64| -z * u.sinh() * ca - nu.re;
    let u_peak = -(nu.re / (z * ca)).asinh();
    let peak = g(u_peak);
    let mut lo = u_peak - 0.5;
    while g(lo) > peak - TAIL_DROP {
        lo -= 0.5;
    }
    let mut hi = u_peak + 0.5;
    while g(hi) > peak - TAIL_DROP {
        hi += 0.5;
    }
    let f = |u: f64| {
        let phase = -z * u.sinh() * sa - nu.im * u - nu.re * alpha;
        Complex64::from_polar(0.5 * g(u).exp(), phase)
    };
    let est = rule().integrate(f, lo, hi)?;
    let tail = 0.5 * (g(lo).exp() / dg(lo).abs() + g(hi).exp() / dg(hi).abs());
    Ok(BesselValue {
        value: est.value,
        abs_error_estimate: quad_abs_error(&est) + tail,
    })
}

/// e^{z} K_k(z) from ∫_0^∞ cosh(ku) e^{−z cosh u} du on the real axis.
/// Loses about π|Im k|/2 nats to cancellation; kept as a cross-check.
pub fn bessel_k_real_axis_scaled(k: Complex64, z: f64) -> Result<BesselValue> {
    check_z(z)?;
    let a = k.re.abs();
    let f = |u: f64| {
        let sh = (u / 2.0).sinh();
        (k * u).cosh() * (-2.0 * z * sh * sh).exp()
    };
    let bound = |u: f64| {
        let sh = (u / 2.0).sinh();
        (a * u).cosh() * (-2.0 * z * sh * sh).exp()
    };
    let rule = rule();
    let mut upper = 2.0;
    let mut est = rule.integrate(f, 0.0, upper)?;
    loop {
        // The bound is decreasing past its peak; its value times a unit
        // length dominates the remaining tail once z sinh u exceeds a + 1.
        let past_peak = z * upper.sinh() > a + 1.0;
        let tail = bound(upper);
        if past_peak && tail < 1e-18 * est.value.norm().max(est.l1 * 1e-300) {
            est.abs_error += tail;
            break;
        }
        if upper > 200.0 {
            return Err(Error::QuadratureFailure {
                context: "real-axis K tail",
                requested: 1e-18 * est.value.norm(),
                estimate: tail,
            });
        }
        est = est.combine(rule.integrate(f, upper, upper + 1.0)?);
        upper += 1.0;
    }
    Ok(BesselValue {
        value: est.value,
        abs_error_estimate: quad_abs_error(&est),
    })
}

/// K_k(z) (unscaled) from the Fourier-type representation
/// Γ(3/2−κ) 2^{1−κ}/√π · z^κ ∫_0^∞ sin(tz)/(tz) t² (1+t²)^{κ−3/2} dt with
/// κ = ±k chosen so that Re κ ≤ 0. Summed over half periods of sin(tz) with
/// Wynn epsilon acceleration. Intended as an independent oracle.
pub fn bessel_k_oscillatory(k: Complex64, z: f64) -> Result<BesselValue> {
    check_z(z)?;
    let kappa = if k.re > 0.0 { -k } else { k };
    let expo = kappa - 1.5;
    let f = |t: f64| {
        let x = t * z;
        let sinc = if x < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
        Complex64::new(1.0 + t * t, 0.0).powc(expo) * (t * t * sinc)
    };
    let rule = GaussKronrod::new(0.0, 1e-14).with_max_panels(2000);
    let half = PI / z;
    // Integrate the non-oscillatory head up to a few units of t in one go.
    let head_end = half * (4.0 / half).ceil().max(1.0);
    let head = rule.integrate(f, 0.0, head_end)?;
    let mut partial = head.value;
    let mut err = quad_abs_error(&head);
    let mut sums = Vec::with_capacity(80);
    let mut t0 = head_end;
    for _ in 0..80 {
        let piece = rule.integrate(f, t0, t0 + half)?;
        partial += piece.value;
        err += quad_abs_error(&piece);
        sums.push(partial);
        t0 += half;
    }
    let (value, extrap_err) = wynn_epsilon(&sums);
    let pref = gamma(1.5 - kappa) * ((1.0 - kappa) * 2f64.ln() + kappa * z.ln()).exp() / PI.sqrt();
    Ok(BesselValue {
        value: pref * value,
        abs_error_estimate: pref.norm() * (err + extrap_err),
    })
}

/// Wynn epsilon extrapolation of a sequence of partial sums. Returns the
/// limit estimate and the difference between the last two estimates.
fn wynn_epsilon(s: &[Complex64]) -> (Complex64, f64) {
    let n = s.len();
    let mut e0: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut e1: Vec<Complex64> = s.to_vec();
    let mut best = *s.last().expect("nonempty");
    let mut prev_best = if n > 1 { s[n - 2] } else { best };
    let mut col = 0;
    while e1.len() > 1 {
        let mut next = Vec::with_capacity(e1.len() - 1);
        for j in 0..e1.len() - 1 {
            let d = e1[j + 1] - e1[j];
            if d.norm() == 0.0 {
                return (e1[j + 1], (e1[j + 1] - prev_best).norm());
            }
            next.push(e0[j + 1] + 1.0 / d);
        }
        col += 1;
        if col % 2 == 0 && !next.is_empty() {
            prev_best = best;
            best = *next.last().expect("nonempty");
            if next.len() >= 2 {
                prev_best = next[next.len() - 2];
            }
        }
        e0 = e1;
        e1 = next;
    }
    (best, (best - prev_best).norm())
}

/// I_{ν+1}(z)/I_ν(z) = 1/(b_1 + 1/(b_2 + ...)) with b_j = 2(ν+j)/z, evaluated
/// by the modified Lentz method on the denominator.
fn i_ratio(nu: Complex64, z: f64) -> Result<Complex64> {
    let tiny = Complex64::new(1e-150, 0.0);
    let b1 = 2.0 * (nu + 1.0) / z;
    let mut g = if b1.norm() == 0.0 { tiny } else { b1 };
    let mut c = g;
    let mut d = Complex64::new(0.0, 0.0);
    for j in 2..200_000 {
        let b = 2.0 * (nu + j as f64) / z;
        d = b + d;
        if d.norm() < 1e-150 {
            d = tiny;
        }
        c = b + 1.0 / c;
        if c.norm() < 1e-150 {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        g *= delta;
        if (delta - 1.0).norm() < 1e-15 {
            return Ok(1.0 / g);
        }
    }
    Err(Error::QuadratureFailure {
        context: "continued fraction for I ratio",
        requested: 1e-15,
        estimate: f64::NAN,
    })
}

/// Scaled I, I' and K, K' from two contour K integrals and the continued
/// fraction for I_{ν+1}/I_ν, tied together by the Wronskian
/// I_ν K_{ν+1} + I_{ν+1} K_ν = 1/z.
pub fn bessel_pair_scaled(k: Complex64, z: f64) -> Result<BesselPair> {
    check_z(z)?;
    let k0 = bessel_k_contour_scaled(k, z)?;
    let k1 = bessel_k_contour_scaled(k + 1.0, z)?;
    let ratio = i_ratio(k, z)?;
    let den = k1.value + ratio * k0.value;
    let i = 1.0 / (z * den);
    let den_err = k1.abs_error_estimate
        + ratio.norm() * k0.abs_error_estimate
        + 1e-15 * ratio.norm() * k0.value.norm();
    let rel_den = den_err / den.norm();
    let rel_k = k0.rel_error().max(k1.rel_error() * k1.value.norm() / k0.value.norm().max(1e-300));
    Ok(BesselPair {
        i,
        di: i * (ratio + k / z),
        k: k0.value,
        dk: k / z * k0.value - k1.value,
        rel_error: rel_den.max(rel_k) + 4.0 * f64::EPSILON,
    })
}

/// e^{-z} I_k(z) through the Wronskian route.
pub fn bessel_i_wronskian_scaled(k: Complex64, z: f64) -> Result<BesselValue> {
    let p = bessel_pair_scaled(k, z)?;
    Ok(BesselValue {
        value: p.i,
        abs_error_estimate: p.rel_error * p.i.norm(),
    })
}

/// Series Σ (z/2)^{2m+k} / (m! Γ(m+k+1)), scaled by e^{-z}. Test oracle.
pub fn bessel_i_series_scaled(k: Complex64, z: f64) -> Complex64 {
    let q = z * z / 4.0;
    let mut term = (k * (z / 2.0).ln() - z).exp() * rgamma(k + 1.0);
    let mut sum = term;
    for m in 1..2000 {
        term *= q / (m as f64 * (k + m as f64));
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

/// Series values of e^{-z} I_k(z) and e^{-z} z I_k'(z). Accurate for small z,
/// where every term has the same phase up to the factor 1/(k+m).
pub fn bessel_i_series_with_derivative(k: Complex64, z: f64) -> (Complex64, Complex64) {
    let q = z * z / 4.0;
    let mut term = (k * (z / 2.0).ln() - z).exp() * rgamma(k + 1.0);
    let mut sum = term;
    let mut dsum = term * k;
    for m in 1..2000 {
        term *= q / (m as f64 * (k + m as f64));
        sum += term;
        dsum += term * (k + 2.0 * m as f64);
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    (sum, dsum)
}

/// e^{-z} I_k(z) with representation selection: Poisson integral when
/// Re k > −1/4 and z ≤ `z_switch`, Schläfli form otherwise, and the
/// Wronskian route whenever the chosen integral cannot certify the target
/// accuracy for this order.
pub fn bessel_i_scaled_with(order: BesselOrder, z: f64, z_switch: f64) -> Result<(BesselValue, IRoute)> {
    let k = order.k();
    let target = order.target_rel();
    let first = if k.re > -0.25 && z <= z_switch {
        (bessel_i_poisson_scaled(k, z), IRoute::Poisson)
    } else {
        (bessel_i_schlafli_scaled(k, z), IRoute::Schlafli)
    };
    if let (Ok(v), route) = first {
        if v.rel_error() <= target {
            return Ok((v, route));
        }
        log::trace!(
            "I_{k}({z}): {route:?} certifies only {:.1e}, switching to Wronskian route",
            v.rel_error()
        );
    }
    let v = bessel_i_wronskian_scaled(k, z)?;
    if v.rel_error() > target {
        return Err(Error::QuadratureFailure {
            context: "bessel_I",
            requested: target,
            estimate: v.rel_error(),
        });
    }
    Ok((v, IRoute::Wronskian))
}

pub fn bessel_i_scaled(order: BesselOrder, z: f64) -> Result<BesselValue> {
    bessel_i_scaled_with(order, z, DEFAULT_Z_SWITCH).map(|(v, _)| v)
}

/// I_k(z). Overflows for z beyond about 700; use [`bessel_i_scaled`] there.
pub fn bessel_i(order: BesselOrder, z: f64) -> Result<BesselValue> {
    Ok(bessel_i_scaled(order, z)?.scale(z.exp()))
}

/// e^{z} K_k(z).
pub fn bessel_k_scaled(order: BesselOrder, z: f64) -> Result<BesselValue> {
    let v = bessel_k_contour_scaled(order.k(), z)?;
    let target = order.target_rel();
    if v.rel_error() > target {
        return Err(Error::QuadratureFailure {
            context: "bessel_K",
            requested: target,
            estimate: v.rel_error(),
        });
    }
    Ok(v)
}

/// K_k(z). Underflows for z beyond about 700; use [`bessel_k_scaled`] there.
pub fn bessel_k(order: BesselOrder, z: f64) -> Result<BesselValue> {
    Ok(bessel_k_scaled(order, z)?.scale((-z).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    // e^{z} K_ν(z) and e^{-z} I_ν(z) at 30 digits.
    const K_REF: &[(f64, f64, f64, f64, f64)] = &[
        (0.3, 2.0, 1.5, 0.301_414_646_682_195_09, 0.113_932_550_392_457_72),
        (0.5, 10.0, 0.1, 5.045_090_094_996_541_7e-7, -7.805_150_525_098_325_7e-7),
        (0.2, 30.0, 5.0, 2.508_137_839_784_148e-19, 8.052_216_919_201_303_8e-20),
        (0.0, 0.0, 1.0, 1.144_463_079_806_895, 0.0),
        (0.9, -30.0, 700.0, 0.024_907_440_043_824_712, -9.607_993_329_537_553_5e-4),
    ];

    const I_REF: &[(f64, f64, f64, f64, f64)] = &[
        (0.3, 2.0, 1.5, 0.359_564_341_034_837_74, -1.174_017_176_392_812_3),
        (0.5, 10.0, 0.1, 46_261.074_237_840_327, -26_865.081_575_444_115),
        (-0.2, 5.0, 20.0, 0.170_786_928_648_911_3, 0.008_881_635_092_593_556_2),
        (0.9, -30.0, 25.0, -111_935_832.177_720_52, -193_033_914.604_736_24),
    ];

    #[test]
    fn k_contour_matches_reference() {
        for &(kr, ki, z, vr, vi) in K_REF {
            let v = bessel_k_contour_scaled(c(kr, ki), z).unwrap();
            let r = rel(v.value, c(vr, vi));
            assert!(r < 1e-12, "K_{kr}+{ki}i({z}): rel {r:e}");
            assert!(v.abs_error_estimate >= (v.value - c(vr, vi)).norm());
        }
    }

    #[test]
    fn i_routes_match_reference() {
        for &(kr, ki, z, vr, vi) in I_REF {
            let k = c(kr, ki);
            let exact = c(vr, vi);
            let w = bessel_i_wronskian_scaled(k, z).unwrap();
            assert!(rel(w.value, exact) < 1e-12, "Wronskian route at {k}, {z}");
            let s = bessel_i_schlafli_scaled(k, z).unwrap();
            assert!((s.value - exact).norm() <= s.abs_error_estimate.max(1e-14 * exact.norm()));
            if kr > -0.5 {
                let p = bessel_i_poisson_scaled(k, z).unwrap();
                assert!((p.value - exact).norm() <= p.abs_error_estimate.max(1e-14 * exact.norm()));
            }
            let o = BesselOrder::new(k).unwrap();
            let sel = bessel_i_scaled(o, z).unwrap();
            assert!(rel(sel.value, exact) <= o.target_rel());
        }
    }

    #[test]
    fn half_integer_closed_forms() {
        let half = BesselOrder::new(c(0.5, 0.0)).unwrap();
        let i = bessel_i(half, 1.0).unwrap().value;
        let i_exact = (2.0 / PI).sqrt() * 1f64.sinh();
        assert!((i.re - i_exact).abs() < 1e-14 && i.im.abs() < 1e-15);
        let k = bessel_k(half, 1.0).unwrap().value;
        let k_exact = (PI / 2.0).sqrt() * (-1f64).exp();
        assert!((k.re - k_exact).abs() < 1e-14);
        let p = bessel_i_poisson_scaled(c(0.5, 0.0), 1.0).unwrap().value * 1f64.exp();
        assert!((p.re - i_exact).abs() < 1e-14);
    }

    #[test]
    fn k_order_zero_at_one() {
        let v = bessel_k(BesselOrder::new(c(0.0, 0.0)).unwrap(), 1.0).unwrap().value;
        assert!((v.re - 0.421_024_438_240_708_3).abs() < 1e-14);
    }

    #[test]
    fn i_order_zero_small_argument() {
        let v = bessel_i(BesselOrder::new(c(0.0, 0.0)).unwrap(), 1e-8).unwrap().value;
        assert!((v - 1.0).norm() < 1e-12);
    }

    #[test]
    fn k_is_even_in_order() {
        for &(kr, ki) in &[(0.3, 2.0), (-0.7, 9.0), (0.0, -4.0)] {
            let k = c(kr, ki);
            let a = bessel_k_contour_scaled(k, 1.5).unwrap();
            let b = bessel_k_contour_scaled(-k, 1.5).unwrap();
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn real_axis_and_oscillatory_k_agree_with_contour() {
        for &(kr, ki, z) in &[(0.3, 2.0, 1.5), (-0.4, 1.0, 0.3), (0.1, 4.0, 6.0)] {
            let k = c(kr, ki);
            let base = bessel_k_contour_scaled(k, z).unwrap().value;
            let ra = bessel_k_real_axis_scaled(k, z).unwrap().value;
            assert!(rel(ra, base) < 1e-11, "real axis at {k}, {z}");
            let osc = bessel_k_oscillatory(k, z).unwrap().value * z.exp();
            assert!(rel(osc, base) < 1e-8, "oscillatory at {k}, {z}: {:e}", rel(osc, base));
        }
    }

    #[test]
    fn oscillatory_reference_value() {
        let v = bessel_k_oscillatory(c(0.3, 2.0), 1.5).unwrap().value;
        let exact = c(0.067_254_698_385_280_58, 0.025_421_788_215_188_144);
        assert!(rel(v, exact) < 1e-9);
    }

    #[test]
    fn series_oracle_agrees() {
        for &(kr, ki, z) in &[(0.3, 2.0, 1.5), (-0.6, 7.0, 0.4), (0.9, 1.0, 4.0)] {
            let k = c(kr, ki);
            let s = bessel_i_series_scaled(k, z);
            let w = bessel_i_wronskian_scaled(k, z).unwrap().value;
            assert!(rel(w, s) < 1e-12);
        }
    }

    #[test]
    fn strip_is_enforced() {
        assert!(matches!(
            BesselOrder::new(c(1.2, 0.0)),
            Err(Error::OrderOutOfStrip { .. })
        ));
        assert!(matches!(
            BesselOrder::new(c(0.0, 31.0)),
            Err(Error::OrderOutOfStrip { .. })
        ));
        let wide = OrderStrip { re_max: 1.0, im_max: 40.0 };
        assert!(BesselOrder::with_strip(c(0.0, 31.0), wide).is_ok());
    }

    #[test]
    fn pair_derivatives_match_finite_differences() {
        let k = c(0.2, 3.0);
        let z = 2.0;
        let h = 1e-4;
        let p = bessel_pair_scaled(k, z).unwrap();
        let ip = bessel_pair_scaled(k, z + h).unwrap();
        let im = bessel_pair_scaled(k, z - h).unwrap();
        let unscale_i = |v: Complex64, x: f64| v * x.exp();
        let unscale_k = |v: Complex64, x: f64| v * (-x).exp();
        let di = (unscale_i(ip.i, z + h) - unscale_i(im.i, z - h)) / (2.0 * h);
        let dk = (unscale_k(ip.k, z + h) - unscale_k(im.k, z - h)) / (2.0 * h);
        assert!(rel(di, unscale_i(p.di, z)) < 1e-7);
        assert!(rel(dk, unscale_k(p.dk, z)) < 1e-7);
    }
}
