//! Adaptive 21-point Gauss–Kronrod quadrature for complex-valued integrands
//! on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_340_263_340,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Result of one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate {
    pub value: Complex64,
    pub abs_error: f64,
    /// Integral of |f|; the scale against which roundoff is measured.
    pub l1: f64,
    pub evaluations: usize,
}

impl QuadEstimate {
    pub fn zero() -> Self {
        QuadEstimate {
            value: Complex64::new(0.0, 0.0),
            abs_error: 0.0,
            l1: 0.0,
            evaluations: 0,
        }
    }

    /// Sum of two estimates over adjacent domains.
    pub fn combine(self, other: QuadEstimate) -> QuadEstimate {
        QuadEstimate {
            value: self.value + other.value,
            abs_error: self.abs_error + other.abs_error,
            l1: self.l1 + other.l1,
            evaluations: self.evaluations + other.evaluations,
        }
    }

    /// Error floor from floating-point cancellation among integrand values.
    pub fn roundoff_floor(&self) -> f64 {
        ROUNDOFF_FACTOR * f64::EPSILON * self.l1
    }
}

const ROUNDOFF_FACTOR: f64 = 50.0;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
    l1: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn qk21<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> Panel {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut res_k = fc * WGK[10];
    let mut res_g = Complex64::new(0.0, 0.0);
    let mut res_abs = fc.norm() * WGK[10];
    let mut fv1 = [Complex64::new(0.0, 0.0); 10];
    let mut fv2 = [Complex64::new(0.0, 0.0); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += (f1 + f2) * WGK[j];
        res_abs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            res_g += (f1 + f2) * WG[j / 2];
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).norm();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
    }
    let h = half.abs();
    let value = res_k * half;
    res_abs *= h;
    res_asc *= h;
    let mut err = ((res_k - res_g) * half).norm();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel {
        a,
        b,
        value,
        err,
        l1: res_abs,
    }
}

/// Adaptive bisection driver. Panels are refined in order of decreasing
/// error estimate until the total meets `max(abs_tol, rel_tol * |I|)`, or
/// until every remaining error is attributable to roundoff.
#[derive(Debug, Clone, Copy)]
pub struct GaussKronrod {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for GaussKronrod {
    fn default() -> Self {
        GaussKronrod {
            abs_tol: 0.0,
            rel_tol: 1e-13,
            max_panels: 4000,
        }
    }
}

impl GaussKronrod {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        GaussKronrod {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }

    pub fn with_max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }

    /// Integrate over `[a, b]` with `b >= a`.
    pub fn integrate<F: FnMut(f64) -> Complex64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
    ) -> Result<QuadEstimate> {
        if a == b {
            return Ok(QuadEstimate::zero());
        }
        let mut heap = BinaryHeap::new();
        let first = qk21(&mut f, a, b);
        let mut evaluations = 21;
        let mut total = first.value;
        let mut total_err = first.err;
        let mut total_l1 = first.l1;
        heap.push(first);
        loop {
            let target = self.abs_tol.max(self.rel_tol * total.norm());
            let floor = 2.0 * ROUNDOFF_FACTOR * f64::EPSILON * total_l1;
            if total_err <= target || total_err <= floor {
                break;
            }
            if heap.len() >= self.max_panels {
                return Err(Error::QuadratureFailure {
                    context: "panel budget exhausted",
                    requested: target,
                    estimate: total_err,
                });
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // Interval cannot be split further in floating point.
                heap.push(worst);
                break;
            }
            let left = qk21(&mut f, worst.a, mid);
            let right = qk21(&mut f, mid, worst.b);
            evaluations += 42;
            total += left.value + right.value - worst.value;
            total_err += left.err + right.err - worst.err;
            total_l1 += left.l1 + right.l1 - worst.l1;
            heap.push(left);
            heap.push(right);
        }
        let mut panels = heap.into_vec();
        panels.sort_by(|p, q| p.a.total_cmp(&q.a));
        let mut value = Complex64::new(0.0, 0.0);
        let mut abs_error = 0.0;
        let mut l1 = 0.0;
        for p in &panels {
            value += p.value;
            abs_error += p.err;
            l1 += p.l1;
        }
        Ok(QuadEstimate {
            value,
            abs_error,
            l1,
            evaluations,
        })
    }

    /// Integrate over consecutive breakpoints, summing the pieces.
    pub fn integrate_pieces<F: FnMut(f64) -> Complex64>(
        &self,
        mut f: F,
        breaks: &[f64],
    ) -> Result<QuadEstimate> {
        let mut acc = QuadEstimate::zero();
        for w in breaks.windows(2) {
            acc = acc.combine(self.integrate(&mut f, w[0], w[1])?);
        }
        Ok(acc)
    }
}

/// Real-valued convenience wrapper.
pub fn integrate_real<F: FnMut(f64) -> f64>(
    rule: &GaussKronrod,
    mut f: F,
    a: f64,
    b: f64,
) -> Result<(f64, f64)> {
    let est = rule.integrate(|x| Complex64::new(f(x), 0.0), a, b)?;
    Ok((est.value.re, est.abs_error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_and_kronrod_weights_sum_to_two() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_exact() {
        let rule = GaussKronrod::default();
        let est = rule
            .integrate(|x| Complex64::new(x.powi(7) - 3.0 * x * x, x), -1.0, 2.0)
            .unwrap();
        let exact = Complex64::new((256.0 - 1.0) / 8.0 - (8.0 + 1.0), 1.5);
        assert!((est.value - exact).norm() < 1e-13);
    }

    #[test]
    fn oscillatory_complex_exponential() {
        let rule = GaussKronrod::new(0.0, 1e-12);
        let w = 40.0;
        let est = rule
            .integrate(|x| Complex64::new(0.0, w * x).exp(), 0.0, 3.0)
            .unwrap();
        let exact = (Complex64::new(0.0, 3.0 * w).exp() - 1.0) / Complex64::new(0.0, w);
        assert!((est.value - exact).norm() < 1e-12 * exact.norm());
        assert!(est.abs_error < 1e-11);
    }

    #[test]
    fn endpoint_singularity() {
        let rule = GaussKronrod::new(0.0, 1e-10);
        let (v, _) = integrate_real(&rule, |x| 1.0 / x.sqrt(), 0.0, 1.0).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let rule = GaussKronrod::new(0.0, 1e-14).with_max_panels(3);
        let r = rule.integrate(|x| Complex64::new((1.0 / x).sin(), 0.0), 1e-4, 1.0);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }

    #[test]
    fn pieces_match_single_interval() {
        let rule = GaussKronrod::default();
        let f = |x: f64| Complex64::new((-x * x).exp(), 0.0);
        let a = rule.integrate(f, -3.0, 4.0).unwrap();
        let b = rule.integrate_pieces(f, &[-3.0, 0.0, 1.0, 4.0]).unwrap();
        assert!((a.value - b.value).norm() < 1e-14);
    }
}
