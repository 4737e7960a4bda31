//! Complex Gamma function via the Lanczos approximation (g = 607/128,
//! fifteen terms).

use std::f64::consts::PI;

use num_complex::Complex64;

const LANCZOS_SHIFT: f64 = 5.242_187_5;
const LANCZOS_C0: f64 = 0.999_999_999_999_997_092;
const LANCZOS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

const SQRT_TWO_PI: f64 = 2.506_628_274_631_000_5;

/// A logarithm of Γ(z). The imaginary part is a continuous branch on
/// Re z ≥ 1/2 and is only meaningful modulo 2π elsewhere; callers that
/// exponentiate are unaffected.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let s = (z * PI).sin();
        return Complex64::new(PI.ln(), 0.0) - s.ln() - ln_gamma(1.0 - z);
    }
    let t = z + LANCZOS_SHIFT;
    let mut ser = Complex64::new(LANCZOS_C0, 0.0);
    let mut y = z;
    for &c in &LANCZOS {
        y += 1.0;
        ser += c / y;
    }
    (z + 0.5) * t.ln() - t + (ser * SQRT_TWO_PI / z).ln()
}

pub fn gamma(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    ln_gamma(z).exp()
}

/// 1/Γ(z), entire; exactly zero at the poles of Γ.
pub fn rgamma(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Complex64::new(0.0, 0.0);
    }
    (-ln_gamma(z)).exp()
}
