//! Effective potential and admissibility checks for conformally warped
//! metrics g = x^{-2}(dx² + w(x)²h₀) near x = 0, with x = e^{−r}.
//!
//! For a scalar warp ν = w(e^{−r})ⁿ e^{nr} √det h₀ depends on r only, so with
//! L = log ν the potential is q = (L'/2)² + L''/2. Writing A = x w'/w and
//! B = x² w''/w,
//!
//!   q = n²(1 − A)²/4 + n(A + B − A²)/2,
//!
//! and both the σ^{-1} ratio and the AH ratio reduce to 2 − 2A.

use crate::grid::{GridFunction, RadialGrid};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Closed-form conformal profiles w(x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WarpProfile {
    /// w ≡ 1.
    Constant,
    /// (1 + a x)^p.
    Power { a: f64, p: f64 },
    /// e^{b x}.
    Exponential { b: f64 },
}

impl WarpProfile {
    /// w and its first three x-derivatives.
    pub fn jet(&self, x: f64) -> [f64; 4] {
        match *self {
            WarpProfile::Constant => [1.0, 0.0, 0.0, 0.0],
            WarpProfile::Power { a, p } => {
                let base = 1.0 + a * x;
                let mut out = [0.0; 4];
                let mut coef = 1.0;
                for (m, o) in out.iter_mut().enumerate() {
                    *o = coef * base.powf(p - m as f64);
                    coef *= (p - m as f64) * a;
                }
                out
            }
            WarpProfile::Exponential { b } => {
                let e = (b * x).exp();
                [e, b * e, b * b * e, b * b * b * e]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpedMetricFamily {
    pub n: usize,
    pub profile: WarpProfile,
    /// Collar width: the family is used on 0 < x ≤ epsilon.
    pub epsilon: f64,
}

impl WarpedMetricFamily {
    pub fn new(n: usize, profile: WarpProfile, epsilon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvariantViolation("dimension n must be positive".into()));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvariantViolation(format!("collar width {epsilon} must be positive")));
        }
        let fam = WarpedMetricFamily { n, profile, epsilon };
        // positivity at the ends and at a few interior points of the collar
        for i in 0..=16 {
            let x = epsilon * i as f64 / 16.0;
            let w = profile.jet(x)[0];
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvariantViolation(format!("w({x}) = {w} is not positive")));
            }
        }
        Ok(fam)
    }

    fn check_collar(&self, r: f64) -> Result<f64> {
        let x = (-r).exp();
        if x > self.epsilon * (1.0 + 1e-12) {
            return Err(Error::CollarViolation { r, epsilon: self.epsilon });
        }
        Ok(x)
    }

    /// (A, B, C) = (x w'/w, x² w''/w, x³ w'''/w).
    fn ratios(&self, x: f64) -> (f64, f64, f64) {
        let [w, w1, w2, w3] = self.profile.jet(x);
        (x * w1 / w, x * x * w2 / w, x * x * x * w3 / w)
    }

    /// q at x = e^{−r}.
    pub fn q_at(&self, r: f64) -> Result<f64> {
        let x = self.check_collar(r)?;
        let (a, b, _) = self.ratios(x);
        let n = self.n as f64;
        Ok(0.25 * n * n * (1.0 - a).powi(2) + 0.5 * n * (a + b - a * a))
    }

    /// ∂_r q at x = e^{−r}.
    pub fn dq_at(&self, r: f64) -> Result<f64> {
        let x = self.check_collar(r)?;
        let (a, b, c) = self.ratios(x);
        let n = self.n as f64;
        // x d/dx of A and B
        let xa = a + b - a * a;
        let xb = 2.0 * b + c - a * b;
        let xq = -0.5 * n * n * (1.0 - a) * xa + 0.5 * n * (xa + xb - 2.0 * a * xa);
        Ok(-xq)
    }

    /// −∂_r log σ^{-1} = 2 + x ∂_x(h^{-1})/h^{-1} = 2 − 2 x w'/w.
    pub fn ah_ratio_at(&self, r: f64) -> Result<f64> {
        let x = self.check_collar(r)?;
        Ok(2.0 - 2.0 * self.ratios(x).0)
    }

    /// q at x = 0.
    pub fn q_limit(&self) -> f64 {
        0.25 * (self.n * self.n) as f64
    }
}

fn check_grid(metric: &WarpedMetricFamily, grid: &RadialGrid) -> Result<()> {
    metric.check_collar(grid.r_min())?;
    if grid.r_min() <= 0.0 {
        return Err(Error::CollarViolation {
            r: grid.r_min(),
            epsilon: metric.epsilon,
        });
    }
    Ok(())
}

pub fn effective_potential(metric: &WarpedMetricFamily, grid: &RadialGrid) -> Result<GridFunction> {
    check_grid(metric, grid)?;
    let values = grid
        .points()
        .iter()
        .map(|&r| metric.q_at(r).map(|q| Complex64::new(q, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(grid.clone(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassFlags {
    pub propsigma: bool,
    pub prop2sigma: bool,
    pub ah: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub sup_q: f64,
    /// Log-log slope of the running tail maximum of |∂_r q|; None when
    /// ∂_r q vanishes to rounding on the whole grid.
    pub dq_decay_exponent: Option<f64>,
    /// min over the grid of −∂_r(σ^{-1}) / (r^{-1}σ^{-1}).
    pub prop2sigma_min_ratio: f64,
    pub ah_ratio_min: f64,
    pub pass: PassFlags,
}

impl ConditionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Least-squares slope of log y against log x.
fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, &y)| y > 0.0).map(|(&x, &y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

pub fn check_conditions(metric: &WarpedMetricFamily, grid: &RadialGrid, delta: f64) -> Result<ConditionReport> {
    if !(delta > 0.0) {
        return Err(Error::InvariantViolation(format!("delta = {delta} must be positive")));
    }
    check_grid(metric, grid)?;
    let rs = grid.points();
    let q: Vec<f64> = rs.iter().map(|&r| metric.q_at(r)).collect::<Result<_>>()?;
    let dq: Vec<f64> = rs.iter().map(|&r| metric.dq_at(r)).collect::<Result<_>>()?;
    let ah: Vec<f64> = rs.iter().map(|&r| metric.ah_ratio_at(r)).collect::<Result<_>>()?;
    let sup_q = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-13 * sup_q.max(1.0);
    let mut envelope = vec![0.0; dq.len()];
    let mut run = 0.0f64;
    for i in (0..dq.len()).rev() {
        run = run.max(dq[i].abs());
        envelope[i] = if run > floor { run } else { 0.0 };
    }
    let dq_decay_exponent = loglog_slope(rs, &envelope);
    let nonincreasing = dq.iter().all(|&d| d <= floor);
    let decays = match dq_decay_exponent {
        None => true,
        Some(p) => p <= -1.0 - delta,
    };
    let prop2sigma_min_ratio = rs.iter().zip(&ah).map(|(&r, &a)| r * a).fold(f64::INFINITY, f64::min);
    let ah_ratio_min = ah.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConditionReport {
        sup_q,
        dq_decay_exponent,
        prop2sigma_min_ratio,
        ah_ratio_min,
        pass: PassFlags {
            propsigma: sup_q.is_finite() && (nonincreasing || decays),
            prop2sigma: prop2sigma_min_ratio > 0.0,
            ah: ah_ratio_min >= 1.0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collar_grid(eps: f64) -> RadialGrid {
        RadialGrid::uniform(-(eps.ln()), 30.0, 0.05).unwrap()
    }

    #[test]
    fn exact_warped_product() {
        let m = WarpedMetricFamily::new(3, WarpProfile::Constant, 0.5).unwrap();
        let g = collar_grid(0.5);
        let q = effective_potential(&m, &g).unwrap();
        assert!(q.values.iter().all(|v| (v.re - 2.25).abs() < 1e-15 && v.im == 0.0));
        let rep = check_conditions(&m, &g, 0.1).unwrap();
        assert_eq!(rep.dq_decay_exponent, None);
        assert_eq!(rep.ah_ratio_min, 2.0);
        assert!((rep.prop2sigma_min_ratio - 2.0 * g.r_min()).abs() < 1e-12);
        assert!(rep.pass.propsigma && rep.pass.prop2sigma && rep.pass.ah);
    }

    #[test]
    fn square_profile_ah_ratio() {
        let m = WarpedMetricFamily::new(2, WarpProfile::Power { a: 1.0, p: 2.0 }, 1.0 / 3.0).unwrap();
        for &r in &[(3.0f64).ln(), 2.0, 5.0] {
            let x = (-r).exp();
            let want = 2.0 - 4.0 * x / (1.0 + x);
            assert!((m.ah_ratio_at(r).unwrap() - want).abs() < 1e-14);
        }
        let rep = check_conditions(&m, &collar_grid(1.0 / 3.0), 0.5).unwrap();
        assert!(rep.ah_ratio_min >= 1.0 - 1e-12 && rep.pass.ah);
    }

    #[test]
    fn potential_tends_to_n2_over_4() {
        let m = WarpedMetricFamily::new(2, WarpProfile::Power { a: 1.0, p: 1.0 }, 0.5).unwrap();
        let far = m.q_at(30.0).unwrap();
        assert!((far - m.q_limit()).abs() < 1e-12);
        assert!((m.q_at(10.0).unwrap() - m.q_limit()).abs() < 1e-3);
    }

    #[test]
    fn dq_matches_differences() {
        for prof in [WarpProfile::Power { a: 0.7, p: 2.5 }, WarpProfile::Exponential { b: -1.3 }] {
            let m = WarpedMetricFamily::new(3, prof, 0.9).unwrap();
            for &r in &[0.5, 1.0, 2.0] {
                let h = 1e-5;
                let fd = (m.q_at(r + h).unwrap() - m.q_at(r - h).unwrap()) / (2.0 * h);
                assert!((fd - m.dq_at(r).unwrap()).abs() < 1e-8, "{prof:?} {r}");
            }
        }
    }

    #[test]
    fn collar_is_enforced() {
        let m = WarpedMetricFamily::new(1, WarpProfile::Constant, 0.1).unwrap();
        let g = RadialGrid::uniform(1.0, 5.0, 0.1).unwrap();
        assert!(matches!(effective_potential(&m, &g), Err(Error::CollarViolation { .. })));
        assert!(matches!(m.q_at(1.0), Err(Error::CollarViolation { .. })));
    }

    #[test]
    fn json_layout() {
        let m = WarpedMetricFamily::new(2, WarpProfile::Power { a: 1.0, p: 1.0 }, 0.5).unwrap();
        let rep = check_conditions(&m, &collar_grid(0.5), 0.5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        for key in ["sup_q", "dq_decay_exponent", "prop2sigma_min_ratio", "ah_ratio_min"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["pass"]["propsigma"].as_bool().unwrap());
    }
}
