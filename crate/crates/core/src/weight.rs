//! The boundary weight ρ(r) = e^{r/2} χ(r) on the r = log x line.

use serde::{Deserialize, Serialize};

/// 6x⁵ − 15x⁴ + 10x³ clamped to [0, 1].
pub fn smoothstep5(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (x * (6.0 * x - 15.0) + 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightFunction {
    /// χ = 1 on r ≤ −1, 0 on r ≥ 0, quintic smoothstep between.
    #[default]
    Cutoff,
    /// ρ ≡ 0.
    Vanishing,
    /// ρ = e^{r/2} with no cutoff.
    HalfPower,
}

impl WeightFunction {
    pub fn chi(&self, r: f64) -> f64 {
        match self {
            WeightFunction::Cutoff => 1.0 - smoothstep5(r + 1.0),
            WeightFunction::Vanishing => 0.0,
            WeightFunction::HalfPower => 1.0,
        }
    }

    pub fn rho(&self, r: f64) -> f64 {
        match self {
            WeightFunction::Cutoff => (0.5 * r).exp() * self.chi(r),
            WeightFunction::Vanishing => 0.0,
            WeightFunction::HalfPower => (0.5 * r).exp(),
        }
    }

    /// Right end of the support.
    pub fn support_max(&self) -> f64 {
        match self {
            WeightFunction::HalfPower => f64::INFINITY,
            _ => 0.0,
        }
    }
}
