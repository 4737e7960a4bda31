//! Radial grids on the r = log x line and functions sampled on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_R_MIN: f64 = -12.0;
pub const DEFAULT_R_MAX: f64 = 4.0;
pub const DEFAULT_STEP: f64 = 0.01;

/// Ascending points with positive quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
    uniform_step: Option<f64>,
}

impl RadialGrid {
    /// Uniform grid with trapezoid weights. The step is adjusted so that an
    /// integer number of intervals spans [r_min, r_max].
    pub fn uniform(r_min: f64, r_max: f64, h: f64) -> Result<Self> {
        if !(r_min < r_max) || !(h > 0.0) {
            return Err(Error::InvariantViolation(format!(
                "uniform grid needs r_min < r_max and h > 0 (got {r_min}, {r_max}, {h})"
            )));
        }
        let intervals = ((r_max - r_min) / h).round().max(1.0) as usize;
        let step = (r_max - r_min) / intervals as f64;
        let points: Vec<f64> = (0..=intervals).map(|i| r_min + i as f64 * step).collect();
        let mut weights = vec![step; intervals + 1];
        weights[0] = 0.5 * step;
        weights[intervals] = 0.5 * step;
        Ok(RadialGrid {
            points,
            weights,
            uniform_step: Some(step),
        })
    }

    /// r ∈ [−12, 4] with h = 0.01.
    pub fn default_grid() -> Self {
        Self::uniform(DEFAULT_R_MIN, DEFAULT_R_MAX, DEFAULT_STEP).expect("valid default grid")
    }

    /// Arbitrary ascending points with trapezoid weights.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvariantViolation("grid needs at least two points".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvariantViolation("grid points must be strictly ascending".into()));
        }
        let n = points.len();
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let d = points[i + 1] - points[i];
            weights[i] += 0.5 * d;
            weights[i + 1] += 0.5 * d;
        }
        Ok(RadialGrid {
            points,
            weights,
            uniform_step: None,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.points[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.points.last().expect("grid is nonempty")
    }

    pub fn step(&self) -> Option<f64> {
        self.uniform_step
    }

    /// Index range of points inside [a, b].
    pub fn index_range(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let lo = self.points.partition_point(|&r| r < a);
        let hi = self.points.partition_point(|&r| r <= b);
        lo..hi
    }
}

/// Complex samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: RadialGrid,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvariantViolation(format!(
                "grid function has {} values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: &RadialGrid, f: F) -> Self {
        let values = grid.points().iter().map(|&r| f(r)).collect();
        GridFunction {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        GridFunction {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Weighted discrete L² norm.
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
