//! Discretized weighted resolvents ρR₀^{(j)}(λ)ρ, their norms, Schur bounds,
//! and the supremum over cross-section modes.

use std::ops::Range;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cross_section::CrossSectionSpectrum;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::linalg::largest_singular_value;
use crate::mode_resolvent::{check_order, ModeTable, SpectralPoint};
use crate::weight::WeightFunction;

pub const MAX_DENSE_DIM: usize = 4000;
pub const DEFAULT_TAIL_TOL: f64 = 1e-3;
/// Minimal distance between the right end of the grid and the weight support.
pub const SUPPORT_MARGIN: f64 = 3.0;

const TAIL_SAFETY: f64 = 1.01;
const TAIL_S_MIN: f64 = -30.0;
const TAIL_S_MAX: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormTarget {
    #[default]
    L2,
    H1,
}

/// A_{im} = ρ(r_i) G(r_i, r_m) ρ(r_m) √(w_i w_m) on the nodes where ρ > 0.
/// Rows and columns outside that range vanish and are not stored.
#[derive(Debug, Clone)]
pub struct WeightedKernelMatrix {
    pub grid: RadialGrid,
    pub support: Range<usize>,
    pub entries: Mat<Complex64>,
    pub k: Complex64,
    pub mu: f64,
    pub n: usize,
}

impl WeightedKernelMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..i).all(|j| self.entries[(i, j)] == self.entries[(j, i)]))
    }
}

fn support_range(grid: &RadialGrid, weight: &WeightFunction) -> Range<usize> {
    let pts = grid.points();
    let lo = pts.iter().position(|&r| weight.rho(r) > 0.0).unwrap_or(pts.len());
    let hi = pts[lo..].iter().position(|&r| weight.rho(r) == 0.0).map_or(pts.len(), |p| lo + p);
    lo..hi
}

fn check_grid(grid: &RadialGrid, weight: &WeightFunction) -> Result<()> {
    if grid.r_max() < weight.support_max() + SUPPORT_MARGIN {
        return Err(Error::GridTooNarrow {
            r_min: grid.r_min(),
            r_max: grid.r_max(),
            reason: "grid must extend 3 units past the weight support",
        });
    }
    Ok(())
}

fn table_on_support(k: Complex64, mu: f64, grid: &RadialGrid, support: &Range<usize>) -> Result<Option<ModeTable>> {
    if support.len() < 2 {
        return Ok(None);
    }
    ModeTable::on_points(k, mu, &grid.points()[support.clone()]).map(Some)
}

pub fn discretize_weighted_mode(
    k: Complex64,
    mu: f64,
    n: usize,
    grid: &RadialGrid,
    weight: &WeightFunction,
) -> Result<WeightedKernelMatrix> {
    check_order(k, mu)?;
    check_grid(grid, weight)?;
    let support = support_range(grid, weight);
    let d = support.len();
    let entries = match table_on_support(k, mu, grid, &support)? {
        None => Mat::zeros(d, d),
        Some(table) => {
            let s: Vec<f64> = support
                .clone()
                .map(|i| weight.rho(grid.points()[i]) * grid.weights()[i].sqrt())
                .collect();
            let mut m = Mat::zeros(d, d);
            for b in 0..d {
                for a in 0..=b {
                    let v = table.kernel(a, b) * (s[a] * s[b]);
                    m[(a, b)] = v;
                    m[(b, a)] = v;
                }
            }
            m
        }
    };
    Ok(WeightedKernelMatrix {
        grid: grid.clone(),
        support,
        entries,
        k,
        mu,
        n,
    })
}

/// Largest singular value of the matrix (L2), or of S·A with S the square
/// root of the discrete form ‖D_h u‖² + ‖(μ²e^{2r} + n²/4 + 1)^{1/2} u‖² (H1).
pub fn operator_norm(matrix: &WeightedKernelMatrix, target: NormTarget) -> Result<f64> {
    let d = matrix.dim();
    if d > MAX_DENSE_DIM {
        return Err(Error::DimensionTooLarge { dim: d, max: MAX_DENSE_DIM });
    }
    match target {
        NormTarget::L2 => largest_singular_value(&matrix.entries),
        NormTarget::H1 => {
            if d == 0 {
                return Ok(0.0);
            }
            let pts = &matrix.grid.points()[matrix.support.clone()];
            let w = &matrix.grid.weights()[matrix.support.clone()];
            let half_n = matrix.n as f64 / 2.0;
            let a = &matrix.entries;
            // rows 0..d: differences (u_{i+1} − u_i)/√h_i with u = v/√w and
            // u = 0 past the right end; rows d..2d: the potential part.
            let mut sa = Mat::<Complex64>::zeros(2 * d, d);
            for c in 0..d {
                for i in 0..d {
                    let u_i = a[(i, c)] / w[i].sqrt();
                    let (u_next, h) = if i + 1 < d {
                        (a[(i + 1, c)] / w[i + 1].sqrt(), pts[i + 1] - pts[i])
                    } else {
                        let h = if d > 1 { pts[d - 1] - pts[d - 2] } else { 1.0 };
                        (Complex64::new(0.0, 0.0), h)
                    };
                    sa[(i, c)] = (u_next - u_i) / h.sqrt();
                    let pot = matrix.mu * matrix.mu * (2.0 * pts[i]).exp() + half_n * half_n + 1.0;
                    sa[(d + i, c)] = a[(i, c)] * pot.sqrt();
                }
            }
            largest_singular_value(&sa)
        }
    }
}

/// max_i ρ(r_i) Σ_m w_m |G(r_i, r_m)| ρ(r_m): the Schur test with the test
/// vector (√w_i), an upper bound for the L² norm of the weighted matrix.
pub fn schur_bound(k: Complex64, mu: f64, grid: &RadialGrid, weight: &WeightFunction) -> Result<f64> {
    check_order(k, mu)?;
    check_grid(grid, weight)?;
    let support = support_range(grid, weight);
    let Some(table) = table_on_support(k, mu, grid, &support)? else {
        return Ok(0.0);
    };
    let pts = &grid.points()[support.clone()];
    let w = &grid.weights()[support.clone()];
    let rho: Vec<f64> = pts.iter().map(|&r| weight.rho(r)).collect();
    let mass = table.abs_apply(w, &rho);
    Ok(mass.iter().zip(&rho).map(|(m, p)| m * p).fold(0.0, f64::max))
}

/// S(k) = sup_s e^{s/2} ∫ |G₁(s, s')| e^{s'/2} ds' over the whole line, for
/// the μ = 1 kernel. Since G_μ(r, t) = G₁(r + log μ, t + log μ) and χ ≤ 1,
/// every mode with μ > 0 has Schur bound at most S(k)/μ.
pub fn scaled_tail_constant(k: Complex64, h: f64) -> Result<f64> {
    let grid = RadialGrid::uniform(TAIL_S_MIN, TAIL_S_MAX, h)?;
    let table = ModeTable::new(k, 1.0, &grid)?;
    let rho: Vec<f64> = grid.points().iter().map(|&s| (0.5 * s).exp()).collect();
    let mass = table.abs_apply(grid.weights(), &rho);
    Ok(mass.iter().zip(&rho).map(|(m, p)| m * p).fold(0.0, f64::max))
}

/// A mode examined by [`assemble_full_norm`]; modes settled by the tail
/// bound alone leave no record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub index: usize,
    pub mu: f64,
    /// S(k)/μ with a 1% allowance for discretization, infinite at μ = 0.
    pub tail_bound: f64,
    pub schur: Option<f64>,
    pub norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullNorm {
    pub norm: f64,
    pub modes_used: usize,
    /// Bound on every mode past `modes_used`.
    pub stop_bound: f64,
    pub records: Vec<ModeRecord>,
}

/// sup over modes of the per-mode norms, in ascending μ. A mode whose tail
/// bound or Schur bound is below the running sup cannot raise it and is not
/// decomposed; the walk stops at the first mode with tail bound below
/// tail_tol·sup. A one-entry spectrum is a single-mode problem.
pub fn assemble_full_norm(
    k: Complex64,
    spectrum: &CrossSectionSpectrum,
    grid: &RadialGrid,
    weight: &WeightFunction,
    tail_tol: f64,
    target: NormTarget,
) -> Result<FullNorm> {
    if !(tail_tol > 0.0) {
        return Err(Error::InvariantViolation(format!("tail_tol must be positive, got {tail_tol}")));
    }
    let n = spectrum.n();
    let mut sup = 0.0f64;
    let mut records = Vec::new();
    let mut tail_constant: Option<f64> = None;
    let step = grid.step().unwrap_or(crate::grid::DEFAULT_STEP);
    let mut last_bound = f64::INFINITY;
    for (j, e) in spectrum.entries().iter().enumerate() {
        let mu = e.mu();
        let tail_bound = if mu > 0.0 {
            let s = match tail_constant {
                Some(s) => s,
                None => {
                    let s = scaled_tail_constant(k, step)?;
                    tail_constant = Some(s);
                    s
                }
            };
            TAIL_SAFETY * s / mu
        } else {
            f64::INFINITY
        };
        last_bound = tail_bound;
        if j > 0 && tail_bound < tail_tol * sup {
            let computed = records.iter().filter_map(|r: &ModeRecord| r.norm).fold(0.0, f64::max);
            debug_assert_eq!(computed, sup);
            return Ok(FullNorm {
                norm: sup,
                modes_used: j,
                stop_bound: tail_bound,
                records,
            });
        }
        let mut rec = ModeRecord {
            index: j,
            mu,
            tail_bound,
            schur: None,
            norm: None,
        };
        if tail_bound >= sup {
            let sb = schur_bound(k, mu, grid, weight)?;
            rec.schur = Some(sb);
            if sb >= sup {
                let m = discretize_weighted_mode(k, mu, n, grid, weight)?;
                let v = operator_norm(&m, target)?;
                rec.norm = Some(v);
                sup = sup.max(v);
            }
            records.push(rec);
        }
    }
    if spectrum.len() == 1 {
        return Ok(FullNorm {
            norm: sup,
            modes_used: 1,
            stop_bound: 0.0,
            records,
        });
    }
    Err(Error::TailNotConverged {
        modes: spectrum.len(),
        last_bound,
        sup,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSample {
    pub lambda: Complex64,
    pub norm: f64,
    pub modes_used: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormScan {
    pub samples: Vec<NormSample>,
}

impl NormScan {
    pub fn new(samples: Vec<NormSample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !(s.norm >= 0.0) {
                return Err(Error::InvariantViolation(format!("negative or NaN norm at sample {i}")));
            }
            if samples[..i].iter().any(|p| p.lambda == s.lambda) {
                return Err(Error::InvariantViolation(format!("repeated λ = {}", s.lambda)));
            }
        }
        Ok(NormScan { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Least C ≥ 0 with norm ≤ e^{C|λ|} at every sample.
pub fn fit_exponential_bound(scan: &NormScan) -> Result<f64> {
    if scan.is_empty() {
        return Err(Error::EmptyScan);
    }
    let mut c = 0.0f64;
    for s in &scan.samples {
        if !(s.norm > 0.0) {
            return Err(Error::InvariantViolation(format!("norm at λ = {} is not positive", s.lambda)));
        }
        c = c.max(s.norm.ln().max(0.0) / s.lambda.norm());
    }
    Ok(c)
}

/// One λ of a critical-line scan with the per-mode records behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub lambda: Complex64,
    pub full: FullNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub tail_tol: f64,
    pub target: NormTarget,
    pub weight: WeightFunction,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            tail_tol: DEFAULT_TAIL_TOL,
            target: NormTarget::L2,
            weight: WeightFunction::Cutoff,
        }
    }
}

/// Evenly spaced Im λ in [lo, hi] with `count` samples.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Full weighted norms at λ = re_lambda + i·im for each listed im, spread
/// over `threads` workers. Output order follows the input.
pub fn scan_line(
    spectrum: &CrossSectionSpectrum,
    grid: &RadialGrid,
    re_lambda: f64,
    ims: &[f64],
    settings: &ScanSettings,
    threads: usize,
) -> Result<Vec<ScanPoint>> {
    let n = spectrum.n();
    let run = |im: f64| -> Result<ScanPoint> {
        let lambda = Complex64::new(re_lambda, im);
        let k = SpectralPoint::new(n, lambda)?.k();
        let full = assemble_full_norm(k, spectrum, grid, &settings.weight, settings.tail_tol, settings.target)?;
        Ok(ScanPoint { lambda, full })
    };
    let threads = threads.max(1).min(ims.len().max(1));
    if threads == 1 {
        return ims.iter().map(|&im| run(im)).collect();
    }
    let mut slots: Vec<Option<Result<ScanPoint>>> = (0..ims.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = slots.chunks_mut(ims.len().div_ceil(threads)).collect();
        let mut offset = 0;
        for chunk in chunks {
            let start = offset;
            offset += chunk.len();
            let run = &run;
            scope.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(run(ims[start + i]));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

pub fn to_norm_scan(points: &[ScanPoint]) -> Result<NormScan> {
    NormScan::new(
        points
            .iter()
            .map(|p| NormSample {
                lambda: p.lambda,
                norm: p.full.norm,
                modes_used: p.full.modes_used,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::{builtin_spectrum, CrossSectionKind};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small_grid() -> RadialGrid {
        RadialGrid::uniform(-10.0, 3.0, 0.02).unwrap()
    }

    #[test]
    fn free_mode_entries() {
        let g = small_grid();
        let w = WeightFunction::Cutoff;
        let m = discretize_weighted_mode(c(1.0, 0.0), 0.0, 1, &g, &w).unwrap();
        let pts = g.points();
        let (a, b) = (10, 200);
        let (ia, ib) = (m.support.start + a, m.support.start + b);
        let expected = 0.5
            * (-(pts[ia] - pts[ib]).abs()).exp()
            * w.rho(pts[ia])
            * w.rho(pts[ib])
            * (g.weights()[ia] * g.weights()[ib]).sqrt();
        assert!((m.entries[(a, b)].re - expected).abs() < 1e-15);
        assert!(m.is_symmetric());
    }

    #[test]
    fn vanishing_weight_gives_zero() {
        let g = small_grid();
        let m = discretize_weighted_mode(c(1.0, 2.0), 1.0, 1, &g, &WeightFunction::Vanishing).unwrap();
        assert_eq!(operator_norm(&m, NormTarget::L2).unwrap(), 0.0);
        assert_eq!(schur_bound(c(1.0, 2.0), 1.0, &g, &WeightFunction::Vanishing).unwrap(), 0.0);
    }

    #[test]
    fn narrow_grid_rejected() {
        let g = RadialGrid::uniform(-10.0, 1.0, 0.05).unwrap();
        assert!(matches!(
            schur_bound(c(1.0, 2.0), 1.0, &g, &WeightFunction::Cutoff),
            Err(Error::GridTooNarrow { .. })
        ));
    }

    #[test]
    fn schur_dominates_svd() {
        let g = small_grid();
        let w = WeightFunction::Cutoff;
        for &(k, mu) in &[(c(0.0, 1.0), 0.0), (c(0.0, 5.0), 1.0), (c(-0.1, 3.0), 2.0), (c(0.3, 10.0), 4.0)] {
            let m = discretize_weighted_mode(k, mu, 1, &g, &w).unwrap();
            let norm = operator_norm(&m, NormTarget::L2).unwrap();
            let sb = schur_bound(k, mu, &g, &w).unwrap();
            assert!(sb >= norm - 1e-12, "k={k} mu={mu}: {sb} < {norm}");
        }
    }

    #[test]
    fn tail_constant_bounds_modes() {
        let g = small_grid();
        let w = WeightFunction::Cutoff;
        let k = c(0.0, 4.0);
        let s = scaled_tail_constant(k, 0.02).unwrap();
        for mu in [1.0, 3.0, 10.0, 40.0] {
            let sb = schur_bound(k, mu, &g, &w).unwrap();
            assert!(sb <= TAIL_SAFETY * s / mu, "mu={mu}: {sb} vs {}", s / mu);
        }
    }

    #[test]
    fn free_mode_schur_matches_closed_form_mass() {
        // k real: ρ(r) ∫ e^{−k|r−t|} ρ(t) dt / (2k) by direct quadrature
        let g = RadialGrid::uniform(-12.0, 3.0, 0.005).unwrap();
        let w = WeightFunction::Cutoff;
        let k = 1.5;
        let sb = schur_bound(c(k, 0.0), 0.0, &g, &w).unwrap();
        let rule = crate::quadrature::GaussKronrod::new(1e-13, 1e-12);
        let mut best: f64 = 0.0;
        for i in 0..=300 {
            let r = -12.0 + 12.0 * i as f64 / 300.0;
            let f = |t: f64| (-k * (r - t).abs()).exp() * w.rho(t);
            let (left, _) = crate::quadrature::integrate_real(&rule, f, -12.0, r).unwrap();
            let (right, _) = crate::quadrature::integrate_real(&rule, f, r, 0.0).unwrap();
            let m = left + right;
            best = best.max(w.rho(r) * m / (2.0 * k));
        }
        assert!((sb - best).abs() < 2e-3 * best, "{sb} vs {best}");
    }

    #[test]
    fn operator_norm_of_rank_one() {
        let g = small_grid();
        let mut m = discretize_weighted_mode(c(1.0, 0.0), 0.0, 1, &g, &WeightFunction::Cutoff).unwrap();
        let d = m.dim();
        let a: Vec<f64> = (0..d).map(|i| (i as f64 * 0.01).sin()).collect();
        let b: Vec<f64> = (0..d).map(|i| 1.0 / (1.0 + i as f64)).collect();
        for i in 0..d {
            for j in 0..d {
                m.entries[(i, j)] = c(a[i] * b[j], 0.0);
            }
        }
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((operator_norm(&m, NormTarget::L2).unwrap() - na * nb).abs() < 1e-12 * na * nb);
        for i in 0..d {
            for j in 0..d {
                m.entries[(i, j)] = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
            }
        }
        assert!((operator_norm(&m, NormTarget::L2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h1_norm_exceeds_scaled_l2() {
        let g = small_grid();
        let m = discretize_weighted_mode(c(0.0, 3.0), 1.0, 2, &g, &WeightFunction::Cutoff).unwrap();
        let l2 = operator_norm(&m, NormTarget::L2).unwrap();
        let h1 = operator_norm(&m, NormTarget::H1).unwrap();
        assert!(h1 >= 2f64.sqrt() * l2 * (1.0 - 1e-12));
    }

    #[test]
    fn single_entry_spectrum_is_the_free_mode() {
        let g = small_grid();
        let w = WeightFunction::Cutoff;
        let spectrum = CrossSectionSpectrum::new(1, vec![crate::cross_section::SpectrumEntry { mu_sq: 0.0, multiplicity: 1 }])
            .unwrap();
        let k = c(0.0, 5.0);
        let full = assemble_full_norm(k, &spectrum, &g, &w, 1e-3, NormTarget::L2).unwrap();
        let direct = operator_norm(&discretize_weighted_mode(k, 0.0, 1, &g, &w).unwrap(), NormTarget::L2).unwrap();
        assert_eq!(full.norm, direct);
        assert_eq!(full.modes_used, 1);
    }

    #[test]
    fn circle_assembly_converges() {
        let g = small_grid();
        let w = WeightFunction::Cutoff;
        let spectrum = builtin_spectrum(&CrossSectionKind::Circle { length: 2.0 * PI }, 100_000).unwrap();
        let full = assemble_full_norm(c(1.0, 5.0), &spectrum, &g, &w, 1e-3, NormTarget::L2).unwrap();
        let computed = full.records.iter().filter_map(|r| r.norm).fold(0.0, f64::max);
        assert_eq!(full.norm, computed);
        assert!(full.modes_used < spectrum.len());
        let short = spectrum.truncated(3);
        assert!(matches!(
            assemble_full_norm(c(1.0, 5.0), &short, &g, &w, 1e-3, NormTarget::L2),
            Err(Error::TailNotConverged { .. })
        ));
    }

    #[test]
    fn exponential_fit() {
        assert!(matches!(fit_exponential_bound(&NormScan::default()), Err(Error::EmptyScan)));
        let one = |lambda: Complex64, norm: f64| NormSample { lambda, norm, modes_used: 1 };
        let scan = NormScan::new(vec![one(c(0.5, 1.0), 0.3), one(c(0.5, 2.0), 0.9)]).unwrap();
        assert_eq!(fit_exponential_bound(&scan).unwrap(), 0.0);
        let scan = NormScan::new(vec![one(c(6.0, 8.0), 5f64.exp())]).unwrap();
        assert!((fit_exponential_bound(&scan).unwrap() - 0.5).abs() < 1e-15);
        assert!(NormScan::new(vec![one(c(1.0, 1.0), 1.0), one(c(1.0, 1.0), 2.0)]).is_err());
    }
}
