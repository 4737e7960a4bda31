//! Parametrix for the resolvent on the pure model, one cross-section mode at a
//! time, and the Neumann inversion of 1 + K(λ, z).
//!
//! The r = log x line is cut at R = log x_cap with a Dirichlet condition, so
//! every kernel below is an exact Green kernel of the capped mode operator
//! P − Λ = −∂² + μ²e^{2r} + k². Operator products are never formed by
//! quadrature across a kernel diagonal: a composition G_a M G_b with a
//! multiplication or first-order middle operator M is semi-separable, and its
//! kernel is evaluated from running integrals of products of the factors.
//!
//! Discretization: the rows of K live in [log(1/10), R]. That interval is
//! split into panels at every base-grid node and every cutoff junction and
//! carries a Gauss–Legendre rule of [`ParametrixLayout::order`] nodes per
//! panel. Matrices are symmetrically weighted by the square roots of the
//! quadrature weights, so matrix products approximate operator products.

use crate::cross_section::CrossSectionSpectrum;
use crate::grid::RadialGrid;
use crate::mode_resolvent::{check_order, ModeTable, CONTINUATION_RE_K_MIN};
use crate::weight::{smoothstep5, WeightFunction};
use crate::weighted_operator::{linspace, NormScan};
use crate::{Error, Result};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default cap R = log x_cap.
pub const DEFAULT_R_CAP: f64 = 4.0;
/// Required distance between the left grid end and log(1/5).
pub const CUTOFF_MARGIN: f64 = 1.0;
/// Below this |Λ − Z| the divided difference is refused.
pub const DIVIDED_DIFFERENCE_MIN_GAP: f64 = 1e-8;
/// Evidence threshold on ‖K‖.
pub const EVIDENCE_MAX: f64 = 0.5;
/// Gauss nodes per panel used for the running integrals.
const FILL_ORDER: usize = 4;
/// Points closer than this are merged into one knot.
const MERGE_TOL: f64 = 1e-12;

/// The pinned reference point λ₀ = n/2 + 1/2 + 2i.
pub fn lambda0(n: usize) -> Complex64 {
    Complex64::new(0.5 * n as f64 + 0.5, 2.0)
}

/// Uniform grid on [−12, 4] with 801 nodes.
pub fn default_parametrix_grid() -> RadialGrid {
    RadialGrid::uniform(-12.0, DEFAULT_R_CAP, 0.02).expect("static grid")
}

fn gauss_legendre(order: usize) -> Result<(&'static [f64], &'static [f64])> {
    const X2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
    const W2: [f64; 2] = [1.0, 1.0];
    const X3: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W3: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    const X4: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const W4: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    match order {
        2 => Ok((&X2, &W2)),
        3 => Ok((&X3, &W3)),
        4 => Ok((&X4, &W4)),
        _ => Err(Error::InvariantViolation(format!("Gauss order {order} not in 2..=4"))),
    }
}

/// Value and first two r-derivatives of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    fn is_flat(&self) -> bool {
        self.d1 == 0.0 && self.d2 == 0.0
    }
}

fn smoothstep5_d1(y: f64) -> f64 {
    if y <= 0.0 || y >= 1.0 {
        0.0
    } else {
        30.0 * y * y * (1.0 - y) * (1.0 - y)
    }
}

fn smoothstep5_d2(y: f64) -> f64 {
    if y <= 0.0 || y >= 1.0 {
        0.0
    } else {
        60.0 * y * (1.0 - y) * (1.0 - 2.0 * y)
    }
}

/// S(a·x − b) at x = e^r, with r-derivatives.
fn rising(r: f64, a: f64, b: f64) -> Jet {
    let x = r.exp();
    let y = a * x - b;
    let px = a * smoothstep5_d1(y);
    let pxx = a * a * smoothstep5_d2(y);
    Jet {
        value: smoothstep5(y),
        d1: x * px,
        d2: x * px + x * x * pxx,
    }
}

fn falling(r: f64, a: f64, b: f64) -> Jet {
    let j = rising(r, a, b);
    Jet {
        value: 1.0 - j.value,
        d1: -j.d1,
        d2: -j.d2,
    }
}

/// ψ_j ≡ 1 on x ≤ j/5 and ≡ 0 on x ≥ (j+1)/5; χ₁ = 1 − ψ₁; χ₀ ≡ 1 on
/// x ≥ 1/5 and ≡ 0 on x ≤ 1/10. Transitions are quintic smoothsteps in x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffFamily {
    x_cap: f64,
}

impl CutoffFamily {
    pub fn x_cap(&self) -> f64 {
        self.x_cap
    }

    pub fn r_cap(&self) -> f64 {
        self.x_cap.ln()
    }

    /// ψ_j for j in 1..=4.
    pub fn psi(&self, j: usize, r: f64) -> Jet {
        debug_assert!((1..=4).contains(&j));
        falling(r, 5.0, j as f64)
    }

    pub fn chi1(&self, r: f64) -> Jet {
        rising(r, 5.0, 1.0)
    }

    pub fn chi0(&self, r: f64) -> Jet {
        rising(r, 10.0, 1.0)
    }

    /// log of every x where some profile stops being polynomial in x.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![(0.1f64).ln()];
        b.extend((1..=5).map(|j| (j as f64 / 5.0).ln()));
        b.retain(|&r| r <= self.r_cap());
        b
    }
}

pub fn build_cutoffs(grid: &RadialGrid, x_cap: f64) -> Result<CutoffFamily> {
    if !(x_cap >= 1.0) || !x_cap.is_finite() {
        return Err(Error::InvariantViolation(format!("x_cap must be at least 1, got {x_cap}")));
    }
    if grid.r_min() > (0.2f64).ln() - CUTOFF_MARGIN {
        return Err(Error::GridTooNarrow {
            r_min: grid.r_min(),
            r_max: grid.r_max(),
            reason: "left end must lie a unit below log(1/5)",
        });
    }
    if grid.r_max() < x_cap.ln() - 1e-9 {
        return Err(Error::GridTooNarrow {
            r_min: grid.r_min(),
            r_max: grid.r_max(),
            reason: "right end must reach log(x_cap)",
        });
    }
    let fam = CutoffFamily { x_cap };
    for &r in grid.points() {
        let p: Vec<f64> = (1..=4).map(|j| fam.psi(j, r).value).collect();
        let nested = p[1] * p[0] == p[0] && p[2] * p[1] == p[1] && p[3] * p[2] == p[2];
        let x = r.exp();
        let chi_ok = x > x_cap || fam.chi1(r).value == 0.0 || fam.chi0(r).value == 1.0;
        if !nested || !chi_ok || fam.chi1(r).value + p[0] != 1.0 {
            return Err(Error::InvariantViolation(format!("cutoff nesting fails at r = {r}")));
        }
    }
    Ok(fam)
}

/// Sorted, merged list of all nodes the parametrix evaluates at, with the
/// Gauss fill between them.
#[derive(Debug, Clone)]
pub struct ParametrixLayout {
    grid: RadialGrid,
    cutoffs: CutoffFamily,
    order: usize,
    row_start: f64,
    nodes: Vec<f64>,
    node_weights: Vec<f64>,
    points: Vec<f64>,
    fill_weights: Vec<f64>,
    grid_at: Vec<usize>,
    node_at: Vec<usize>,
    row_start_at: usize,
    xi: Vec<f64>,
    chi0: Vec<Jet>,
    chi1: Vec<f64>,
    psi1: Vec<Jet>,
    psi2: Vec<Jet>,
}

#[derive(Clone, Copy)]
enum Tag {
    Grid(usize),
    Node(usize),
    Break,
}

impl ParametrixLayout {
    pub fn new(grid: &RadialGrid, cutoffs: &CutoffFamily) -> Result<Self> {
        Self::with_order(grid, cutoffs, 3)
    }

    pub fn with_order(grid: &RadialGrid, cutoffs: &CutoffFamily, order: usize) -> Result<Self> {
        let (gx, gw) = gauss_legendre(order)?;
        let r_cap = cutoffs.r_cap();
        if (grid.r_max() - r_cap).abs() > 1e-9 {
            return Err(Error::GridTooNarrow {
                r_min: grid.r_min(),
                r_max: grid.r_max(),
                reason: "grid must end at log(x_cap)",
            });
        }
        build_cutoffs(grid, cutoffs.x_cap())?;
        let row_start = (0.1f64).ln();
        let breaks = cutoffs.breakpoints();

        let mut bounds: Vec<f64> = grid.points().iter().copied().filter(|&r| r > row_start && r < r_cap).collect();
        bounds.extend(breaks.iter().copied().filter(|&r| r >= row_start));
        bounds.push(row_start);
        bounds.push(r_cap);
        bounds.sort_by(f64::total_cmp);
        bounds.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
        let mut nodes = Vec::new();
        let mut node_weights = Vec::new();
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, wt) in gx.iter().zip(gw) {
                nodes.push(c + h * x);
                node_weights.push(h * wt);
            }
        }

        let mut tagged: Vec<(f64, Tag)> = grid.points().iter().enumerate().map(|(j, &r)| (r, Tag::Grid(j))).collect();
        tagged.extend(nodes.iter().enumerate().map(|(q, &r)| (r, Tag::Node(q))));
        tagged.extend(breaks.iter().map(|&r| (r, Tag::Break)));
        tagged.sort_by(|a, b| a.0.total_cmp(&b.0));

        let (fx, fw) = gauss_legendre(FILL_ORDER)?;
        let mut points: Vec<f64> = Vec::with_capacity(tagged.len() * (FILL_ORDER + 1));
        let mut fill_weights = Vec::with_capacity(points.capacity());
        let mut grid_at = vec![0; grid.len()];
        let mut node_at = vec![0; nodes.len()];
        for (r, tag) in tagged {
            let last = points.last().copied();
            let merged = matches!(last, Some(p) if (r - p).abs() <= MERGE_TOL);
            if !merged {
                if let Some(p) = last {
                    let (c, h) = (0.5 * (p + r), 0.5 * (r - p));
                    for (x, wt) in fx.iter().zip(fw) {
                        points.push(c + h * x);
                        fill_weights.push(h * wt);
                    }
                }
                points.push(r);
                fill_weights.push(0.0);
            }
            let at = points.len() - 1;
            match tag {
                Tag::Grid(j) => grid_at[j] = at,
                Tag::Node(q) => node_at[q] = at,
                Tag::Break => {}
            }
        }
        let row_start_at = points
            .iter()
            .position(|&r| (r - row_start).abs() <= MERGE_TOL)
            .ok_or_else(|| Error::InvariantViolation("row start is not a knot".into()))?;
        let xi = points.iter().map(|&r| (0.5 * r).exp()).collect();
        let chi0 = points.iter().map(|&r| cutoffs.chi0(r)).collect();
        let chi1 = points.iter().map(|&r| cutoffs.chi1(r).value).collect();
        let psi1 = points.iter().map(|&r| cutoffs.psi(1, r)).collect();
        let psi2 = points.iter().map(|&r| cutoffs.psi(2, r)).collect();
        Ok(ParametrixLayout {
            grid: grid.clone(),
            cutoffs: *cutoffs,
            order,
            row_start,
            nodes,
            node_weights,
            points,
            fill_weights,
            grid_at,
            node_at,
            row_start_at,
            xi,
            chi0,
            chi1,
            psi1,
            psi2,
        })
    }

    /// Default grid, x_cap = e⁴, three Gauss nodes per panel.
    pub fn default_layout() -> Result<Self> {
        let grid = default_parametrix_grid();
        let cut = build_cutoffs(&grid, DEFAULT_R_CAP.exp())?;
        Self::new(&grid, &cut)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn cutoffs(&self) -> &CutoffFamily {
        &self.cutoffs
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Left end of the rows of K, log(1/10).
    pub fn row_start(&self) -> f64 {
        self.row_start
    }

    /// Gauss nodes on [log(1/10), R].
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    fn table_points(&self) -> &[f64] {
        &self.points
    }
}

/// Factors of the capped kernel G(r, t) = u(r_<) v(r_>), with
/// v = K − (K(R)/I(R)) I vanishing at R. Stored as mantissa and exponent.
struct CappedFactors {
    u: Vec<Complex64>,
    du: Vec<Complex64>,
    ue: Vec<f64>,
    v: Vec<Complex64>,
    dv: Vec<Complex64>,
    ve: Vec<f64>,
}

fn scaled(m: Complex64, e: f64) -> Complex64 {
    if m == ZERO {
        ZERO
    } else {
        m * e.exp()
    }
}

impl CappedFactors {
    fn new(k: Complex64, mu: f64, pts: &[f64]) -> Result<Self> {
        let t = ModeTable::on_points(k, mu, pts)?;
        let n = pts.len();
        let (im_r, ie_r) = t.increasing_factor(n - 1);
        let (km_r, ke_r) = t.decaying_factor(n - 1);
        let ratio = km_r / im_r;
        let mut f = CappedFactors {
            u: Vec::with_capacity(n),
            du: Vec::with_capacity(n),
            ue: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            dv: Vec::with_capacity(n),
            ve: Vec::with_capacity(n),
        };
        for i in 0..n {
            let (im, ie) = t.increasing_factor(i);
            let (km, ke) = t.decaying_factor(i);
            let (dim, dkm) = t.scaled_derivatives(i);
            let c = ratio * (ke_r - ie_r + ie - ke).exp();
            f.u.push(im);
            f.du.push(dim);
            f.ue.push(ie);
            if i == n - 1 {
                f.v.push(ZERO);
                f.dv.push(dkm - c * dim);
            } else {
                f.v.push(km - c * im);
                f.dv.push(dkm - c * dim);
            }
            f.ve.push(ke);
        }
        Ok(f)
    }

    fn kernel(&self, i: usize, j: usize) -> Complex64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        scaled(self.u[a] * self.v[b], self.ue[a] + self.ve[b])
    }

    /// ∂ in the first argument; the left branch on the diagonal.
    fn kernel_dr(&self, i: usize, j: usize) -> Complex64 {
        if i <= j {
            scaled(self.du[i] * self.v[j], self.ue[i] + self.ve[j])
        } else {
            scaled(self.u[j] * self.dv[i], self.ue[j] + self.ve[i])
        }
    }

    fn u_value(&self, i: usize) -> Complex64 {
        scaled(self.u[i], self.ue[i])
    }
}

/// Running integrals for the kernel of G_a M G_b with M = m0 + m1·∂.
struct Composition {
    /// ∫^x u_a M u_b, mantissa against e^{ue_a + ue_b}.
    f1: Vec<Complex64>,
    /// ∫^x v_a M u_b.
    f2: Vec<Complex64>,
    /// ∫_x^R v_a M v_b, mantissa against e^{ve_a + ve_b}.
    f3: Vec<Complex64>,
    /// ∫^x u_a M v_b.
    f4: Vec<Complex64>,
}

impl Composition {
    fn new(a: &CappedFactors, b: &CappedFactors, m0: &[f64], m1: &[f64], fill: &[f64]) -> Self {
        let n = fill.len();
        let mut f1 = vec![ZERO; n];
        let mut f2 = vec![ZERO; n];
        let mut f3 = vec![ZERO; n];
        let mut f4 = vec![ZERO; n];
        let active = |i: usize| fill[i] != 0.0 && (m0[i] != 0.0 || m1[i] != 0.0);
        let (mut s1, mut s2, mut s4) = (ZERO, ZERO, ZERO);
        for i in 0..n {
            if i > 0 && s1 != ZERO {
                s1 *= (a.ue[i - 1] + b.ue[i - 1] - a.ue[i] - b.ue[i]).exp();
            }
            if active(i) {
                let mub = m0[i] * b.u[i] + m1[i] * b.du[i];
                let mvb = m0[i] * b.v[i] + m1[i] * b.dv[i];
                s1 += fill[i] * a.u[i] * mub;
                s2 += fill[i] * scaled(a.v[i] * mub, a.ve[i] + b.ue[i]);
                s4 += fill[i] * scaled(a.u[i] * mvb, a.ue[i] + b.ve[i]);
            }
            f1[i] = s1;
            f2[i] = s2;
            f4[i] = s4;
        }
        let mut s3 = ZERO;
        for i in (0..n).rev() {
            if i + 1 < n && s3 != ZERO {
                s3 *= (a.ve[i + 1] + b.ve[i + 1] - a.ve[i] - b.ve[i]).exp();
            }
            if active(i) {
                let mvb = m0[i] * b.v[i] + m1[i] * b.dv[i];
                s3 += fill[i] * a.v[i] * mvb;
            }
            f3[i] = s3;
        }
        Composition { f1, f2, f3, f4 }
    }

    /// Kernel at knots (i, j); with `deriv`, its derivative in the first argument.
    fn eval(&self, a: &CappedFactors, b: &CappedFactors, i: usize, j: usize, deriv: bool) -> Complex64 {
        let (ua, va) = if deriv { (a.du[i], a.dv[i]) } else { (a.u[i], a.v[i]) };
        if i <= j {
            scaled(va * b.v[j] * self.f1[i], a.ve[i] + b.ve[j] + a.ue[i] + b.ue[i])
                + scaled(ua * b.v[j] * (self.f2[j] - self.f2[i]), a.ue[i] + b.ve[j])
                + scaled(ua * b.u[j] * self.f3[j], a.ue[i] + b.ue[j] + a.ve[j] + b.ve[j])
        } else {
            scaled(va * b.v[j] * self.f1[j], a.ve[i] + b.ve[j] + a.ue[j] + b.ue[j])
                + scaled(va * b.u[j] * (self.f4[i] - self.f4[j]), a.ve[i] + b.ue[j])
                + scaled(ua * b.u[j] * self.f3[i], a.ue[i] + b.ue[j] + a.ve[i] + b.ve[i])
        }
    }

    /// c with kernel(r_i, t) = u_b(t)·c for every t left of r_i and of the
    /// middle support.
    fn left_coefficient(&self, a: &CappedFactors, b: &CappedFactors, i: usize, deriv: bool) -> Complex64 {
        let (ua, va) = if deriv { (a.du[i], a.dv[i]) } else { (a.u[i], a.v[i]) };
        scaled(va * self.f4[i], a.ve[i]) + scaled(ua * self.f3[i], a.ue[i] + a.ve[i] + b.ve[i])
    }
}

fn order_of(n: usize, lambda: Complex64, mu: f64) -> Result<Complex64> {
    let k = lambda - 0.5 * n as f64;
    if k.re <= CONTINUATION_RE_K_MIN {
        return Err(Error::ContinuationOutOfRange {
            re_k: k.re,
            bound: CONTINUATION_RE_K_MIN,
        });
    }
    check_order(k, mu)?;
    Ok(k)
}

fn check_pair(n: usize, lambda: Complex64, z: Complex64) -> Result<()> {
    if z.re < 0.5 * n as f64 - 1e-12 {
        return Err(Error::InvariantViolation(format!("Re z = {} is below n/2", z.re)));
    }
    if lambda.im.abs() < 1.0 || z.im.abs() < 1.0 {
        return Err(Error::InvariantViolation("|Im λ| and |Im z| must be at least 1".into()));
    }
    Ok(())
}

fn weight_active(weight: &WeightFunction) -> Result<bool> {
    match weight {
        WeightFunction::HalfPower => Ok(true),
        WeightFunction::Vanishing => Ok(false),
        WeightFunction::Cutoff => Err(Error::SupportViolation(
            "the parametrix weight must be x^(1/2) on the whole truncated line".into(),
        )),
    }
}

/// All kernels needed for one (λ, z, μ).
struct ModeKernels {
    lam: CappedFactors,
    z: CappedFactors,
    l0: CappedFactors,
    kl: Complex64,
    kz: Complex64,
    c0: Composition,
    d1: Composition,
    d2: Composition,
    /// Λ − Z.
    gap: Complex64,
    /// Λ₀ − Λ.
    gap0: Complex64,
}

impl ModeKernels {
    fn new(n: usize, lambda: Complex64, z: Complex64, lam0: Complex64, mu: f64, layout: &ParametrixLayout) -> Result<Self> {
        let kl = order_of(n, lambda, mu)?;
        let kz = order_of(n, z, mu)?;
        let k0 = order_of(n, lam0, mu)?;
        if k0.re <= 0.0 {
            return Err(Error::InvariantViolation("λ₀ must lie on the physical sheet".into()));
        }
        let pts = layout.table_points();
        let lam = CappedFactors::new(kl, mu, pts)?;
        let zf = CappedFactors::new(kz, mu, pts)?;
        let l0 = CappedFactors::new(k0, mu, pts)?;
        let zeros = vec![0.0; pts.len()];
        let q0: Vec<f64> = layout.psi1.iter().map(|j| j.d2).collect();
        let q1: Vec<f64> = layout.psi1.iter().map(|j| 2.0 * j.d1).collect();
        let c0 = Composition::new(&l0, &zf, &layout.chi1, &zeros, &layout.fill_weights);
        let d1 = Composition::new(&lam, &lam, &q0, &q1, &layout.fill_weights);
        let d2 = Composition::new(&lam, &zf, &q0, &q1, &layout.fill_weights);
        Ok(ModeKernels {
            lam,
            z: zf,
            l0,
            kl,
            kz,
            c0,
            d1,
            d2,
            gap: kz * kz - kl * kl,
            gap0: kl * kl - k0 * k0,
        })
    }

    /// (Λ − Z) R(λ)ψ₁R(z) at knots, and its first-argument derivative.
    fn delta(&self, layout: &ParametrixLayout, i: usize, j: usize) -> (Complex64, Complex64) {
        let mut d = self.d1.eval(&self.lam, &self.lam, i, j, false) - self.d2.eval(&self.lam, &self.z, i, j, false);
        let mut dd = self.d1.eval(&self.lam, &self.lam, i, j, true) - self.d2.eval(&self.lam, &self.z, i, j, true);
        let p = layout.psi1[i];
        if p.value != 0.0 || p.d1 != 0.0 {
            let g = self.lam.kernel(i, j) - self.z.kernel(i, j);
            let dg = self.lam.kernel_dr(i, j) - self.z.kernel_dr(i, j);
            d += p.value * g;
            dd += p.d1 * g + p.value * dg;
        }
        (d, dd)
    }

    /// Kernel of K(λ, z) at knots, x^{1/2} weights included.
    fn k_entry(&self, layout: &ParametrixLayout, i: usize, j: usize) -> Complex64 {
        let ch = layout.chi0[i];
        let ps = layout.psi2[i];
        let mut acc = ZERO;
        if ch.value != 0.0 || !ch.is_flat() {
            let c = self.c0.eval(&self.l0, &self.z, i, j, false);
            let dc = self.c0.eval(&self.l0, &self.z, i, j, true);
            acc += self.gap * (-ch.d2 * c - 2.0 * ch.d1 * dc + self.gap0 * ch.value * c);
        }
        if !ps.is_flat() {
            let (d, dd) = self.delta(layout, i, j);
            acc += -ps.d2 * d - 2.0 * ps.d1 * dd;
        }
        acc * (layout.xi[j] / layout.xi[i])
    }

    /// Kernel of K₁(λ, z) at knots.
    fn k1_entry(&self, layout: &ParametrixLayout, i: usize, j: usize) -> Complex64 {
        let mut acc = self.z.kernel(i, j);
        let ps = layout.psi2[i].value;
        if ps != 0.0 {
            acc += ps * self.delta(layout, i, j).0;
        }
        let ch = layout.chi0[i].value;
        if ch != 0.0 {
            acc += self.gap * ch * self.c0.eval(&self.l0, &self.z, i, j, false);
        }
        acc * (layout.xi[i] * layout.xi[j])
    }

    /// Rows of K against columns left of log(1/10), in the form
    /// K(s, t) = x^{-1/2}(s) x^{1/2}(t) [α(s) u_z(t) + β(s) u_λ(t)].
    fn left_coefficients(&self, layout: &ParametrixLayout, i: usize) -> (Complex64, Complex64) {
        let ch = layout.chi0[i];
        let ps = layout.psi2[i];
        let (mut alpha, mut beta) = (ZERO, ZERO);
        if ch.value != 0.0 || !ch.is_flat() {
            let c = self.c0.left_coefficient(&self.l0, &self.z, i, false);
            let dc = self.c0.left_coefficient(&self.l0, &self.z, i, true);
            alpha += self.gap * (-ch.d2 * c - 2.0 * ch.d1 * dc + self.gap0 * ch.value * c);
        }
        if !ps.is_flat() {
            let c1 = self.d1.left_coefficient(&self.lam, &self.lam, i, false);
            let dc1 = self.d1.left_coefficient(&self.lam, &self.lam, i, true);
            let c2 = self.d2.left_coefficient(&self.lam, &self.z, i, false);
            let dc2 = self.d2.left_coefficient(&self.lam, &self.z, i, true);
            beta += -ps.d2 * c1 - 2.0 * ps.d1 * dc1;
            alpha -= -ps.d2 * c2 - 2.0 * ps.d1 * dc2;
        }
        let s = 1.0 / layout.xi[i];
        (alpha * s, beta * s)
    }

    /// Gram matrix of x^{1/2}u_z and x^{1/2}u_λ on (−∞, log(1/10)], the part
    /// below the grid taken from the leading power e^{kt}.
    fn left_gram(&self, layout: &ParametrixLayout) -> [[Complex64; 2]; 2] {
        let f = [&self.z, &self.lam];
        let ks = [self.kz, self.kl];
        let mut g = [[ZERO; 2]; 2];
        let x0 = layout.points[0];
        for a in 0..2 {
            for b in 0..2 {
                let mut s = f[a].u_value(0) * f[b].u_value(0).conj() * x0.exp() / (1.0 + ks[a] + ks[b].conj());
                for p in 0..layout.row_start_at {
                    let w = layout.fill_weights[p];
                    if w != 0.0 {
                        s += w * f[a].u_value(p) * f[b].u_value(p).conj() * layout.points[p].exp();
                    }
                }
                g[a][b] = s;
            }
        }
        g
    }
}

/// Lower-triangular L with L Lᴴ = g for a Hermitian positive semidefinite 2×2 g.
fn gram_root(g: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let a = g[0][0].re.max(0.0);
    let d = g[1][1].re.max(0.0);
    if a == 0.0 {
        return [[ZERO, ZERO], [ZERO, Complex64::new(d.sqrt(), 0.0)]];
    }
    let l00 = a.sqrt();
    let l10 = g[1][0] / l00;
    let l11 = (d - l10.norm_sqr()).max(0.0).sqrt();
    [[Complex64::new(l00, 0.0), ZERO], [l10, Complex64::new(l11, 0.0)]]
}

/// Weighted matrices of K(λ, z) for one mode.
#[derive(Debug, Clone)]
pub struct KOperator {
    /// √ω K √ω on the Gauss nodes.
    pub square: Mat<Complex64>,
    /// √ω K √w from the Gauss nodes to the base grid.
    pub grid_columns: Mat<Complex64>,
    /// Two extra columns F with F Fᴴ equal to the Gram of the rows of K
    /// restricted to columns left of log(1/10).
    pub left_factor: Mat<Complex64>,
}

impl KOperator {
    fn norm_matrix(&self) -> Mat<Complex64> {
        let m = self.square.nrows();
        Mat::from_fn(m, m + 2, |i, j| {
            if j < m {
                self.square[(i, j)]
            } else {
                self.left_factor[(i, j - m)]
            }
        })
    }

    /// Operator norm on L²(−∞, R].
    pub fn norm(&self) -> Result<f64> {
        spectral_norm(&self.norm_matrix())
    }

    /// Frobenius norm, an upper bound for [`KOperator::norm`].
    pub fn frobenius_bound(&self) -> f64 {
        let s: f64 = self.square.col_iter().flat_map(|c| c.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>()).sum();
        let l: f64 = self.left_factor.col_iter().flat_map(|c| c.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>()).sum();
        (s + l).sqrt()
    }
}

/// Weighted matrices of K₁(λ, z) for one mode, rows on the base grid.
#[derive(Debug, Clone)]
pub struct K1Operator {
    pub node_columns: Mat<Complex64>,
    pub grid_columns: Mat<Complex64>,
}

fn frobenius(m: &Mat<Complex64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn spectral_norm(m: &Mat<Complex64>) -> Result<f64> {
    crate::linalg::largest_singular_value(m)
}

fn assemble_k(mk: &ModeKernels, layout: &ParametrixLayout, with_grid: bool) -> KOperator {
    let nq = layout.nodes.len();
    let sw: Vec<f64> = layout.node_weights.iter().map(|w| w.sqrt()).collect();
    let square = Mat::from_fn(nq, nq, |a, b| {
        sw[a] * sw[b] * mk.k_entry(layout, layout.node_at[a], layout.node_at[b])
    });
    let grid_columns = if with_grid {
        let gw: Vec<f64> = layout.grid.weights().iter().map(|w| w.sqrt()).collect();
        Mat::from_fn(nq, layout.grid.len(), |a, j| {
            sw[a] * gw[j] * mk.k_entry(layout, layout.node_at[a], layout.grid_at[j])
        })
    } else {
        Mat::zeros(nq, 0)
    };
    let root = gram_root(mk.left_gram(layout));
    let mut left_factor = Mat::zeros(nq, 2);
    for a in 0..nq {
        let (al, be) = mk.left_coefficients(layout, layout.node_at[a]);
        for c in 0..2 {
            left_factor[(a, c)] = sw[a] * (al * root[0][c] + be * root[1][c]);
        }
    }
    KOperator {
        square,
        grid_columns,
        left_factor,
    }
}

fn assemble_k1(mk: &ModeKernels, layout: &ParametrixLayout) -> K1Operator {
    let ng = layout.grid.len();
    let nq = layout.nodes.len();
    let gw: Vec<f64> = layout.grid.weights().iter().map(|w| w.sqrt()).collect();
    let sw: Vec<f64> = layout.node_weights.iter().map(|w| w.sqrt()).collect();
    K1Operator {
        node_columns: Mat::from_fn(ng, nq, |j, b| {
            gw[j] * sw[b] * mk.k1_entry(layout, layout.grid_at[j], layout.node_at[b])
        }),
        grid_columns: Mat::from_fn(ng, ng, |j, l| {
            gw[j] * gw[l] * mk.k1_entry(layout, layout.grid_at[j], layout.grid_at[l])
        }),
    }
}

fn zero_k(layout: &ParametrixLayout) -> KOperator {
    let nq = layout.nodes.len();
    KOperator {
        square: Mat::zeros(nq, nq),
        grid_columns: Mat::zeros(nq, layout.grid.len()),
        left_factor: Mat::zeros(nq, 2),
    }
}

/// Both weighted operators for one mode, sharing the kernel tables.
pub fn build_pair(
    n: usize,
    lambda: Complex64,
    z: Complex64,
    lam0: Complex64,
    mu: f64,
    layout: &ParametrixLayout,
    weight: &WeightFunction,
) -> Result<(KOperator, K1Operator)> {
    check_pair(n, lambda, z)?;
    if !weight_active(weight)? {
        let ng = layout.grid.len();
        return Ok((
            zero_k(layout),
            K1Operator {
                node_columns: Mat::zeros(ng, layout.nodes.len()),
                grid_columns: Mat::zeros(ng, ng),
            },
        ));
    }
    let mk = ModeKernels::new(n, lambda, z, lam0, mu, layout)?;
    Ok((assemble_k(&mk, layout, true), assemble_k1(&mk, layout)))
}

/// K(λ, z) = (Λ − Z) x^{−1/2} L_R(λ) R(z) x^{1/2} for one mode.
pub fn build_k(
    n: usize,
    lambda: Complex64,
    z: Complex64,
    lam0: Complex64,
    mu: f64,
    layout: &ParametrixLayout,
    weight: &WeightFunction,
) -> Result<KOperator> {
    check_pair(n, lambda, z)?;
    if !weight_active(weight)? {
        return Ok(zero_k(layout));
    }
    let mk = ModeKernels::new(n, lambda, z, lam0, mu, layout)?;
    Ok(assemble_k(&mk, layout, true))
}

/// K₁(λ, z) = x^{1/2} R(z) x^{1/2} + (Λ − Z) x^{1/2} E_R(λ) R(z) x^{1/2}.
pub fn build_k1(
    n: usize,
    lambda: Complex64,
    z: Complex64,
    lam0: Complex64,
    mu: f64,
    layout: &ParametrixLayout,
    weight: &WeightFunction,
) -> Result<K1Operator> {
    build_pair(n, lambda, z, lam0, mu, layout, weight).map(|p| p.1)
}

/// ‖K(λ, z)‖ alone, without the columns on the base grid.
pub fn k_norm(n: usize, lambda: Complex64, z: Complex64, mu: f64, layout: &ParametrixLayout) -> Result<f64> {
    check_pair(n, lambda, z)?;
    let mk = ModeKernels::new(n, lambda, z, lambda0(n), mu, layout)?;
    assemble_k(&mk, layout, false).norm()
}

/// Largest ‖K(λ, z)‖ over the first `modes` entries of the spectrum. SVDs are
/// skipped for modes whose Frobenius bound cannot raise the maximum.
pub fn k_norm_over_modes(
    lambda: Complex64,
    z: Complex64,
    spectrum: &CrossSectionSpectrum,
    modes: usize,
    layout: &ParametrixLayout,
) -> Result<f64> {
    let n = spectrum.n();
    check_pair(n, lambda, z)?;
    let mut best = 0.0f64;
    for e in spectrum.entries().iter().take(modes) {
        let mk = ModeKernels::new(n, lambda, z, lambda0(n), e.mu(), layout)?;
        let k = assemble_k(&mk, layout, false);
        let bound = k.frobenius_bound();
        if bound <= best {
            log::debug!("mode mu = {}: Frobenius bound {bound:.3e} below running max {best:.3e}, SVD skipped", e.mu());
            continue;
        }
        best = best.max(k.norm()?);
    }
    Ok(best)
}

/// Returns K₁(1 + K)^{−1} and ‖K‖₂.
pub fn neumann_reconstruct(k: &Mat<Complex64>, k1: &Mat<Complex64>) -> Result<(Mat<Complex64>, f64)> {
    let m = k.nrows();
    if k.ncols() != m || k1.ncols() != m {
        return Err(Error::InvariantViolation(format!(
            "shape mismatch: K is {}x{}, K1 is {}x{}",
            k.nrows(),
            k.ncols(),
            k1.nrows(),
            k1.ncols()
        )));
    }
    let norm = spectral_norm(k)?;
    if !(norm < 1.0) {
        return Err(Error::NotInvertible { norm });
    }
    if norm > EVIDENCE_MAX {
        log::warn!("||K|| = {norm:.4} exceeds 1/2; Neumann cross-check skipped");
    }
    if m == 0 {
        return Ok((k1.clone(), norm));
    }
    // X (1 + K) = K₁  ⇔  (1 + K)ᵀ Xᵀ = K₁ᵀ
    let at = Mat::from_fn(m, m, |i, j| k[(j, i)] + if i == j { 1.0 } else { 0.0 });
    let lu = at.partial_piv_lu();
    let rhs = k1.transpose().to_owned();
    let xt = faer::linalg::solvers::Solve::solve(&lu, &rhs);
    let x = xt.transpose().to_owned();
    if norm <= EVIDENCE_MAX && k1.nrows() > 0 {
        let mut worst = 0.0f64;
        let rows = k1.nrows();
        for &r in &[0, rows / 2, rows - 1] {
            let mut term: Vec<Complex64> = (0..m).map(|j| k1[(r, j)]).collect();
            let mut acc = term.clone();
            for _ in 0..400 {
                let next: Vec<Complex64> = (0..m).map(|j| -(0..m).map(|i| term[i] * k[(i, j)]).sum::<Complex64>()).collect();
                term = next;
                let tn: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a += t;
                }
                let an: f64 = acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if tn <= 1e-16 * an.max(f64::MIN_POSITIVE) {
                    break;
                }
            }
            let scale: f64 = acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let diff: f64 = acc.iter().enumerate().map(|(j, a)| (a - x[(r, j)]).norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(diff / scale);
        }
        log::debug!("Neumann partial sums vs direct solve: relative difference {worst:.2e}");
        if worst > 1e-8 {
            return Err(Error::InvariantViolation(format!(
                "Neumann partial sums disagree with the direct solve by {worst:.2e}"
            )));
        }
    }
    Ok((x, norm))
}

/// Weighted x^{1/2}R(λ)x^{1/2} on the base grid recovered from K and K₁.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub matrix: Mat<Complex64>,
    pub k_norm: f64,
}

pub fn reconstruct(k: &KOperator, k1: &K1Operator) -> Result<Reconstruction> {
    let (y, k_norm) = neumann_reconstruct(&k.square, &k1.node_columns)?;
    let matrix = &k1.grid_columns - &y * &k.grid_columns;
    Ok(Reconstruction { matrix, k_norm })
}

/// √w x^{1/2} R(λ) x^{1/2} √w on the base grid (rows) against the base grid
/// and the Gauss nodes (columns), from the capped kernel directly.
pub fn exact_weighted_resolvent(
    n: usize,
    lambda: Complex64,
    mu: f64,
    layout: &ParametrixLayout,
) -> Result<(Mat<Complex64>, Mat<Complex64>)> {
    let k = order_of(n, lambda, mu)?;
    let f = CappedFactors::new(k, mu, layout.table_points())?;
    let gw: Vec<f64> = layout.grid.weights().iter().map(|w| w.sqrt()).collect();
    let sw: Vec<f64> = layout.node_weights.iter().map(|w| w.sqrt()).collect();
    let xi = &layout.xi;
    let ga = &layout.grid_at;
    let na = &layout.node_at;
    let grid = Mat::from_fn(ga.len(), ga.len(), |i, j| gw[i] * gw[j] * xi[ga[i]] * xi[ga[j]] * f.kernel(ga[i], ga[j]));
    let nodes = Mat::from_fn(ga.len(), na.len(), |i, q| gw[i] * sw[q] * xi[ga[i]] * xi[na[q]] * f.kernel(ga[i], na[q]));
    Ok((grid, nodes))
}

/// ‖ρR(λ)ρ(1 + K) − K₁‖ / ‖K₁‖ in the Frobenius norm of the weighted matrices.
pub fn identity_residual(
    n: usize,
    lambda: Complex64,
    mu: f64,
    k: &KOperator,
    k1: &K1Operator,
    layout: &ParametrixLayout,
) -> Result<f64> {
    let (xg, xq) = exact_weighted_resolvent(n, lambda, mu, layout)?;
    let rn = &xq + &xq * &k.square - &k1.node_columns;
    let rg = &xg + &xq * &k.grid_columns - &k1.grid_columns;
    let num = (frobenius(&rn).powi(2) + frobenius(&rg).powi(2)).sqrt();
    let den = (frobenius(&k1.node_columns).powi(2) + frobenius(&k1.grid_columns).powi(2)).sqrt();
    if den == 0.0 {
        return Ok(num);
    }
    Ok(num / den)
}

/// Frobenius distance between two weighted matrices relative to the second.
pub fn relative_difference(a: &Mat<Complex64>, b: &Mat<Complex64>) -> f64 {
    let d = a - b;
    frobenius(&d) / frobenius(b).max(f64::MIN_POSITIVE)
}

/// Kernel values (unweighted) of x^{1/2}(R(λ) − R(z))x^{1/2}/(Λ − Z) on the base grid.
pub fn divided_difference(
    n: usize,
    lambda: Complex64,
    z: Complex64,
    mu: f64,
    layout: &ParametrixLayout,
    weight: &WeightFunction,
) -> Result<Mat<Complex64>> {
    let kl = order_of(n, lambda, mu)?;
    let kz = order_of(n, z, mu)?;
    let gap = kz * kz - kl * kl;
    if gap.norm() < DIVIDED_DIFFERENCE_MIN_GAP {
        return Err(Error::NearDiagonalDividedDifference { gap: gap.norm() });
    }
    let ng = layout.grid.len();
    if !weight_active(weight)? {
        return Ok(Mat::zeros(ng, ng));
    }
    let fl = CappedFactors::new(kl, mu, layout.table_points())?;
    let fz = CappedFactors::new(kz, mu, layout.table_points())?;
    let ga = &layout.grid_at;
    let xi = &layout.xi;
    Ok(Mat::from_fn(ng, ng, |i, j| {
        xi[ga[i]] * xi[ga[j]] * (fl.kernel(ga[i], ga[j]) - fz.kernel(ga[i], ga[j])) / gap
    }))
}

/// ∂/∂Λ of x^{1/2}R(λ)x^{1/2} on the base grid by a Cauchy integral in k,
/// the limit of [`divided_difference`] as z → λ.
pub fn resolvent_lambda_derivative(
    n: usize,
    lambda: Complex64,
    mu: f64,
    layout: &ParametrixLayout,
    weight: &WeightFunction,
) -> Result<Mat<Complex64>> {
    const SAMPLES: usize = 16;
    let k = order_of(n, lambda, mu)?;
    let ng = layout.grid.len();
    if !weight_active(weight)? {
        return Ok(Mat::zeros(ng, ng));
    }
    let radius = (0.5 * (k.re - CONTINUATION_RE_K_MIN)).min(0.5 * k.norm()).min(0.05);
    let ga = &layout.grid_at;
    let xi = &layout.xi;
    let mut dk = Mat::<Complex64>::zeros(ng, ng);
    for s in 0..SAMPLES {
        let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * s as f64 / SAMPLES as f64);
        let f = CappedFactors::new(k + radius * phase, mu, layout.table_points())?;
        let c = phase.conj() / (radius * SAMPLES as f64);
        for j in 0..ng {
            for i in 0..ng {
                dk[(i, j)] += c * f.kernel(ga[i], ga[j]);
            }
        }
    }
    // Λ = n²/4 − k², so ∂/∂Λ = −(2k)^{-1} ∂/∂k
    let s = -1.0 / (2.0 * k);
    Ok(Mat::from_fn(ng, ng, |i, j| s * xi[ga[i]] * xi[ga[j]] * dk[(i, j)]))
}

/// Divided difference, or the Λ-derivative when |Λ − Z| is below the threshold.
pub fn divided_difference_or_derivative(
    n: usize,
    lambda: Complex64,
    z: Complex64,
    mu: f64,
    layout: &ParametrixLayout,
    weight: &WeightFunction,
) -> Result<Mat<Complex64>> {
    match divided_difference(n, lambda, z, mu, layout, weight) {
        Err(Error::NearDiagonalDividedDifference { gap }) => {
            log::debug!("|Lambda - Z| = {gap:.2e}: using the Cauchy-integral derivative");
            resolvent_lambda_derivative(n, lambda, mu, layout, weight)
        }
        other => other,
    }
}

/// Kernel values of a parametrix E and its remainder L on the base grid.
#[derive(Debug, Clone)]
pub struct ParametrixKernels {
    pub e: Mat<Complex64>,
    pub l: Mat<Complex64>,
}

/// E_R = ψ₂R(λ)ψ₁ + χ₀R(λ₀)χ₁ and L_R with (P − Λ)E_R = 1 + L_R.
pub fn right_parametrix(n: usize, lambda: Complex64, mu: f64, layout: &ParametrixLayout) -> Result<ParametrixKernels> {
    let (fl, f0, gap0) = parametrix_factors(n, lambda, mu, layout)?;
    let ga = &layout.grid_at;
    let ng = ga.len();
    let e = Mat::from_fn(ng, ng, |i, j| {
        let (p, q) = (ga[i], ga[j]);
        layout.psi2[p].value * fl.kernel(p, q) * layout.psi1[q].value
            + layout.chi0[p].value * f0.kernel(p, q) * layout.chi1[q]
    });
    let l = Mat::from_fn(ng, ng, |i, j| {
        let (p, q) = (ga[i], ga[j]);
        let (s2, c0) = (layout.psi2[p], layout.chi0[p]);
        let mut acc = ZERO;
        if layout.psi1[q].value != 0.0 && !s2.is_flat() {
            acc += (-s2.d2 * fl.kernel(p, q) - 2.0 * s2.d1 * fl.kernel_dr(p, q)) * layout.psi1[q].value;
        }
        if layout.chi1[q] != 0.0 {
            acc += (-c0.d2 * f0.kernel(p, q) - 2.0 * c0.d1 * f0.kernel_dr(p, q) + gap0 * c0.value * f0.kernel(p, q))
                * layout.chi1[q];
        }
        acc
    });
    Ok(ParametrixKernels { e, l })
}

/// E_L = ψ₁R(λ)ψ₂ + χ₁R(λ₀)χ₀ and L_L with E_L(P − Λ) = 1 + L_L,
/// L_L = ψ₁R(λ)[ψ₂, P] + χ₁R(λ₀)[χ₀, P] + (Λ₀ − Λ)χ₁R(λ₀)χ₀.
pub fn left_parametrix(n: usize, lambda: Complex64, mu: f64, layout: &ParametrixLayout) -> Result<ParametrixKernels> {
    let (fl, f0, gap0) = parametrix_factors(n, lambda, mu, layout)?;
    let ga = &layout.grid_at;
    let ng = ga.len();
    let e = Mat::from_fn(ng, ng, |i, j| {
        let (p, q) = (ga[i], ga[j]);
        layout.psi1[p].value * fl.kernel(p, q) * layout.psi2[q].value
            + layout.chi1[p] * f0.kernel(p, q) * layout.chi0[q].value
    });
    // [m, P]g = m''g + 2m'g'; moved onto the kernel by parts
    let l = Mat::from_fn(ng, ng, |i, j| {
        let (p, q) = (ga[i], ga[j]);
        let (s2, c0) = (layout.psi2[q], layout.chi0[q]);
        let mut acc = ZERO;
        if layout.psi1[p].value != 0.0 && !s2.is_flat() {
            acc += layout.psi1[p].value * (-s2.d2 * fl.kernel(p, q) - 2.0 * s2.d1 * fl.kernel_dr(q, p));
        }
        if layout.chi1[p] != 0.0 {
            acc += layout.chi1[p]
                * (-c0.d2 * f0.kernel(p, q) - 2.0 * c0.d1 * f0.kernel_dr(q, p) + gap0 * c0.value * f0.kernel(p, q));
        }
        acc
    });
    Ok(ParametrixKernels { e, l })
}

fn parametrix_factors(
    n: usize,
    lambda: Complex64,
    mu: f64,
    layout: &ParametrixLayout,
) -> Result<(CappedFactors, CappedFactors, Complex64)> {
    let kl = order_of(n, lambda, mu)?;
    let k0 = order_of(n, lambda0(n), mu)?;
    let fl = CappedFactors::new(kl, mu, layout.table_points())?;
    let f0 = CappedFactors::new(k0, mu, layout.table_points())?;
    Ok((fl, f0, kl * kl - k0 * k0))
}

/// w(s) = ½C^{−1}e^{−Cs}.
pub fn band_width(c: f64, s: f64) -> f64 {
    0.5 / c * (-c * s).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceTriple {
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub re_z: f64,
    pub im_z: f64,
    #[serde(rename = "K_norm")]
    pub k_norm: f64,
}

/// Band {|Im λ| ≥ C₂, Re λ > n/2 − ½C₁^{−1}e^{−C₁|Im λ|}} with its evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCertificate {
    pub n: usize,
    #[serde(rename = "fitted_C")]
    pub fitted_c: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub width_formula: String,
    pub evidence: Vec<EvidenceTriple>,
}

impl RegionCertificate {
    pub fn width(&self, s: f64) -> f64 {
        band_width(self.c1, s.abs())
    }

    pub fn contains(&self, lambda: Complex64) -> bool {
        lambda.im.abs() >= self.c2 && 0.5 * self.n as f64 - lambda.re < self.width(lambda.im)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifySettings {
    pub im_range: (f64, f64),
    pub samples: usize,
    /// Number of spectrum entries whose modes enter the supremum.
    pub modes: usize,
    /// Horizontal offset used to measure the slope c(s) of ‖K‖.
    pub slope_eps: f64,
    /// Target ‖K‖ at the band edge, as a fraction of 1/2, in the slope model.
    pub safety: f64,
}

impl Default for CertifySettings {
    fn default() -> Self {
        CertifySettings {
            im_range: (2.0, 20.0),
            samples: 10,
            modes: 12,
            slope_eps: 1e-3,
            safety: 0.8,
        }
    }
}

/// Smallest C with C·e^{C·s} ≥ target.
fn solve_c_exp(target: f64, s: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let f = |c: f64| c * (c * s).exp() - target;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Slopes c(s) = ‖K(n/2 − ε + is, n/2 + is)‖/ε.
pub fn measure_slopes(
    spectrum: &CrossSectionSpectrum,
    ims: &[f64],
    eps: f64,
    modes: usize,
    layout: &ParametrixLayout,
) -> Result<Vec<f64>> {
    let half = 0.5 * spectrum.n() as f64;
    ims.iter()
        .map(|&s| {
            let z = Complex64::new(half, s);
            let c = k_norm_over_modes(z - eps, z, spectrum, modes, layout)? / eps;
            log::info!("slope at s = {s}: c = {c:.4e}");
            Ok(c)
        })
        .collect()
}

/// Builds the band from the fitted constant and the measured slopes, then
/// verifies ‖K‖ ≤ 1/2 at the band edge for each sampled s.
pub fn certify_region(
    scan: &NormScan,
    fitted_c: f64,
    spectrum: &CrossSectionSpectrum,
    layout: &ParametrixLayout,
    settings: &CertifySettings,
) -> Result<RegionCertificate> {
    if scan.is_empty() {
        return Err(Error::EmptyScan);
    }
    let (lo, hi) = settings.im_range;
    if settings.samples == 0 || !(lo >= 1.0) || !(hi >= lo) {
        return Err(Error::InvariantViolation(format!(
            "bad certificate range [{lo}, {hi}] with {} samples",
            settings.samples
        )));
    }
    if !(fitted_c >= 0.0) || !fitted_c.is_finite() {
        return Err(Error::InvariantViolation(format!("fitted C = {fitted_c} is not a finite nonnegative number")));
    }
    if !(settings.safety > 0.0 && settings.safety <= 1.0) || !(settings.slope_eps > 0.0) {
        return Err(Error::InvariantViolation("safety must lie in (0, 1] and slope_eps be positive".into()));
    }
    let n = spectrum.n();
    let half = 0.5 * n as f64;
    if scan.samples.iter().any(|s| (s.lambda.re - half).abs() > 1e-9) {
        return Err(Error::InvariantViolation("scan must lie on the critical line Re λ = n/2".into()));
    }
    let smin = scan.samples.iter().map(|s| s.lambda.im.abs()).fold(f64::INFINITY, f64::min);
    let smax = scan.samples.iter().map(|s| s.lambda.im.abs()).fold(0.0, f64::max);
    if smin > lo + 1e-9 || smax < hi - 1e-9 {
        return Err(Error::InvariantViolation(format!(
            "scan covers |Im λ| in [{smin}, {smax}], not [{lo}, {hi}]"
        )));
    }
    let ims = linspace(lo, hi, settings.samples);
    let slopes = measure_slopes(spectrum, &ims, settings.slope_eps, settings.modes, layout)?;
    let c_slope = ims
        .iter()
        .zip(&slopes)
        .map(|(&s, &c)| solve_c_exp(c / settings.safety, s))
        .fold(0.0, f64::max);
    // keep the band edge inside the continuation strip Re k > −1/4
    let c_strip = solve_c_exp(4.0, lo);
    let c1 = fitted_c.max(c_slope).max(c_strip);
    log::info!("certificate constant: fitted {fitted_c:.4}, slope {c_slope:.4}, strip {c_strip:.4} -> C = {c1:.4}");
    let mut evidence = Vec::with_capacity(ims.len());
    for &s in &ims {
        let z = Complex64::new(half, s);
        let lambda = Complex64::new(half - band_width(c1, s), s);
        let k_norm = k_norm_over_modes(lambda, z, spectrum, settings.modes, layout)?;
        log::info!("evidence at s = {s}: lambda = {lambda}, ||K|| = {k_norm:.4e}");
        if k_norm > EVIDENCE_MAX {
            return Err(Error::EvidenceFailure {
                re_lambda: lambda.re,
                im_lambda: lambda.im,
                k_norm,
            });
        }
        evidence.push(EvidenceTriple {
            re_lambda: lambda.re,
            im_lambda: lambda.im,
            re_z: z.re,
            im_z: z.im,
            k_norm,
        });
    }
    Ok(RegionCertificate {
        n,
        fitted_c,
        c1,
        c2: lo,
        width_formula: "0.5/C*exp(-C*s)".into(),
        evidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSample {
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub mu: f64,
    pub rel_error: f64,
    pub k_norm: f64,
}

/// Reconstructs the weighted resolvent halfway into the band at every
/// evidence height and compares it with the capped kernel continued directly.
pub fn reconstruction_check(
    cert: &RegionCertificate,
    spectrum: &CrossSectionSpectrum,
    modes: usize,
    layout: &ParametrixLayout,
) -> Result<Vec<ReconstructionSample>> {
    let n = spectrum.n();
    let half = 0.5 * n as f64;
    let mut out = Vec::new();
    for ev in &cert.evidence {
        let s = ev.im_z;
        let z = Complex64::new(half, s);
        let lambda = Complex64::new(half - 0.5 * cert.width(s), s);
        for e in spectrum.entries().iter().take(modes) {
            let (k, k1) = build_pair(n, lambda, z, lambda0(n), e.mu(), layout, &WeightFunction::HalfPower)?;
            let rec = reconstruct(&k, &k1)?;
            let (exact, _) = exact_weighted_resolvent(n, lambda, e.mu(), layout)?;
            let rel_error = relative_difference(&rec.matrix, &exact);
            log::info!("reconstruction at {lambda}, mu = {}: rel error {rel_error:.2e}", e.mu());
            out.push(ReconstructionSample {
                re_lambda: lambda.re,
                im_lambda: lambda.im,
                mu: e.mu(),
                rel_error,
                k_norm: rec.k_norm,
            });
        }
    }
    Ok(out)
}
