use std::path::Path;

use anyhow::{bail, Context};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resonance_core::bessel::{bessel_i, bessel_k, BesselOrder};
use resonance_core::hyperbolic_space::{
    decay_scan, distance_grid, fit_power_law, huygens_defect, laplace_resolvent_check, radial_wave_solve,
    GaussianBump, LaplaceSettings, RadialProfile, RadialScanSettings, RadialWave, SmoothBump,
};
use resonance_core::metric_check::{check_conditions, WarpedMetricFamily};
use resonance_core::mode_resolvent::{green_kernel_mode, SpectralPoint};
use resonance_core::parametrix::{build_cutoffs, certify_region, reconstruction_check};
use resonance_core::weighted_operator::{fit_exponential_bound, scan_line, to_norm_scan};
use resonance_core::{
    CertifySettings, Complex64, CrossSectionSpectrum, Error, NormSample, NormScan, ParametrixLayout, RadialGrid,
    ScanSettings,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{write_csv, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormScanRow {
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub norm: f64,
    pub modes_used: usize,
}

impl From<&NormSample> for NormScanRow {
    fn from(s: &NormSample) -> Self {
        NormScanRow {
            re_lambda: s.lambda.re,
            im_lambda: s.lambda.im,
            norm: s.norm,
            modes_used: s.modes_used,
        }
    }
}

pub fn read_norm_scan(path: &Path) -> anyhow::Result<NormScan> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening scan {}", path.display()))?;
    let mut samples = Vec::new();
    for (i, row) in rdr.deserialize::<NormScanRow>().enumerate() {
        let row = row.with_context(|| format!("{}: row {}", path.display(), i + 2))?;
        samples.push(NormSample {
            lambda: Complex64::new(row.re_lambda, row.im_lambda),
            norm: row.norm,
            modes_used: row.modes_used,
        });
    }
    Ok(NormScan::new(samples)?)
}

#[derive(Serialize)]
struct BesselRow {
    re_k: f64,
    im_k: f64,
    z: f64,
    re_i: f64,
    im_i: f64,
    err_i: f64,
    re_kk: f64,
    im_kk: f64,
    err_kk: f64,
}

pub fn bessel(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    if cfg.bessel.orders.is_empty() || cfg.bessel.z.is_empty() {
        return Err(Error::EmptyScan.into());
    }
    let mut rows = Vec::new();
    for o in &cfg.bessel.orders {
        let order = BesselOrder::new(Complex64::new(o[0], o[1]))?;
        for &z in &cfg.bessel.z {
            let i = bessel_i(order, z)?;
            let k = bessel_k(order, z)?;
            rows.push(BesselRow {
                re_k: o[0],
                im_k: o[1],
                z,
                re_i: i.value.re,
                im_i: i.value.im,
                err_i: i.abs_error_estimate,
                re_kk: k.value.re,
                im_kk: k.value.im,
                err_kk: k.abs_error_estimate,
            });
        }
    }
    write_csv(&out.join("bessel.csv"), &rows)
}

#[derive(Serialize)]
struct KernelRow {
    r: f64,
    t: f64,
    re: f64,
    im: f64,
}

pub fn kernel(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let kc = &cfg.kernel;
    if kc.count == 0 {
        return Err(Error::EmptyScan.into());
    }
    let k = Complex64::new(kc.k[0], kc.k[1]);
    let rs = resonance_core::weighted_operator::linspace(kc.r_min, kc.r_max, kc.count);
    let mut rows = Vec::with_capacity(rs.len() * rs.len());
    for &r in &rs {
        for &t in &rs {
            let g = green_kernel_mode(k, kc.mu, r, t)?;
            rows.push(KernelRow { r, t, re: g.re, im: g.im });
        }
    }
    write_csv(&out.join("kernel.csv"), &rows)
}

fn run_scan(cfg: &RunConfig, spectrum: &CrossSectionSpectrum) -> anyhow::Result<NormScan> {
    let lambdas = cfg.lambdas.points(spectrum.n());
    if lambdas.is_empty() {
        return Err(Error::EmptyScan.into());
    }
    let grid = cfg.grid.build()?;
    let settings = ScanSettings {
        tail_tol: cfg.tail_tol,
        ..ScanSettings::default()
    };
    // scan_line works one real part at a time
    let mut points = Vec::with_capacity(lambdas.len());
    let mut i = 0;
    while i < lambdas.len() {
        let re = lambdas[i].re;
        let mut j = i;
        while j < lambdas.len() && lambdas[j].re == re {
            j += 1;
        }
        let ims: Vec<f64> = lambdas[i..j].iter().map(|l| l.im).collect();
        points.extend(scan_line(spectrum, &grid, re, &ims, &settings, cfg.threads)?);
        i = j;
    }
    for p in &points {
        let exact = p.full.records.iter().filter(|r| r.norm.is_some()).count();
        info!(
            "lambda = {}: sup {:.6e} over {} modes ({} decomposed); every later mode bounded by {:.3e}",
            p.lambda, p.full.norm, p.full.modes_used, exact, p.full.stop_bound
        );
    }
    Ok(to_norm_scan(&points)?)
}

pub fn norm_scan(cfg: &RunConfig, out: &Path) -> anyhow::Result<f64> {
    let spectrum = cfg.spectrum.load()?;
    let scan = run_scan(cfg, &spectrum)?;
    let c = fit_exponential_bound(&scan)?;
    let rows: Vec<NormScanRow> = scan.samples.iter().map(NormScanRow::from).collect();
    write_csv(&out.join("norm_scan.csv"), &rows)?;
    println!("fitted C = {c}");
    Ok(c)
}

pub fn certify(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let spectrum = cfg.spectrum.load()?;
    let scan = match &cfg.certify.scan {
        Some(path) => read_norm_scan(path)?,
        None => run_scan(cfg, &spectrum)?,
    };
    let fitted = fit_exponential_bound(&scan)?;
    let cc = &cfg.certify;
    let grid = cc.grid.build()?;
    let x_cap = cc.x_cap.unwrap_or(cc.grid.r_max.exp());
    let cutoffs = build_cutoffs(&grid, x_cap)?;
    let layout = ParametrixLayout::new(&grid, &cutoffs)?;
    let settings = CertifySettings {
        im_range: (cc.im_range[0], cc.im_range[1]),
        samples: cc.samples,
        modes: cc.modes,
        slope_eps: cc.slope_eps,
        safety: cc.safety,
    };
    info!(
        "certificate uses the first {} of {} spectrum entries; Dirichlet cap at x = {x_cap}",
        cc.modes.min(spectrum.len()),
        spectrum.len()
    );
    let cert = certify_region(&scan, fitted, &spectrum, &layout, &settings)?;
    write_json(&out.join("certificate.json"), &cert)?;
    println!("certified C = {}", cert.c1);
    if cc.reconstruct {
        let samples = reconstruction_check(&cert, &spectrum, cc.modes, &layout)?;
        let worst = samples.iter().map(|s| s.rel_error).fold(0.0, f64::max);
        write_csv(&out.join("reconstruction.csv"), &samples)?;
        println!("worst reconstruction error = {worst:e}");
    }
    Ok(())
}

#[derive(Serialize)]
struct LaplaceRow {
    re_lambda: f64,
    im_lambda: f64,
    discrepancy: f64,
    tail_bound: f64,
}

#[derive(Serialize)]
struct WaveReport {
    bumps: usize,
    huygens_max: f64,
    energy_drift_max: f64,
    finite_speed: bool,
    laplace: Vec<LaplaceRow>,
    decay_exponent: f64,
    decay_constant: f64,
}

fn fraction(x: f64) -> f64 {
    x - x.floor()
}

/// Deterministic family of smooth radial bumps with support in [0.8, 3.7].
pub fn bump_family(count: usize) -> Vec<SmoothBump> {
    (1..=count)
        .map(|i| {
            let i = i as f64;
            SmoothBump::new(
                1.5 + 1.5 * fraction(i * 0.618_033_988_749_895),
                0.2 + 0.5 * fraction(i * std::f64::consts::SQRT_2),
                0.5 + fraction(i * 1.732_050_807_568_877),
            )
        })
        .collect()
}

pub fn wave_check(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let wc = &cfg.wave;
    let bumps = bump_family(wc.bumps);
    let mut huygens_max = 0.0f64;
    let mut energy_drift_max = 0.0f64;
    let mut finite_speed = true;
    for b in &bumps {
        let (d1, d2) = b.support();
        let times: Vec<f64> = wc.post_passage.iter().map(|&dt| d2 + dt).collect();
        huygens_max = huygens_max.max(huygens_defect(b, &times)?);
        let wave = RadialWave::new(b);
        let e0 = wave.energy(0.0)?;
        for &t in &times {
            energy_drift_max = energy_drift_max.max((wave.energy(t)? - e0).abs() / e0);
        }
        let t_end = times.iter().fold(0.0f64, |m, &t| m.max(t));
        let grid = distance_grid(d2 + t_end + 1.0, 0.01)?;
        for s in radial_wave_solve(b, &times, &grid)? {
            if let Some((lo, hi)) = s.support_extent(1e-14 * b.amplitude) {
                finite_speed &= lo >= (d1 - s.t).max(0.0) - 0.02 && hi <= d2 + s.t + 0.02;
            }
        }
    }
    info!("wave check over {} bumps: Huygens {huygens_max:e}, energy drift {energy_drift_max:e}", bumps.len());
    let f0 = GaussianBump::new(2.0, 0.2, 1.0);
    let lsettings = LaplaceSettings {
        horizon: wc.horizon,
        step: wc.step,
        ..LaplaceSettings::default()
    };
    let mut laplace = Vec::new();
    for l in &wc.laplace {
        let r = laplace_resolvent_check(Complex64::new(l[0], l[1]), &f0, &lsettings)?;
        info!("laplace at {}: discrepancy {:e}, distance tail {:e}", r.lambda, r.discrepancy, r.tail_bound);
        laplace.push(LaplaceRow {
            re_lambda: l[0],
            im_lambda: l[1],
            discrepancy: r.discrepancy,
            tail_bound: r.tail_bound,
        });
    }
    let lambdas: Vec<Complex64> = wc.decay_ims.iter().map(|&s| Complex64::new(1.0, s)).collect();
    let rs = RadialScanSettings::default();
    info!("radial sector truncated at d = {} with phase step {}", rs.d_max, rs.phase_step);
    let scan = decay_scan(&lambdas, &rs, cfg.threads)?;
    let (decay_exponent, decay_constant) = fit_power_law(&scan, 1.0)?;
    let report = WaveReport {
        bumps: bumps.len(),
        huygens_max,
        energy_drift_max,
        finite_speed,
        laplace,
        decay_exponent,
        decay_constant,
    };
    write_json(&out.join("wave_check.json"), &report)
}

pub fn metric_check(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let mc = &cfg.metric;
    let family = WarpedMetricFamily::new(mc.n, mc.profile, mc.epsilon)?;
    let grid = RadialGrid::uniform(-mc.epsilon.ln(), mc.r_max, mc.h)?;
    let report = check_conditions(&family, &grid, mc.delta)?;
    write_json(&out.join("metric_check.json"), &report)
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    worst: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct SelftestReport {
    seed: u64,
    cases: usize,
    checks: Vec<Check>,
}

/// Randomized spot checks of symmetries and Huygens vanishing.
pub fn selftest(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let cases = cfg.selftest.cases;
    if cases == 0 {
        return Err(Error::EmptyScan.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sym_k = 0.0f64;
    let mut sym_g = 0.0f64;
    let mut huygens = 0.0f64;
    for _ in 0..cases {
        let k = Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-10.0..10.0));
        let z = rng.random_range(0.1..20.0);
        let order = BesselOrder::new(k)?;
        let a = bessel_k(order, z)?;
        let b = bessel_k(order.neg(), z)?;
        sym_k = sym_k.max((a.value - b.value).norm() / a.value.norm().max(f64::MIN_POSITIVE));

        let kp = SpectralPoint::from_k(1, Complex64::new(rng.random_range(0.05..1.0), rng.random_range(1.0..10.0)))?;
        let mu = rng.random_range(0.0..4.0f64).floor();
        let (r, t) = (rng.random_range(-6.0..1.0), rng.random_range(-6.0..1.0));
        let g1 = green_kernel_mode(kp.k(), mu, r, t)?;
        let g2 = green_kernel_mode(kp.k(), mu, t, r)?;
        sym_g = sym_g.max((g1 - g2).norm() / g1.norm().max(f64::MIN_POSITIVE));

        let bump = SmoothBump::new(rng.random_range(1.0..3.0), rng.random_range(0.2..0.8), 1.0);
        let t_after = bump.support().1 + rng.random_range(0.1..10.0);
        huygens = huygens.max(huygens_defect(&bump, &[t_after])?);
    }
    let checks = vec![
        Check {
            name: "bessel_k_order_symmetry",
            worst: sym_k,
            tolerance: 1e-10,
            pass: sym_k <= 1e-10,
        },
        Check {
            name: "green_kernel_symmetry",
            worst: sym_g,
            tolerance: 1e-12,
            pass: sym_g <= 1e-12,
        },
        Check {
            name: "huygens_center",
            worst: huygens,
            tolerance: 1e-9,
            pass: huygens <= 1e-9,
        },
    ];
    let ok = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!("{} {} (worst {:e}, tolerance {:e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.worst, c.tolerance);
    }
    write_json(
        &out.join("selftest.json"),
        &SelftestReport {
            seed: cfg.seed,
            cases,
            checks,
        },
    )?;
    if !ok {
        bail!("selftest failed");
    }
    Ok(())
}
