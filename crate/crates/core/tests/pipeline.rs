use std::f64::consts::PI;

use resonance_core::bessel::{bessel_i, bessel_k, BesselOrder};
use resonance_core::mode_resolvent::{apply_resolvent, green_kernel_mode, green_kernel_q, residual_norm};
use resonance_core::parametrix::{band_width, neumann_reconstruct};
use resonance_core::weighted_operator::{
    assemble_full_norm, discretize_weighted_mode, fit_exponential_bound, operator_norm, NormTarget,
};
use resonance_core::{
    builtin_spectrum, Complex64, CrossSectionKind, CrossSectionSpectrum, Error, GridFunction, NormSample, NormScan,
    RadialGrid, SpectrumEntry, WeightFunction,
};

fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn order(re: f64) -> BesselOrder {
    BesselOrder::new(cplx(re, 0.0)).unwrap()
}

fn pairs(s: &CrossSectionSpectrum) -> Vec<(f64, u64)> {
    s.entries().iter().map(|e| (e.mu_sq, e.multiplicity)).collect()
}

#[test]
fn half_integer_bessel_values() {
    let i = bessel_i(order(0.5), 1.0).unwrap().value;
    assert!((i.re - (2.0 / PI).sqrt() * 1f64.sinh()).abs() < 1e-12);
    let k = bessel_k(order(0.5), 1.0).unwrap().value;
    assert!((k.re - (PI / 2.0).sqrt() * (-1f64).exp()).abs() < 1e-12);
    assert!(k.im.abs() < 1e-14);
}

#[test]
fn k0_at_one() {
    let k = bessel_k(order(0.0), 1.0).unwrap().value;
    assert!((k.re - 0.421_024_438_240_708_3).abs() < 1e-12, "{k}");
}

#[test]
fn i0_near_the_origin() {
    let i = bessel_i(order(0.0), 1e-8).unwrap().value;
    assert!((i.re - 1.0).abs() < 1e-12);
}

#[test]
fn builtin_spectra() {
    let two_pi = 2.0 * PI;
    let circle = builtin_spectrum(&CrossSectionKind::Circle { length: two_pi }, 3).unwrap();
    assert_eq!(pairs(&circle), vec![(0.0, 1), (1.0, 2), (4.0, 2)]);
    let sphere = builtin_spectrum(&CrossSectionKind::Sphere { n: 2 }, 3).unwrap();
    assert_eq!(pairs(&sphere), vec![(0.0, 1), (2.0, 3), (6.0, 5)]);
    let torus = builtin_spectrum(&CrossSectionKind::Torus { lengths: vec![two_pi, two_pi] }, 2).unwrap();
    assert_eq!(pairs(&torus), vec![(0.0, 1), (1.0, 4)]);
}

#[test]
fn spectrum_files() {
    let s = CrossSectionSpectrum::parse("2\n0 1\n1 2\n").unwrap();
    assert_eq!(s.n(), 2);
    assert_eq!(pairs(&s), vec![(0.0, 1), (1.0, 2)]);
    assert!(matches!(CrossSectionSpectrum::parse("1\n0 1\n-1 2\n"), Err(Error::InvariantViolation(_))));

    let dir = std::env::temp_dir().join(format!("resonance-spectrum-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("circle.txt");
    let circle = builtin_spectrum(&CrossSectionKind::Circle { length: 2.0 * PI }, 50).unwrap();
    circle.save(&path).unwrap();
    assert_eq!(CrossSectionSpectrum::load(&path).unwrap(), circle);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn green_kernel_examples() {
    assert!((green_kernel_mode(cplx(1.0, 0.0), 0.0, 0.0, 0.0).unwrap() - 0.5).norm() < 1e-15);

    let half = green_kernel_q(cplx(0.5, 0.0), 0.0, -1.0).unwrap();
    let expected = (PI / 2.0).sqrt() * (-1f64).exp() * (2.0 / (PI * (-1f64).exp())).sqrt() * (-1f64).exp().sinh();
    assert!((half.re - expected).abs() < 1e-12, "{half} vs {expected}");

    let k = cplx(0.3, 1.0);
    for &(r, t) in &[(-2.0, 0.5), (0.0, -3.0), (-1.0, -1.0)] {
        assert_eq!(green_kernel_mode(k, 1.0, r, t).unwrap(), green_kernel_q(k, r, t).unwrap());
        let two = green_kernel_mode(k, 2.0, r, t).unwrap();
        let shifted = green_kernel_mode(k, 1.0, r + 2f64.ln(), t + 2f64.ln()).unwrap();
        assert!((two - shifted).norm() <= 1e-13 * (1.0 + two.norm()));
    }
}

#[test]
fn zero_data_gives_zero_solution() {
    let grid = RadialGrid::uniform(-8.0, 2.0, 0.02).unwrap();
    let u = apply_resolvent(cplx(0.5, 2.0), 1.0, &GridFunction::zeros(&grid)).unwrap();
    assert_eq!(u.max_abs(), 0.0);
}

#[test]
fn resolvent_residual_is_small() {
    let grid = RadialGrid::uniform(-8.0, 2.0, 0.01).unwrap();
    let f = GridFunction::from_fn(&grid, |r| cplx((-(r + 3.0) * (r + 3.0) * 2.0).exp(), 0.0));
    let k = cplx(0.4, 3.0);
    let u = apply_resolvent(k, 1.0, &f).unwrap();
    assert!(residual_norm(k, 1.0, &u, &f).unwrap() < 1e-4);
    let zero = GridFunction::zeros(&grid);
    assert!((residual_norm(k, 1.0, &zero, &f).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn single_entry_spectrum_is_the_zero_mode() {
    let grid = RadialGrid::uniform(-8.0, 3.0, 0.04).unwrap();
    let k = cplx(0.5, 3.0);
    let w = WeightFunction::Cutoff;
    let spectrum = CrossSectionSpectrum::new(1, vec![SpectrumEntry { mu_sq: 0.0, multiplicity: 1 }]).unwrap();
    let full = assemble_full_norm(k, &spectrum, &grid, &w, 1e-3, NormTarget::L2).unwrap();
    let m = discretize_weighted_mode(k, 0.0, 1, &grid, &w).unwrap();
    assert_eq!(full.norm, operator_norm(&m, NormTarget::L2).unwrap());
    assert_eq!(full.modes_used, 1);
}

#[test]
fn circle_norm_terminates() {
    let grid = RadialGrid::uniform(-8.0, 3.0, 0.04).unwrap();
    let spectrum = builtin_spectrum(&CrossSectionKind::Circle { length: 2.0 * PI }, 200_000).unwrap();
    let full = assemble_full_norm(cplx(1.0, 5.0), &spectrum, &grid, &WeightFunction::Cutoff, 1e-2, NormTarget::L2).unwrap();
    let best = full.records.iter().filter_map(|r| r.norm).fold(0.0, f64::max);
    assert_eq!(full.norm, best);
    assert!(full.modes_used < spectrum.len());
    assert!(full.stop_bound < 1e-2 * full.norm);
}

#[test]
fn vanishing_weight_gives_zero_norm() {
    let grid = RadialGrid::uniform(-8.0, 3.0, 0.04).unwrap();
    let m = discretize_weighted_mode(cplx(1.0, 2.0), 1.0, 1, &grid, &WeightFunction::Vanishing).unwrap();
    assert_eq!(operator_norm(&m, NormTarget::L2).unwrap(), 0.0);
}

#[test]
fn exponential_fit_examples() {
    let one = |norm: f64, lambda: Complex64| NormSample { lambda, norm, modes_used: 1 };
    let scan = NormScan::new(vec![one(0.3, cplx(0.5, 2.0)), one(1.0, cplx(0.5, 9.0))]).unwrap();
    assert_eq!(fit_exponential_bound(&scan).unwrap(), 0.0);
    let scan = NormScan::new(vec![one(5f64.exp(), cplx(6.0, 8.0))]).unwrap();
    assert!((fit_exponential_bound(&scan).unwrap() - 0.5).abs() < 1e-15);
    let empty = NormScan::new(vec![]).unwrap();
    assert!(matches!(fit_exponential_bound(&empty), Err(Error::EmptyScan)));
}

#[test]
fn band_width_example() {
    assert!((band_width(1.0, 5.0) - 0.5 * (-5f64).exp()).abs() < 1e-18);
}

#[test]
fn neumann_with_zero_k_is_identity_map() {
    let k = faer::Mat::<Complex64>::zeros(4, 4);
    let k1 = faer::Mat::from_fn(4, 4, |i, j| cplx(i as f64, j as f64));
    let (r, norm) = neumann_reconstruct(&k, &k1).unwrap();
    assert_eq!(norm, 0.0);
    assert_eq!(r, k1);
}
