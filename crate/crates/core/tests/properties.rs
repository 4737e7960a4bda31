use proptest::prelude::*;
use resonance_core::bessel::{bessel_k, BesselOrder};
use resonance_core::hyperbolic_space::{huygens_defect, SmoothBump};
use resonance_core::linalg::{largest_singular_value, svd_norm};
use resonance_core::metric_check::check_conditions;
use resonance_core::mode_resolvent::green_kernel_mode;
use resonance_core::parametrix::{band_width, build_cutoffs, default_parametrix_grid};
use resonance_core::weighted_operator::{discretize_weighted_mode, fit_exponential_bound, operator_norm, schur_bound, NormTarget};
use resonance_core::{
    Complex64, CrossSectionSpectrum, NormSample, NormScan, RadialGrid, SpectralPoint, SpectrumEntry, WarpProfile,
    WarpedMetricFamily, WeightFunction,
};

fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn k_is_even_in_the_order(re in -0.9f64..0.9, im in -10.0f64..10.0, z in 0.1f64..20.0) {
        let order = BesselOrder::new(cplx(re, im)).unwrap();
        let a = bessel_k(order, z).unwrap();
        let b = bessel_k(order.neg(), z).unwrap();
        prop_assert!((a.value - b.value).norm() <= 2.0 * (a.abs_error_estimate + b.abs_error_estimate) + 1e-300);
    }

    #[test]
    fn kernel_is_symmetric(re in 0.05f64..1.0, im in 1.0f64..10.0, mu in 0u32..6, r in -6.0f64..1.0, t in -6.0f64..1.0) {
        let k = cplx(re, im);
        let a = green_kernel_mode(k, mu as f64, r, t).unwrap();
        let b = green_kernel_mode(k, mu as f64, t, r).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn spectral_point_identity(n in 1usize..6, re in -2.0f64..4.0, im in -30.0f64..30.0) {
        let p = SpectralPoint::new(n, cplx(re, im)).unwrap();
        let lambda = cplx(re, im);
        let big = lambda * (n as f64 - lambda);
        prop_assert!((p.big_lambda() - big).norm() <= 1e-12 * (1.0 + big.norm()));
        prop_assert!((p.k() - (lambda - 0.5 * n as f64)).norm() <= 1e-15 * (1.0 + lambda.norm()));
    }

    #[test]
    fn fitted_constant_is_least(norms in proptest::collection::vec(0.01f64..50.0, 1..12)) {
        let samples: Vec<NormSample> = norms
            .iter()
            .enumerate()
            .map(|(i, &norm)| NormSample { lambda: cplx(0.5, 1.0 + i as f64), norm, modes_used: 1 })
            .collect();
        let scan = NormScan::new(samples).unwrap();
        let c = fit_exponential_bound(&scan).unwrap();
        prop_assert!(c >= 0.0);
        for s in &scan.samples {
            prop_assert!(s.norm <= (c * s.lambda.norm()).exp() * (1.0 + 1e-12));
        }
        if c > 0.0 {
            let smaller = 0.999 * c;
            prop_assert!(scan.samples.iter().any(|s| s.norm > (smaller * s.lambda.norm()).exp()));
        }
    }

    #[test]
    fn band_width_solves_the_condition(c in 0.05f64..5.0, s in 1.0f64..30.0) {
        let w = band_width(c, s);
        prop_assert!((2.0 * c * w * (c * s).exp() - 1.0).abs() < 1e-12);
        prop_assert!(band_width(c, s + 1.0) < w);
    }

    #[test]
    fn cutoffs_nest(r in -6.0f64..4.0) {
        let f = build_cutoffs(&default_parametrix_grid(), 4.0f64.exp()).unwrap();
        for j in 1..4 {
            let (a, b) = (f.psi(j + 1, r).value, f.psi(j, r).value);
            prop_assert_eq!(a * b, b);
        }
        prop_assert_eq!(f.chi1(r).value + f.psi(1, r).value, 1.0);
    }

    #[test]
    fn flat_warp_has_constant_potential(n in 1usize..8, r in 1.0f64..40.0) {
        let m = WarpedMetricFamily::new(n, WarpProfile::Constant, 0.5).unwrap();
        let q = m.q_at(r).unwrap();
        prop_assert_eq!(q, (n * n) as f64 / 4.0);
        prop_assert_eq!(m.ah_ratio_at(r).unwrap(), 2.0);
    }

    #[test]
    fn shrinking_the_collar_keeps_passes(a in 0.0f64..1.0, p in -2.0f64..2.0, b in 0.0f64..0.5) {
        let m = WarpedMetricFamily::new(2, WarpProfile::Power { a, p }, 0.5).unwrap();
        let wide = check_conditions(&m, &RadialGrid::uniform(0.5f64.recip().ln(), 30.0, 0.1).unwrap(), 0.1).unwrap();
        let inner = WarpedMetricFamily { epsilon: 0.5 * (1.0 - b), ..m };
        let narrow_grid = RadialGrid::uniform(inner.epsilon.recip().ln(), 30.0, 0.1).unwrap();
        let narrow = check_conditions(&inner, &narrow_grid, 0.1).unwrap();
        prop_assert!(!wide.pass.propsigma || narrow.pass.propsigma);
        prop_assert!(!wide.pass.prop2sigma || narrow.pass.prop2sigma);
        prop_assert!(!wide.pass.ah || narrow.pass.ah);
    }

    #[test]
    fn huygens_vanishing(center in 1.0f64..3.0, half in 0.2f64..0.8, after in 0.1f64..15.0) {
        let b = SmoothBump::new(center, half, 1.0);
        prop_assert!(huygens_defect(&b, &[center + half + after]).unwrap() <= 1e-9);
    }

    #[test]
    fn spectrum_text_round_trip(gaps in proptest::collection::vec((0.01f64..10.0, 1u64..9), 0..20), n in 1usize..4) {
        let mut entries = vec![SpectrumEntry { mu_sq: 0.0, multiplicity: 1 }];
        let mut acc = 0.0;
        for (g, m) in gaps {
            acc += g;
            entries.push(SpectrumEntry { mu_sq: acc, multiplicity: m });
        }
        let s = CrossSectionSpectrum::new(n, entries).unwrap();
        prop_assert_eq!(CrossSectionSpectrum::parse(&s.to_text()).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn schur_dominates_the_norm(re in -0.2f64..1.0, im in 1.0f64..20.0, mu in 0u32..12) {
        let grid = RadialGrid::uniform(-10.0, 3.0, 0.04).unwrap();
        let k = cplx(re, im);
        let w = WeightFunction::Cutoff;
        let m = discretize_weighted_mode(k, mu as f64, 1, &grid, &w).unwrap();
        let norm = operator_norm(&m, NormTarget::L2).unwrap();
        let schur = schur_bound(k, mu as f64, &grid, &w).unwrap();
        prop_assert!(schur >= norm - 1e-6, "schur {} < norm {}", schur, norm);
    }

    #[test]
    fn lanczos_agrees_with_svd(seed in 0u64..1000, rows in 260usize..340, cols in 260usize..340) {
        let m = faer::Mat::from_fn(rows, cols, |i, j| {
            let x = (seed as f64 + 0.37 * i as f64 + 1.91 * j as f64).sin();
            cplx(x, (0.11 * (i * j) as f64).cos()) / (1.0 + (i as f64 - j as f64).abs())
        });
        let a = largest_singular_value(&m).unwrap();
        let b = svd_norm(&m).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * b, "{} vs {}", a, b);
    }
}
