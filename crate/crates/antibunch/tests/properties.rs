//! Property tests over randomized designs, scales and evaluation points.

use antibunch::dynamics::{amplitude_series, eigendecompose, target_series};
use antibunch::linalg::orthonormality_residual;
use antibunch::photostats::{cumulative_intensity, survival, waiting_time};
use antibunch::synthesis::{
    build_design, fourier_coefficients, synthesize, verify, FreeRowStrategy,
};
use antibunch::trajectory::invert_survival;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Constructed designs stay orthonormal and exactly paired for any scale
    // and frequency choice, and the verified coefficient ratios are
    // scale-invariant.
    #[test]
    fn design_invariants_hold(
        half in 1usize..9,
        omega in 0.05f64..20.0,
        scale in prop_oneof![0.05f64..50.0, -50.0f64..-0.05],
    ) {
        let target = fourier_coefficients(half, omega).unwrap();
        let scaled = target.scaled(scale).unwrap();
        let design = build_design(&scaled, FreeRowStrategy::GramSchmidt).unwrap();
        prop_assert!(orthonormality_residual(design.t()) < 1e-12);

        let n = design.n();
        let mut sorted = design.eigenvalues().to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for k in 0..n / 2 {
            prop_assert!((sorted[k] + sorted[n - 1 - k]).abs() == 0.0);
        }

        let system = synthesize(&design).unwrap();
        let report = verify(&system, &scaled);
        prop_assert!(report.passed(), "verification failed: {report:?}");

        // Ratios match the unscaled target's ratios.
        let base = verify(&system, &target.scaled(1.0).unwrap());
        prop_assert!(base.coefficient_ratios.passed);
    }

    // The sine-series coefficients extracted from an independent
    // eigendecomposition reproduce the target ratios for every size.
    #[test]
    fn extracted_series_matches_target_ratios(half in 1usize..9) {
        let target = fourier_coefficients(half, 1.0).unwrap();
        let system = synthesize(&build_design(&target, FreeRowStrategy::GramSchmidt).unwrap()).unwrap();
        let series = amplitude_series(&eigendecompose(&system).unwrap()).unwrap();
        let terms = series.terms();
        prop_assert_eq!(terms.len(), half);
        for m in 1..half {
            let got = terms[m].amplitude / terms[0].amplitude;
            let want = target.amplitude(m) / target.amplitude(0);
            prop_assert!((got - want).abs() < 1e-9, "m={}: {} vs {}", m, got, want);
        }
    }

    // Closed-form cumulative intensity: zero at zero, nondecreasing, and its
    // finite-difference derivative is the instantaneous intensity.
    #[test]
    fn cumulative_intensity_is_an_antiderivative(
        half in 1usize..9,
        t in 0.01f64..5.0,
    ) {
        let series = target_series(&fourier_coefficients(half, 1.0).unwrap());
        prop_assert!(cumulative_intensity(&series, 0.0) == 0.0);
        let h = 1e-6;
        let fd = (cumulative_intensity(&series, t + h) - cumulative_intensity(&series, t - h))
            / (2.0 * h);
        prop_assert!((fd - series.intensity(t)).abs() < 1e-6);
        prop_assert!(cumulative_intensity(&series, t) >= 0.0);
    }

    // P(invert(u)) = u: the sampler inverts the exact survival.
    #[test]
    fn survival_inversion_round_trips(
        half in 1usize..5,
        gamma in 1.0f64..500.0,
        u in 1e-9f64..1.0,
    ) {
        let series = target_series(&fourier_coefficients(half, 1.0).unwrap());
        let t = invert_survival(&series, gamma, u).unwrap();
        prop_assert!(t >= 0.0);
        let p = survival(&series, gamma, t);
        prop_assert!((p - u).abs() < 1e-8, "P({t}) = {p} vs u = {u}");
    }

    // Scale covariance: (b -> s b, γ -> γ/s²) leaves the waiting density
    // unchanged pointwise.
    #[test]
    fn waiting_density_is_scale_covariant(
        half in 1usize..5,
        s in prop_oneof![0.1f64..10.0],
        t in 0.0f64..1.0,
    ) {
        let series = target_series(&fourier_coefficients(half, 1.0).unwrap());
        let base = waiting_time(&series, 100.0, t);
        let alt = waiting_time(&series.scaled(s), 100.0 / (s * s), t);
        prop_assert!((base - alt).abs() <= 1e-10 * base.abs().max(1.0));
    }
}
