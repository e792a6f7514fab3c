use proptest::prelude::*;

use pce::balancing::{balance_check, parse_h};
use pce::data::{strata_from_scores, PrincipalScores};
use pce::estimators::{compute_psi, estimate};
use pce::sensitivity::{compute_omega, estimate_sens_dr, SensitivitySpec};
use pce::simulation::{generate, generate_with_truth, DgpSpec, Scenario};
use pce::{fit_nuisance, Dataset, EstimatorKind, EstimatorOptions, FitOptions, NuisanceSpec, Unit};

const EPS: f64 = f64::EPSILON;

fn sample(n: usize, rep: u64) -> Dataset {
    generate(&DgpSpec::new(Scenario::ALL_YES, n, 99), rep).unwrap()
}

fn scores_dataset(k: usize, n: usize) -> Dataset {
    let units: Vec<Unit> = (0..n).map(|i| Unit::new((i % 2) as u8, ((i / 2) % 2) as u8, 0.0, vec![0.0; k])).collect();
    Dataset::from_units(&units).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn stratum_scores_sum_to_one(p1 in 0.0f64..=1.0, p0 in 0.0f64..=1.0) {
        let ps = PrincipalScores::new(vec![p1], vec![p0]).unwrap();
        let e = strata_from_scores(&ps);
        let total = e.e10[0] + e.e00[0] + e.e11[0];
        prop_assert!((total - 1.0).abs() <= 2.0 * EPS);
        prop_assert_eq!(e.monotonicity_violations.is_empty(), p1 >= p0);
    }

    #[test]
    fn omega_is_monotone_in_epsilon(
        p1 in 0.05f64..0.95,
        frac in 0.05f64..0.95,
        lo in 0.2f64..3.0,
        step in 0.01f64..2.0,
    ) {
        let p0 = p1 * frac;
        let d = scores_dataset(1, 4);
        let ps = PrincipalScores::new(vec![p1; 4], vec![p0; 4]).unwrap();
        let a = compute_omega(&ps, &SensitivitySpec::constant(lo, lo), &d).unwrap();
        let b = compute_omega(&ps, &SensitivitySpec::constant(lo + step, lo + step), &d).unwrap();
        prop_assert!(b.w1_10[0] > a.w1_10[0]);
        prop_assert!(b.w0_10[0] > a.w0_10[0]);
        prop_assert!(b.w0_00[0] < a.w0_00[0]);
        prop_assert!(b.w1_11[0] < a.w1_11[0]);
        let one = compute_omega(&ps, &SensitivitySpec::constant(1.0, 1.0), &d).unwrap();
        for w in [&one.w1_10, &one.w0_10, &one.w0_00, &one.w1_11] {
            prop_assert!((w[0] - 1.0).abs() <= 2.0 * EPS);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_pairs_are_complementary(rep in 0u64..10_000) {
        let (d, truth) = generate_with_truth(&DgpSpec::new(Scenario::ALL_YES, 200, 5), rep).unwrap();
        let psi = compute_psi(&d, &truth).unwrap();
        for i in 0..d.len() {
            let a = psi.s1[i] + psi.one_minus_s1[i];
            let b = psi.s0[i] + psi.one_minus_s0[i];
            let scale1 = psi.s1[i].abs().max(psi.one_minus_s1[i].abs()).max(1.0);
            let scale0 = psi.s0[i].abs().max(psi.one_minus_s0[i].abs()).max(1.0);
            prop_assert!((a - 1.0).abs() <= 4.0 * EPS * scale1, "unit {}: {}", i, a);
            prop_assert!((b - 1.0).abs() <= 4.0 * EPS * scale0, "unit {}: {}", i, b);
        }
    }

    #[test]
    fn estimates_scale_with_the_outcome(rep in 0u64..10_000, a in 0.1f64..10.0, b in -50.0f64..50.0) {
        let d = sample(300, rep);
        let d2 = d.with_outcome(d.y().iter().map(|y| a * y + b).collect()).unwrap();
        let spec = NuisanceSpec::all(d.k());
        let n1 = fit_nuisance(&d, &spec, FitOptions::default()).unwrap();
        let n2 = fit_nuisance(&d2, &spec, FitOptions::default()).unwrap();
        let opts = EstimatorOptions::default();
        for kind in [
            EstimatorKind::TriplyRobust,
            EstimatorKind::PsOm,
            EstimatorKind::TpOm,
            EstimatorKind::TpPsStabilized,
        ] {
            let t1 = estimate(kind, &d, &n1, &opts).unwrap().tau;
            let t2 = estimate(kind, &d2, &n2, &opts).unwrap().tau;
            for (u, v) in t1.iter() {
                let (v1, v2) = (v.unwrap(), t2[u].unwrap());
                let tol = 1e-9 * (1.0 + a * v1.abs() + b.abs());
                prop_assert!((v2 - a * v1).abs() <= tol, "{:?} {}: {} vs {}", kind, u, v2, a * v1);
            }
        }
    }

    #[test]
    fn tilted_estimator_at_one_is_triply_robust(rep in 0u64..10_000) {
        let d = sample(250, rep);
        let n = fit_nuisance(&d, &NuisanceSpec::all(d.k()), FitOptions::default()).unwrap();
        let opts = EstimatorOptions::default();
        let tr = estimate(EstimatorKind::TriplyRobust, &d, &n, &opts).unwrap().tau;
        let sens = estimate_sens_dr(&d, &n, &SensitivitySpec::constant(1.0, 1.0), &opts).unwrap().tau;
        for (u, v) in tr.iter() {
            prop_assert_eq!(v.unwrap().to_bits(), sens[u].unwrap().to_bits());
        }
    }

    #[test]
    fn constant_balance_term_has_unit_means(rep in 0u64..10_000) {
        let d = sample(250, rep);
        let n = fit_nuisance(&d, &NuisanceSpec::all(d.k()), FitOptions::default()).unwrap();
        let h = parse_h(&["1"], &d).unwrap();
        let report = balance_check(&d, &n, &h, 0.1).unwrap();
        for st in &report.strata {
            for m in &st.rows[0].means {
                prop_assert!((m - 1.0).abs() <= 8.0 * EPS);
            }
            prop_assert!(!st.rows[0].flagged);
        }
    }
}
