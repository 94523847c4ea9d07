//! Property-based invariants.

use cmalab::cascade::{fit_decay, near_level, pair_schedule};
use cmalab::grid::{dist, Grid4, GridField};
use cmalab::ops::{complex_hessian, Herm2};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermitian_eigenvalues_bracket_and_multiply(a11 in -3.0f64..3.0, a22 in -3.0f64..3.0, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let m = Herm2 { a11, a22, a12: Complex64::new(re, im) };
        let (lo, hi) = m.eigenvalues();
        prop_assert!(lo <= hi + 1e-12);
        prop_assert!((lo + hi - m.trace()).abs() < 1e-9);
        prop_assert!((lo * hi - m.det()).abs() < 1e-9 * (1.0 + m.det().abs()));
    }

    #[test]
    fn quadratic_forms_have_exact_complex_hessians(a in 0.1f64..3.0, b in 0.1f64..3.0, c in -0.5f64..0.5) {
        // u = a|z1|² + b|z2|² + 2c Re(z1 z̄2): complex Hessian [[a, c], [c, b]]
        let g = Grid4::centered([0.0; 4], 0.25, 5).unwrap();
        let u = GridField::from_fn(g, |p| {
            a * (p[0] * p[0] + p[1] * p[1]) + b * (p[2] * p[2] + p[3] * p[3]) + 2.0 * c * (p[0] * p[2] + p[1] * p[3])
        }).unwrap();
        for m in complex_hessian(&u).unwrap().mats() {
            prop_assert!((m.a11 - a).abs() < 1e-9);
            prop_assert!((m.a22 - b).abs() < 1e-9);
            prop_assert!((m.a12 - Complex64::new(c, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn decay_fit_recovers_exact_geometric_rates(s in 0.1f64..4.0, c in 1e-6f64..1e3) {
        let vals: Vec<f64> = (0..6).map(|k| c * 0.5f64.powf(s * k as f64)).collect();
        let fit = fit_decay(&vals, 0.5, 1).unwrap();
        prop_assert!((fit.exponent - s).abs() < 1e-9);
        prop_assert!((fit.constant / c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn near_level_brackets_the_distance(frac in 1e-4f64..0.0625) {
        let d = 0.5;
        let delta = frac * d;
        let k = near_level(delta, d, 0.5) as i32;
        prop_assert!(0.5f64.powi(k + 5) * d <= delta * (1.0 + 1e-12));
        prop_assert!(delta < 0.5f64.powi(k + 4) * d);
    }

    #[test]
    fn pair_schedules_are_deterministic(seed in 0u64..1000) {
        let a = pair_schedule([0.0; 4], 0.5, 20, seed);
        prop_assert_eq!(&a, &pair_schedule([0.0; 4], 0.5, 20, seed));
        for (x, y) in &a {
            let r = dist(x, y);
            prop_assert!(r <= 0.25 + 1e-12 && r >= 0.5 / 64.0 - 1e-12);
        }
    }
}
