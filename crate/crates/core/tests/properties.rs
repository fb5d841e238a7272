use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use plankton_lk::acceptance::sample_stable;
use plankton_lk::certificate::{build_certificate, factored_l_minor};
use plankton_lk::history::{History, HistoryShape};
use plankton_lk::model::linearize;
use plankton_lk::numlin::{is_positive_definite, sym_eigen, SymMatrix};
use plankton_lk::spectrum::{eval_factors, eval_q};
use plankton_lk::verify::check_initial_conditions;

/// Delay range of the sampled parameter sets.
const TAU: (f64, f64) = (0.01, 0.5);

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn sym(m: &[[f64; 3]; 3]) -> SymMatrix {
    SymMatrix::from_upper(3, |i, j| m[i][j])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_sum_to_the_trace(n in 1usize..=9, entries in prop::collection::vec(-5.0f64..5.0, 81)) {
        let m = SymMatrix::from_upper(n, |i, j| entries[i * 9 + j]);
        let e = sym_eigen(&m).unwrap();
        let sum: f64 = e.values.iter().sum();
        prop_assert!((sum - m.trace()).abs() <= 1e-10 * m.frobenius_norm().max(1.0));
        let pd = is_positive_definite(&m);
        let tol = 1e-10 * m.frobenius_norm().max(1.0);
        if e.min() > tol {
            prop_assert!(pd.positive_definite);
        }
        if e.min() < -tol {
            prop_assert!(!pd.positive_definite);
        }
    }

    #[test]
    fn characteristic_function_factorizes(
        seed in any::<u64>(),
        re in -5.0f64..1.0,
        im in -20.0f64..20.0,
    ) {
        let p = sample_stable(&mut StdRng::seed_from_u64(seed), TAU);
        let lin = linearize(&p).unwrap();
        let l = Complex64::new(re, im);
        let q = eval_q(l, &lin, &p);
        let (q1, q2) = eval_factors(l, &lin, &p);
        prop_assert!((q - q1 * q2).norm() <= 1e-10 * (1.0 + q.norm()));
        let qc = eval_q(l.conj(), &lin, &p);
        prop_assert!((qc - q.conj()).norm() <= 1e-12 * (1.0 + q.norm()));
    }

    #[test]
    fn certificate_invariants_on_stable_sets(seed in any::<u64>()) {
        let p = sample_stable(&mut StdRng::seed_from_u64(seed), TAU);
        let c = build_certificate(&p).unwrap();
        let l = &c.l;
        let minor = l[0][0] * l[1][1] - l[0][1] * l[1][0];
        prop_assert!(l[0][0] > 0.0 && minor > 0.0 && det3(l) > 0.0);
        let rel = (minor - factored_l_minor(&c, &p)).abs() / minor.abs();
        prop_assert!(rel <= 1e-10, "minor rel {}", rel);

        let (ls, hs) = (sym(l), sym(&c.h));
        let norm = ls.frobenius_norm();
        prop_assert!(sym_eigen(&ls.sub(&hs.scale(c.sigma))).unwrap().min() >= -1e-10 * norm);
        prop_assert!(sym_eigen(&ls.sub(&hs.scale(c.sigma + 1e-6))).unwrap().min() < 0.0);
        prop_assert!(c.epsilon > 0.0 && c.epsilon <= c.sigma && c.q > 0.0);
    }

    #[test]
    fn functional_is_quadratic_in_the_deviation(
        seed in any::<u64>(),
        dx in -1e-3f64..1e-3,
        dy in -1e-3f64..1e-3,
        dz in 1e-5f64..1e-3,
        lambda in 0.05f64..1.0,
    ) {
        let p = sample_stable(&mut StdRng::seed_from_u64(seed), TAU);
        let c = build_certificate(&p).unwrap();
        let base = [c.lin.x0, c.lin.y0, 0.0];
        let shape = HistoryShape::EquilibriumPlusSine { base, amplitude: [dx, dy, 0.0], frequency: 2.0, phase: 0.3 };
        let h = match History::new(shape, &p) {
            Ok(h) => h,
            Err(_) => return Ok(()),
        };
        let shifted = History::new(HistoryShape::EquilibriumPlusConstant { base, offset: [dx, dy, dz] }, &p).unwrap();
        for hist in [h, shifted] {
            let v = check_initial_conditions(&hist, &c, &p).unwrap().v0;
            let scaled = hist.scaled_about(base, lambda).unwrap();
            let vs = check_initial_conditions(&scaled, &c, &p).unwrap().v0;
            prop_assert!(v > 0.0);
            prop_assert!((vs - lambda * lambda * v).abs() <= 1e-10 * v.max(1e-300), "{} vs {}", vs, lambda * lambda * v);
        }
    }
}
