use plankton_lk::certificate::{assemble_c, build_certificate, check_generic_certificate, eval_k, KernelIndex};
use plankton_lk::model::{derive_params, RawParams};

fn rows3(m: &[[f64; 3]; 3]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

fn scalar(v: f64) -> Vec<Vec<f64>> {
    vec![vec![v]]
}

fn grid(n: usize, tau: f64, k: impl Fn(f64) -> Vec<Vec<f64>>) -> Vec<Vec<Vec<f64>>> {
    (0..n).map(|i| k(tau * i as f64 / (n - 1) as f64)).collect()
}

#[test]
fn scalar_delay_equation_with_known_certificate() {
    // x' = -a x + b1 x(t - t1) + b2 x(t - t2), a > |b1| + |b2|.
    // V = h x^2 + sum k_i int e^{-m s} x^2: C is diagonal-dominant here.
    let (a, b1, b2) = (-3.0, 0.5, 0.5);
    let (t1, t2) = (0.2, 0.3);
    let k1 = grid(9, t1, |s| scalar((-s).exp()));
    let k2 = grid(9, t2, |s| scalar((-s).exp()));
    let v = check_generic_certificate(&scalar(a), &scalar(b1), &scalar(b2), &scalar(1.0), &k1, &k2).unwrap();
    assert!(v.passed, "{:?}", v.failure);
    assert!(v.c_min_eigenvalue.unwrap() > 0.0);
}

#[test]
fn failures_are_named() {
    let k = grid(5, 0.1, |s| scalar((-s).exp()));
    let v = check_generic_certificate(&scalar(-3.0), &scalar(0.5), &scalar(0.5), &scalar(-1.0), &k, &k).unwrap();
    assert_eq!(v.failure.as_deref(), Some("H not positive definite"));

    let rising = grid(5, 0.1, |s| scalar(s.exp()));
    let v = check_generic_certificate(&scalar(-3.0), &scalar(0.5), &scalar(0.5), &scalar(1.0), &rising, &k).unwrap();
    assert!(v.failure.unwrap().contains("not strictly decreasing"));

    let v = check_generic_certificate(&scalar(3.0), &scalar(0.5), &scalar(0.5), &scalar(1.0), &k, &k).unwrap();
    assert_eq!(v.failure.as_deref(), Some("C not positive definite"));
}

#[test]
fn dimension_mismatch_is_an_error() {
    let k = grid(5, 0.1, |s| scalar((-s).exp()));
    assert!(check_generic_certificate(&[vec![1.0, 0.0]], &scalar(0.5), &scalar(0.5), &scalar(1.0), &k, &k).is_err());
}

#[test]
fn constructed_certificate_passes_the_generic_check() {
    let p = derive_params(RawParams {
        r: 1.0,
        k: 1.0,
        c1: 1.0,
        c2: 1.0,
        d1: 1.5,
        d2: 1.0,
        b1: 3.0,
        b2: 1.0,
        tau1: 0.1,
        tau2: 0.1,
    })
    .unwrap();
    let cert = build_certificate(&p).unwrap();
    let h = [
        [cert.h11(), cert.h12(), 0.0],
        [cert.h12(), cert.h22(), 0.0],
        [0.0, 0.0, cert.h33()],
    ];
    let k1 = grid(17, p.tau1(), |s| rows3(&eval_k(&cert, KernelIndex::First, s).unwrap()));
    let k2 = grid(17, p.tau2(), |s| rows3(&eval_k(&cert, KernelIndex::Second, s).unwrap()));
    let v = check_generic_certificate(&rows3(&cert.lin.a), &rows3(&cert.lin.b1), &rows3(&cert.lin.b2), &rows3(&h), &k1, &k2)
        .unwrap();
    assert!(v.passed, "{:?}", v.failure);
    let c = assemble_c(&cert);
    let (got, want) = (v.c_min_eigenvalue.unwrap(), c.on_support.min_eigenvalue);
    assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
}
