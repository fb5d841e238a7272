//! Construction of the Lyapunov-Krasovskii certificate for the
//! plankton-only equilibrium `(x0, y0, 0)`.
//!
//! The functional is
//!
//! ```text
//! V = <H u(t), u(t)> + int_{t-tau1}^t <K1(t-s) u(s), u(s)> ds
//!                    + int_{t-tau2}^t <K2(t-s) u(s), u(s)> ds
//! K1(s) = exp(-m1 s) (alpha B1^T B1 + mu1 H1)
//! K2(s) = exp(-m2 s) (beta  B2^T B2 + mu2 H2)
//! ```
//!
//! with `H` block diagonal (a 2x2 block on `(x, y)` and `h33` on `z`).
//! The entries of `H` are fixed in closed form so that the matrix `L` below
//! is positive definite; `sigma`, `epsilon` and `q` then drive the decay
//! estimates in [`crate::verify`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt17;
use crate::model::{linearize, LinearizedSystem, ModelParams};
use crate::numlin::{
    inv_sqrt, is_positive_definite, mat3_add, mat3_mul, mat3_scale, mat3_transpose, mat3_zero, sym_eigen, Mat3,
    PdCheck, SymMatrix,
};

/// Free choices inside the admissible family. The defaults are one point
/// in that family, not an optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateOptions {
    /// Weight of `B1^T B1` in `K1`.
    pub alpha: f64,
    /// `mu1 = mu2 = mu_fraction * sigma`; must lie in `(0, 1/2)`.
    pub mu_fraction: f64,
    /// `m1`, `m2` as this fraction of their suprema; must lie in `(0, 1)`.
    pub m_fraction: f64,
    /// `h33` as this multiple of its lower bound; must exceed 1.
    pub h33_factor: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            alpha: 1.0,
            mu_fraction: 0.25,
            m_fraction: 0.5,
            h33_factor: 2.0,
        }
    }
}

impl CertificateOptions {
    fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| Error::InvalidParam {
            field,
            reason: reason.to_string(),
        };
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(bad("alpha", "must be finite and > 0"));
        }
        if !(self.mu_fraction > 0.0 && self.mu_fraction < 0.5) {
            return Err(bad("mu_fraction", "must lie in (0, 0.5)"));
        }
        if !(self.m_fraction > 0.0 && self.m_fraction < 1.0) {
            return Err(bad("m_fraction", "must lie in (0, 1)"));
        }
        if !(self.h33_factor.is_finite() && self.h33_factor > 1.0) {
            return Err(bad("h33_factor", "must be finite and > 1"));
        }
        Ok(())
    }
}

/// Everything needed to evaluate the functional and the decay estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct LkCertificate {
    pub options: CertificateOptions,
    pub lin: LinearizedSystem,
    pub tau1: f64,
    pub tau2: f64,
    pub h: Mat3,
    pub h1: Mat3,
    pub h2: Mat3,
    pub htilde1: Mat3,
    pub htilde2: Mat3,
    pub alpha: f64,
    pub beta: f64,
    pub m1: f64,
    pub m2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub l: Mat3,
    /// Lower bound on `h33` that makes `det L > 0`.
    pub h33_lower_bound: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub q: f64,
}

impl LkCertificate {
    pub fn h11(&self) -> f64 {
        self.h[0][0]
    }
    pub fn h12(&self) -> f64 {
        self.h[0][1]
    }
    pub fn h22(&self) -> f64 {
        self.h[1][1]
    }
    pub fn h33(&self) -> f64 {
        self.h[2][2]
    }
    /// `h11 h22 - h12^2`
    pub fn h_minor(&self) -> f64 {
        self.h11() * self.h22() - self.h12() * self.h12()
    }

    /// Matrices `R1 = mu1 H1` and `R2 = mu2 H2`.
    pub fn r1(&self) -> Mat3 {
        mat3_scale(&self.h1, self.mu1)
    }
    pub fn r2(&self) -> Mat3 {
        mat3_scale(&self.h2, self.mu2)
    }

    fn k_base(&self, which: KernelIndex) -> Mat3 {
        match which {
            KernelIndex::First => mat3_add(&mat3_scale(&gram(&self.lin.b1), self.alpha), &self.r1()),
            KernelIndex::Second => mat3_add(&mat3_scale(&gram(&self.lin.b2), self.beta), &self.r2()),
        }
    }

    fn rate_and_delay(&self, which: KernelIndex) -> (f64, f64) {
        match which {
            KernelIndex::First => (self.m1, self.tau1),
            KernelIndex::Second => (self.m2, self.tau2),
        }
    }

    /// `K_which(s)` without the range check, for quadrature inside the window.
    pub(crate) fn kernel_unchecked(&self, which: KernelIndex, s: f64) -> Mat3 {
        let (m, _) = self.rate_and_delay(which);
        mat3_scale(&self.k_base(which), (-m * s).exp())
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        let o = &self.options;
        let _ = writeln!(out, "# Lyapunov-Krasovskii certificate for the plankton-only equilibrium");
        let _ = writeln!(
            out,
            "# defaults (alpha, mu_fraction, m_fraction, h33_factor) pick one point of the admissible family; they are not optimized"
        );
        let scalars = [
            ("x0", self.lin.x0),
            ("y0", self.lin.y0),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("m1", self.m1),
            ("m2", self.m2),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("h11", self.h11()),
            ("h12", self.h12()),
            ("h22", self.h22()),
            ("h33", self.h33()),
            ("h33_lower_bound", self.h33_lower_bound),
            ("h11h22_minus_h12sq", self.h_minor()),
            ("sigma", self.sigma),
            ("epsilon", self.epsilon),
            ("q", self.q),
            ("option.alpha", o.alpha),
            ("option.mu_fraction", o.mu_fraction),
            ("option.m_fraction", o.m_fraction),
            ("option.h33_factor", o.h33_factor),
        ];
        for (k, v) in scalars {
            let _ = writeln!(out, "{k} = {}", fmt17(v));
        }
        let mats = [
            ("A", self.lin.a),
            ("B1", self.lin.b1),
            ("B2", self.lin.b2),
            ("H", self.h),
            ("H1", self.h1),
            ("H2", self.h2),
            ("Htilde1", self.htilde1),
            ("Htilde2", self.htilde2),
            ("R1", self.r1()),
            ("R2", self.r2()),
            ("K1(0)", self.k_base(KernelIndex::First)),
            ("K2(0)", self.k_base(KernelIndex::Second)),
            ("L", self.l),
        ];
        for (name, m) in mats {
            let _ = writeln!(out, "{name} =");
            for row in m {
                let cells: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
                let _ = writeln!(out, "  [{}]", cells.join(", "));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelIndex {
    First,
    Second,
}

impl TryFrom<u8> for KernelIndex {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(KernelIndex::First),
            2 => Ok(KernelIndex::Second),
            _ => Err(Error::Domain(format!("kernel index must be 1 or 2, got {v}"))),
        }
    }
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// `B^T B`
fn gram(b: &Mat3) -> Mat3 {
    mat3_mul(&mat3_transpose(b), b)
}

/// Check `0 < c1 y0 < 2 r x0 / K` and `0 < e2 c2 y0 < d2`.
pub fn check_stability_inequalities(p: &ModelParams, lin: &LinearizedSystem) -> Result<()> {
    let c1y0 = p.c1() * lin.y0;
    let a2 = 2.0 * p.r() * lin.x0 / p.k();
    let b = p.e2() * p.c2() * lin.y0;
    if !(c1y0 > 0.0) {
        return Err(Error::Inapplicable(format!("0 < c1*y0 fails (c1*y0 = {c1y0:e})")));
    }
    if !(c1y0 < a2) {
        return Err(Error::Inapplicable(format!(
            "c1*y0 < 2*r*x0/K fails ({c1y0:e} >= {a2:e})"
        )));
    }
    if !(b > 0.0) {
        return Err(Error::Inapplicable(format!("0 < e2*c2*y0 fails (e2*c2*y0 = {b:e})")));
    }
    if !(b < p.d2()) {
        return Err(Error::Inapplicable(format!(
            "e2*c2*y0 < d2 fails ({b:e} >= {:e})",
            p.d2()
        )));
    }
    Ok(())
}

/// Exponential rates `(m1, m2)` at the default half of their suprema.
pub fn choose_rates(p: &ModelParams) -> Result<(f64, f64)> {
    choose_rates_with(p, CertificateOptions::default().m_fraction)
}

/// Rates at `fraction` of their suprema:
/// `m2 < (2/tau2) ln(d2 / (e2 c2 y0))` and `m1 < -(1/tau1) ln(rho)` with
/// `rho = max{((a - c1 y0)/a)^2, d1^2/(a^2 + d1^2)}`, `a = r x0 / K`.
pub fn choose_rates_with(p: &ModelParams, fraction: f64) -> Result<(f64, f64)> {
    if p.tau1() <= 0.0 || p.tau2() <= 0.0 {
        return Err(Error::Unsupported(format!(
            "certificate needs tau1 > 0 and tau2 > 0 (got {}, {}); use a small positive delay instead",
            p.tau1(),
            p.tau2()
        )));
    }
    let lin = linearize(p)?;
    check_stability_inequalities(p, &lin)?;
    let a = p.r() * lin.x0 / p.k();
    let c1y0 = p.c1() * lin.y0;
    let d1 = p.d1();
    let rho = (((a - c1y0) / a).powi(2)).max(d1 * d1 / (a * a + d1 * d1));
    let m1 = -fraction * rho.ln() / p.tau1();
    let m2 = fraction * 2.0 * (p.d2() / (p.e2() * p.c2() * lin.y0)).ln() / p.tau2();
    Ok((m1, m2))
}

/// Closed-form entries `(l11, l12, l22, l13, l23, l33)` of `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormL {
    pub l11: f64,
    pub l12: f64,
    pub l22: f64,
    pub l13: f64,
    pub l23: f64,
    pub l33: f64,
}

impl ClosedFormL {
    pub fn to_mat3(&self) -> Mat3 {
        [
            [self.l11, self.l12, self.l13],
            [self.l12, self.l22, self.l23],
            [self.l13, self.l23, self.l33],
        ]
    }
}

/// `alpha e1^2 {a^2 e^{-m1 tau1} - (a - c1 y0)^2} l22`, the factored
/// expression for the leading 2x2 minor of `L`.
pub fn factored_l_minor(cert: &LkCertificate, p: &ModelParams) -> f64 {
    let a = p.r() * cert.lin.x0 / p.k();
    let c1y0 = p.c1() * cert.lin.y0;
    let e = (-cert.m1 * cert.tau1).exp();
    let l22 = cert.alpha * ((a * a + p.d1() * p.d1()) * e - p.d1() * p.d1());
    cert.alpha * p.e1() * p.e1() * (a * a * e - (a - c1y0).powi(2)) * l22
}

/// Closed-form entries of `L` for a built certificate.
pub fn closed_form_l(cert: &LkCertificate, p: &ModelParams) -> ClosedFormL {
    let (x0, y0) = (cert.lin.x0, cert.lin.y0);
    let a = p.r() * x0 / p.k();
    let (d1, e1, c1, c2) = (p.d1(), p.e1(), p.c1(), p.c2());
    let alpha = cert.alpha;
    let e = (-cert.m1 * cert.tau1).exp();
    let l22 = alpha * ((a * a + d1 * d1) * e - d1 * d1);
    let brace = a * a * e - (a - c1 * y0).powi(2);
    ClosedFormL {
        l11: (e1 / d1 * a).powi(2) * l22 + alpha * e1 * e1 * brace,
        l12: e1 / d1 * a * l22,
        l22,
        l13: alpha * c2 * y0 * (e1 / d1) * a * a * e,
        l23: alpha * c2 * y0 * (a + d1) * e,
        l33: 2.0 * cert.h33() * (p.d2() - p.e2() * c2 * y0 * (cert.m2 * cert.tau2 / 2.0).exp()),
    }
}

/// `L = -(HA + A^T H + alpha B1^T B1 + beta B2^T B2
///        + alpha^{-1} e^{m1 tau1} Ht1^T Ht1 + beta^{-1} e^{m2 tau2} Ht2^T Ht2)`
#[allow(clippy::too_many_arguments)]
fn l_from_definition(
    h: &Mat3,
    lin: &LinearizedSystem,
    alpha: f64,
    beta: f64,
    m1: f64,
    m2: f64,
    tau1: f64,
    tau2: f64,
    ht1: &Mat3,
    ht2: &Mat3,
) -> Mat3 {
    let ha = mat3_mul(h, &lin.a);
    let terms = [
        ha,
        mat3_transpose(&ha),
        mat3_scale(&gram(&lin.b1), alpha),
        mat3_scale(&gram(&lin.b2), beta),
        mat3_scale(&gram(ht1), (m1 * tau1).exp() / alpha),
        mat3_scale(&gram(ht2), (m2 * tau2).exp() / beta),
    ];
    let s = terms.iter().fold(mat3_zero(), |acc, t| mat3_add(&acc, t));
    std::array::from_fn(|i| std::array::from_fn(|j| -0.5 * (s[i][j] + s[j][i])))
}

pub fn build_certificate(p: &ModelParams) -> Result<LkCertificate> {
    build_certificate_with(p, CertificateOptions::default())
}

pub fn build_certificate_with(p: &ModelParams, opts: CertificateOptions) -> Result<LkCertificate> {
    opts.validate()?;
    let (m1, m2) = choose_rates_with(p, opts.m_fraction)?;
    let lin = linearize(p)?;
    let (x0, y0) = (lin.x0, lin.y0);
    let (tau1, tau2) = (p.tau1(), p.tau2());
    let (d1, e1, c1) = (p.d1(), p.e1(), p.c1());
    let alpha = opts.alpha;
    let a = p.r() * x0 / p.k();
    let e = (-m1 * tau1).exp();

    let h22 = alpha * (a + d1) * e;
    let l22 = alpha * ((a * a + d1 * d1) * e - d1 * d1);
    let h11 = (e1 / d1).powi(2) * (a * l22 + alpha * c1 * y0 * d1 * d1);
    let h12 = alpha * (e1 / d1) * a * a * e;

    let cf_l11 = (e1 / d1 * a).powi(2) * l22 + alpha * e1 * e1 * (a * a * e - (a - c1 * y0).powi(2));
    let cf_l12 = e1 / d1 * a * l22;
    let l13 = h12 * p.c2() * y0;
    let l23 = h22 * p.c2() * y0;
    let minor = cf_l11 * l22 - cf_l12 * cf_l12;
    let numer = cf_l11 * l23 * l23 + l22 * l13 * l13 - 2.0 * cf_l12 * l13 * l23;
    let b = p.e2() * p.c2() * y0;
    let gap = p.d2() - b * (m2 * tau2 / 2.0).exp();
    let h33_lower_bound = numer / (2.0 * gap * minor);
    let h33 = opts.h33_factor * h33_lower_bound;
    if !(h33 > 0.0 && h33.is_finite()) {
        return Err(Error::Construction(format!("h33 = {h33:e} is not positive")));
    }
    let beta = h33 * (m2 * tau2 / 2.0).exp() / b;

    let h = [[h11, h12, 0.0], [h12, h22, 0.0], [0.0, 0.0, h33]];
    let h1 = [[h11, h12, 0.0], [h12, h22, 0.0], [0.0, 0.0, 0.0]];
    let h2 = [[0.0; 3], [0.0; 3], [0.0, 0.0, h33]];
    let htilde1 = [[0.0; 3], [h12, h22, 0.0], [0.0; 3]];
    let htilde2 = h2;
    let l = l_from_definition(&h, &lin, alpha, beta, m1, m2, tau1, tau2, &htilde1, &htilde2);

    let hs = SymMatrix::try_from_mat3(&h)?;
    let ls = SymMatrix::try_from_mat3(&l)?;
    let h_inv_sqrt = inv_sqrt(&hs).map_err(|e| Error::Construction(format!("H not positive definite: {e}")))?;
    let sigma = sym_eigen(&h_inv_sqrt.sandwich(&ls))?.min();
    let mu = opts.mu_fraction * sigma;
    let epsilon = (sigma - 2.0 * mu).min(m1).min(m2);
    let q = nonlinear_coefficient(p, h11, h12, h22, h33);

    let cert = LkCertificate {
        options: opts,
        lin,
        tau1,
        tau2,
        h,
        h1,
        h2,
        htilde1,
        htilde2,
        alpha,
        beta,
        m1,
        m2,
        mu1: mu,
        mu2: mu,
        l,
        h33_lower_bound,
        sigma,
        epsilon,
        q,
    };
    validate_certificate(&cert, p)?;
    Ok(cert)
}

/// `q = 2/sqrt(1 - h12/sqrt(h11 h22)) * max{ sqrt((r/K)^2 + c1^2) /
///      (min{sqrt h11, sqrt h22} sqrt(1 - h12/sqrt(h11 h22))), c2 / sqrt h33 }`
fn nonlinear_coefficient(p: &ModelParams, h11: f64, h12: f64, h22: f64, h33: f64) -> f64 {
    let s = (1.0 - h12 / (h11 * h22).sqrt()).sqrt();
    let rk = p.r() / p.k();
    let first = (rk * rk + p.c1() * p.c1()).sqrt() / (h11.sqrt().min(h22.sqrt()) * s);
    let second = p.c2() / h33.sqrt();
    2.0 / s * first.max(second)
}

fn validate_certificate(c: &LkCertificate, p: &ModelParams) -> Result<()> {
    let fail = |what: String| Err(Error::Construction(what));
    let (h11, h22, h33) = (c.h11(), c.h22(), c.h33());
    if !(h11 > 0.0 && h22 > 0.0 && h33 > 0.0 && c.h_minor() > 0.0) {
        return fail(format!(
            "H not positive definite (h11 = {h11:e}, h22 = {h22:e}, h33 = {h33:e}, minor = {:e})",
            c.h_minor()
        ));
    }
    let l = &c.l;
    let l_minor = l[0][0] * l[1][1] - l[0][1] * l[1][0];
    let l_det = det3(l);
    if !(l[0][0] > 0.0 && l_minor > 0.0 && l_det > 0.0) {
        return fail(format!(
            "L fails the Sylvester chain (l11 = {:e}, minor = {l_minor:e}, det = {l_det:e})",
            l[0][0]
        ));
    }
    let ls = SymMatrix::try_from_mat3(l)?;
    let hs = SymMatrix::try_from_mat3(&c.h)?;
    let gap = sym_eigen(&ls.sub(&hs.scale(c.sigma)))?.min();
    if gap < -1e-10 * ls.frobenius_norm() {
        return fail(format!("L - sigma H has eigenvalue {gap:e}"));
    }
    if !(c.sigma > 0.0) {
        return fail(format!("sigma = {:e} is not positive", c.sigma));
    }
    if !(c.mu1.max(c.mu2) < c.sigma / 2.0 && c.mu1 > 0.0 && c.mu2 > 0.0) {
        return fail(format!("mu = ({:e}, {:e}) outside (0, sigma/2)", c.mu1, c.mu2));
    }
    if !(c.epsilon > 0.0) {
        return fail(format!("epsilon = {:e} is not positive", c.epsilon));
    }
    let RateCheck { m1_ok, m2_ok } = rate_inequalities(c, p);
    if !(m1_ok && m2_ok) {
        return fail(format!("rate inequalities violated (m1: {m1_ok}, m2: {m2_ok})"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateCheck {
    pub m1_ok: bool,
    pub m2_ok: bool,
}

/// Strict re-check of the defining inequalities of `m1` and `m2`.
pub fn rate_inequalities(c: &LkCertificate, p: &ModelParams) -> RateCheck {
    let a = p.r() * c.lin.x0 / p.k();
    let c1y0 = p.c1() * c.lin.y0;
    let d1 = p.d1();
    let e = (-c.m1 * c.tau1).exp();
    let m1_ok = c.m1 > 0.0 && a * a * e > (a - c1y0).powi(2) && (a * a + d1 * d1) * e > d1 * d1;
    let m2_ok = c.m2 > 0.0 && p.e2() * p.c2() * c.lin.y0 * (c.m2 * c.tau2 / 2.0).exp() < p.d2();
    RateCheck { m1_ok, m2_ok }
}

/// `K1(s)` for `s in [0, tau1]` or `K2(s)` for `s in [0, tau2]`.
pub fn eval_k(cert: &LkCertificate, which: KernelIndex, s: f64) -> Result<Mat3> {
    let (_, tau) = cert.rate_and_delay(which);
    if !(0.0..=tau).contains(&s) {
        return Err(Error::Domain(format!("kernel argument s = {s} outside [0, {tau}]")));
    }
    Ok(cert.kernel_unchecked(which, s))
}

/// The 9x9 block matrix of the two-delay stability test together with its
/// definiteness, both as a whole and restricted to its structural support.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrixC {
    pub matrix: SymMatrix,
    /// Definiteness of the full 9x9 matrix.
    pub full: PdCheck,
    /// Indices of rows that are not identically zero.
    pub support: Vec<usize>,
    /// Definiteness of the principal submatrix on `support`.
    pub on_support: PdCheck,
}

impl BlockMatrixC {
    /// Dimension of the subspace on which `C` vanishes identically.
    pub fn structural_kernel_dim(&self) -> usize {
        self.matrix.dim() - self.support.len()
    }
}

/// `C = -[[HA + A^T H + K1(0) + K2(0), H B1, H B2], [B1^T H, -K1(tau1), 0], [B2^T H, 0, -K2(tau2)]]`
pub fn assemble_c(cert: &LkCertificate) -> BlockMatrixC {
    let k1_0 = cert.kernel_unchecked(KernelIndex::First, 0.0);
    let k2_0 = cert.kernel_unchecked(KernelIndex::Second, 0.0);
    let k1_t = cert.kernel_unchecked(KernelIndex::First, cert.tau1);
    let k2_t = cert.kernel_unchecked(KernelIndex::Second, cert.tau2);
    let matrix = assemble_block(&cert.lin.a, &cert.lin.b1, &cert.lin.b2, &cert.h, &k1_0, &k2_0, &k1_t, &k2_t);
    with_definiteness(matrix)
}

#[allow(clippy::too_many_arguments)]
fn assemble_block(a: &Mat3, b1: &Mat3, b2: &Mat3, h: &Mat3, k1_0: &Mat3, k2_0: &Mat3, k1_t: &Mat3, k2_t: &Mat3) -> SymMatrix {
    let ha = mat3_mul(h, a);
    let hb1 = mat3_mul(h, b1);
    let hb2 = mat3_mul(h, b2);
    SymMatrix::from_upper(9, |i, j| {
        let (bi, bj) = (i / 3, j / 3);
        let (r, c) = (i % 3, j % 3);
        match (bi, bj) {
            (0, 0) => {
                -(0.5 * (ha[r][c] + ha[c][r]) + 0.5 * (ha[c][r] + ha[r][c]) + k1_0[r][c] + k2_0[r][c])
            }
            (0, 1) => -hb1[r][c],
            (0, 2) => -hb2[r][c],
            (1, 1) => k1_t[r][c],
            (2, 2) => k2_t[r][c],
            _ => 0.0,
        }
    })
}

fn with_definiteness(matrix: SymMatrix) -> BlockMatrixC {
    let n = matrix.dim();
    let support: Vec<usize> = (0..n)
        .filter(|&i| (0..n).any(|j| matrix.get(i, j) != 0.0))
        .collect();
    let full = is_positive_definite(&matrix);
    let on_support = if support.is_empty() {
        PdCheck {
            positive_definite: false,
            min_pivot: 0.0,
            min_eigenvalue: 0.0,
        }
    } else {
        is_positive_definite(&matrix.principal_submatrix(&support))
    };
    BlockMatrixC {
        matrix,
        full,
        support,
        on_support,
    }
}

/// `diag(L - R1 - R2, e^{-m1 tau1} R1, e^{-m2 tau2} R2)`, a lower bound for `C`.
pub fn block_lower_bound(cert: &LkCertificate) -> SymMatrix {
    let r1 = cert.r1();
    let r2 = cert.r2();
    let e1 = (-cert.m1 * cert.tau1).exp();
    let e2 = (-cert.m2 * cert.tau2).exp();
    SymMatrix::from_upper(9, |i, j| {
        let (bi, bj) = (i / 3, j / 3);
        let (r, c) = (i % 3, j % 3);
        match (bi, bj) {
            (0, 0) => cert.l[r][c] - r1[r][c] - r2[r][c],
            (1, 1) => e1 * r1[r][c],
            (2, 2) => e2 * r2[r][c],
            _ => 0.0,
        }
    })
}

/// Outcome of [`check_generic_certificate`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenericVerdict {
    pub passed: bool,
    /// First violated condition.
    pub failure: Option<String>,
    /// Smallest eigenvalue of `C` on its structural support, when assembled.
    pub c_min_eigenvalue: Option<f64>,
}

impl GenericVerdict {
    fn fail(msg: impl Into<String>, c_min: Option<f64>) -> Self {
        GenericVerdict {
            passed: false,
            failure: Some(msg.into()),
            c_min_eigenvalue: c_min,
        }
    }
}

/// Check the sufficient conditions of the two-delay linear stability test
/// for user-supplied matrices: `H > 0`; each `K(s) > 0` and strictly
/// decreasing along its sample grid; `C > 0`.
///
/// Definiteness of `K` and `C` is checked on their structural support
/// (rows not identically zero), which is where the quadratic forms act.
/// Matrices are `n x n` with `n <= 3`; `k*_samples` are on uniform grids
/// over `[0, tau_k]`, first sample at `s = 0`, last at `s = tau_k`.
pub fn check_generic_certificate(
    a: &[Vec<f64>],
    b1: &[Vec<f64>],
    b2: &[Vec<f64>],
    h: &[Vec<f64>],
    k1_samples: &[Vec<Vec<f64>>],
    k2_samples: &[Vec<Vec<f64>>],
) -> Result<GenericVerdict> {
    let n = a.len();
    if n == 0 || n > 3 {
        return Err(Error::Dimension(format!("state dimension {n} outside 1..=3")));
    }
    let square = |name: &str, m: &[Vec<f64>]| -> Result<()> {
        if m.len() != n || m.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("{name} is not {n}x{n}")));
        }
        Ok(())
    };
    square("A", a)?;
    square("B1", b1)?;
    square("B2", b2)?;
    square("H", h)?;
    for (name, samples) in [("K1", k1_samples), ("K2", k2_samples)] {
        if samples.len() < 2 {
            return Err(Error::Dimension(format!("{name} needs at least two samples")));
        }
        for s in samples {
            square(name, s)?;
        }
    }

    let hs = match SymMatrix::try_from_rows(h) {
        Ok(m) => m,
        Err(_) => return Ok(GenericVerdict::fail("H not symmetric", None)),
    };
    if !is_positive_definite(&hs).positive_definite {
        return Ok(GenericVerdict::fail("H not positive definite", None));
    }

    for (name, samples) in [("K1", k1_samples), ("K2", k2_samples)] {
        let mats: Vec<SymMatrix> = match samples.iter().map(|s| SymMatrix::try_from_rows(s)).collect() {
            Ok(v) => v,
            Err(_) => return Ok(GenericVerdict::fail(format!("{name}(s) not symmetric"), None)),
        };
        let support: Vec<usize> = (0..n).filter(|&i| (0..n).any(|j| mats[0].get(i, j) != 0.0)).collect();
        if support.is_empty() {
            return Ok(GenericVerdict::fail(format!("{name}(0) is zero"), None));
        }
        let off_support_zero =
            |m: &SymMatrix| (0..n).filter(|i| !support.contains(i)).all(|i| (0..n).all(|j| m.get(i, j) == 0.0));
        for (k, m) in mats.iter().enumerate() {
            if !off_support_zero(m) || !is_positive_definite(&m.principal_submatrix(&support)).positive_definite {
                return Ok(GenericVerdict::fail(format!("{name}(s) not positive definite at sample {k}"), None));
            }
        }
        for (k, w) in mats.windows(2).enumerate() {
            let diff = w[0].sub(&w[1]).principal_submatrix(&support);
            if !is_positive_definite(&diff).positive_definite {
                return Ok(GenericVerdict::fail(
                    format!("{name}(s) not strictly decreasing between samples {k} and {}", k + 1),
                    None,
                ));
            }
        }
    }

    let pad = |m: &[Vec<f64>]| -> Mat3 { std::array::from_fn(|i| std::array::from_fn(|j| if i < n && j < n { m[i][j] } else { 0.0 })) };
    let c = assemble_block(
        &pad(a),
        &pad(b1),
        &pad(b2),
        &pad(h),
        &pad(&k1_samples[0]),
        &pad(&k2_samples[0]),
        &pad(k1_samples.last().unwrap()),
        &pad(k2_samples.last().unwrap()),
    );
    let checked = with_definiteness(c);
    let min = Some(checked.on_support.min_eigenvalue);
    if !checked.on_support.positive_definite {
        return Ok(GenericVerdict::fail("C not positive definite", min));
    }
    Ok(GenericVerdict {
        passed: true,
        failure: None,
        c_min_eigenvalue: min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_params, RawParams};
    use crate::numlin::mat3_sub;

    pub(crate) fn case2() -> ModelParams {
        derive_params(RawParams {
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
        .unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn rates_satisfy_their_inequalities() {
        let p = case2();
        let cert = build_certificate(&p).unwrap();
        assert_eq!(rate_inequalities(&cert, &p), RateCheck { m1_ok: true, m2_ok: true });
        let (m1, m2) = choose_rates(&p).unwrap();
        assert_eq!((m1, m2), (cert.m1, cert.m2));
    }

    #[test]
    fn m2_is_one_over_tau2_when_ratio_is_e() {
        // d2 / (e2 c2 y0) = e gives m2 = (1/2)(2/tau2) ln e = 1/tau2
        let mut raw = *case2().raw();
        raw.tau2 = 0.37;
        let p = derive_params(raw).unwrap();
        let lin = linearize(&p).unwrap();
        raw.d2 = std::f64::consts::E * p.e2() * p.c2() * lin.y0;
        let p = derive_params(raw).unwrap();
        let (_, m2) = choose_rates(&p).unwrap();
        assert!((m2 - 1.0 / 0.37).abs() < 1e-14, "{m2}");
    }

    #[test]
    fn m1_when_first_ratio_vanishes() {
        // c1 y0 = r x0 / K  <=>  1 - u = u with u = d1/(e1 c1 K), i.e. d1 = e1 c1 K / 2
        let mut raw = *case2().raw();
        let p = derive_params(raw).unwrap();
        raw.d1 = p.zooplankton_threshold() / 2.0;
        let p = derive_params(raw).unwrap();
        let lin = linearize(&p).unwrap();
        let a = p.r() * lin.x0 / p.k();
        assert!((p.c1() * lin.y0 - a).abs() < 1e-15);
        let rho = p.d1().powi(2) / (a * a + p.d1().powi(2));
        let (m1, _) = choose_rates(&p).unwrap();
        assert!(m1 > 0.0);
        assert!(rel(m1, -rho.ln() / (2.0 * p.tau1())) < 1e-12);
    }

    #[test]
    fn rejects_zero_delay_and_violated_inequalities() {
        let mut raw = *case2().raw();
        raw.tau1 = 0.0;
        assert!(matches!(build_certificate(&derive_params(raw).unwrap()), Err(Error::Unsupported(_))));
        let mut raw = *case2().raw();
        raw.c2 = 0.0;
        let err = build_certificate(&derive_params(raw).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Inapplicable(ref m) if m.contains("0 < e2*c2*y0")), "{err}");
        let mut raw = *case2().raw();
        raw.d1 = 0.5; // below e1 c1 K / 3
        let err = build_certificate(&derive_params(raw).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Inapplicable(ref m) if m.contains("2*r*x0/K")), "{err}");
        let mut raw = *case2().raw();
        raw.b2 = 5.0; // fish invade: e2 c2 y0 > d2
        let err = build_certificate(&derive_params(raw).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Inapplicable(ref m) if m.contains("< d2")), "{err}");
    }

    #[test]
    fn case2_certificate_is_sound() {
        let p = case2();
        let cert = build_certificate(&p).unwrap();
        let ls = SymMatrix::try_from_mat3(&cert.l).unwrap();
        assert!(is_positive_definite(&ls).positive_definite);
        assert!(cert.sigma > 0.0);
        assert_eq!(cert.mu1, cert.sigma / 4.0);
        assert!(cert.epsilon > 0.0);
        let hs = SymMatrix::try_from_mat3(&cert.h).unwrap();
        assert!(is_positive_definite(&hs).positive_definite);
        assert_eq!(mat3_add(&cert.h1, &cert.h2), cert.h);
    }

    #[test]
    fn closed_forms_match_definition() {
        let p = case2();
        let cert = build_certificate(&p).unwrap();
        let cf = closed_form_l(&cert, &p).to_mat3();
        for (i, (row, want)) in cf.iter().zip(&cert.l).enumerate() {
            for (j, (a, b)) in row.iter().zip(want).enumerate() {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "({i},{j}) {a} vs {b}");
            }
        }
        let minor = cert.l[0][0] * cert.l[1][1] - cert.l[0][1] * cert.l[0][1];
        assert!(rel(minor, factored_l_minor(&cert, &p)) <= 1e-10);
    }

    #[test]
    fn sigma_is_tight() {
        let cert = build_certificate(&case2()).unwrap();
        let ls = SymMatrix::try_from_mat3(&cert.l).unwrap();
        let hs = SymMatrix::try_from_mat3(&cert.h).unwrap();
        assert!(sym_eigen(&ls.sub(&hs.scale(cert.sigma))).unwrap().min() >= -1e-10 * ls.frobenius_norm());
        assert!(sym_eigen(&ls.sub(&hs.scale(cert.sigma + 1e-6))).unwrap().min() < 0.0);
    }

    #[test]
    fn lyapunov_identity() {
        let cert = build_certificate(&case2()).unwrap();
        let lin = &cert.lin;
        let ha = mat3_mul(&cert.h, &lin.a);
        let lhs = mat3_add(&ha, &mat3_transpose(&ha));
        let rhs_terms = [
            cert.l,
            mat3_scale(&gram(&lin.b1), cert.alpha),
            mat3_scale(&gram(&lin.b2), cert.beta),
            mat3_scale(&gram(&cert.htilde1), (cert.m1 * cert.tau1).exp() / cert.alpha),
            mat3_scale(&gram(&cert.htilde2), (cert.m2 * cert.tau2).exp() / cert.beta),
        ];
        let s = rhs_terms.iter().fold(mat3_zero(), |acc, t| mat3_add(&acc, t));
        let scale = s.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        let diff = mat3_add(&lhs, &s);
        assert!(diff.iter().flatten().all(|v| v.abs() <= 1e-9 * scale), "{diff:?}");
    }

    #[test]
    fn identity_thought_experiment() {
        // H = I, L = 2I => sigma = 2 and mu = sigma/4 = 1/2
        let h = SymMatrix::identity(3);
        let l = SymMatrix::identity(3).scale(2.0);
        let s = inv_sqrt(&h).unwrap();
        let sigma = sym_eigen(&s.sandwich(&l)).unwrap().min();
        assert!((sigma - 2.0).abs() < 1e-15);
        assert_eq!(CertificateOptions::default().mu_fraction * sigma, 0.5);
        // epsilon = min(sigma - 2 max mu, m1, m2)
        let eps = (1.0f64).min(0.3).min(0.4);
        assert_eq!(eps, 0.3);
    }

    #[test]
    fn kernel_values() {
        let cert = build_certificate(&case2()).unwrap();
        let k0 = eval_k(&cert, KernelIndex::First, 0.0).unwrap();
        let expect = mat3_add(&mat3_scale(&gram(&cert.lin.b1), cert.alpha), &cert.r1());
        assert_eq!(k0, expect);
        let kt = eval_k(&cert, KernelIndex::First, cert.tau1).unwrap();
        let f = (-cert.m1 * cert.tau1).exp();
        for i in 0..3 {
            for j in 0..3 {
                assert!((kt[i][j] - f * k0[i][j]).abs() <= 1e-15 * k0[i][j].abs().max(1.0));
            }
        }
        assert!(eval_k(&cert, KernelIndex::Second, cert.tau2 + 1e-9).is_err());
        assert!(eval_k(&cert, KernelIndex::Second, -1e-9).is_err());
        assert!(KernelIndex::try_from(3).is_err());
    }

    #[test]
    fn kernel_derivative_by_finite_differences() {
        let cert = build_certificate(&case2()).unwrap();
        let s = 0.05;
        for (which, m) in [(KernelIndex::First, cert.m1), (KernelIndex::Second, cert.m2)] {
            let mut prev_err = f64::INFINITY;
            for h in [1e-2, 5e-3] {
                let kp = eval_k(&cert, which, s + h).unwrap();
                let km = eval_k(&cert, which, s - h).unwrap();
                let k = eval_k(&cert, which, s).unwrap();
                let fd = mat3_scale(&mat3_sub(&kp, &km), 0.5 / h);
                let err = mat3_sub(&fd, &mat3_scale(&k, -m)).iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
                // O(h^2): halving h cuts the error by about four
                assert!(err < prev_err / 3.5, "{err} vs {prev_err}");
                prev_err = err;
            }
        }
    }

    #[test]
    fn block_matrix_structure() {
        let cert = build_certificate(&case2()).unwrap();
        let c = assemble_c(&cert);
        for i in 3..6 {
            for j in 6..9 {
                assert_eq!(c.matrix.get(i, j), 0.0);
                assert_eq!(c.matrix.get(j, i), 0.0);
            }
        }
        // z of the first delayed state and (x, y) of the second never enter
        assert_eq!(c.support, vec![0, 1, 2, 3, 4, 8]);
        assert_eq!(c.structural_kernel_dim(), 3);
        assert!(c.on_support.positive_definite);
        assert!(!c.full.positive_definite);
        let bound = block_lower_bound(&cert);
        let diff = c.matrix.sub(&bound);
        let min = sym_eigen(&diff).unwrap().min();
        assert!(min >= -1e-10, "{min}");
    }

    fn rows(m: &Mat3) -> Vec<Vec<f64>> {
        m.iter().map(|r| r.to_vec()).collect()
    }

    fn samples(cert: &LkCertificate, which: KernelIndex, tau: f64, n: usize) -> Vec<Vec<Vec<f64>>> {
        (0..=n).map(|k| rows(&eval_k(cert, which, tau * k as f64 / n as f64).unwrap())).collect()
    }

    #[test]
    fn generic_path_accepts_model_certificate() {
        let cert = build_certificate(&case2()).unwrap();
        let k1 = samples(&cert, KernelIndex::First, cert.tau1, 16);
        let k2 = samples(&cert, KernelIndex::Second, cert.tau2, 16);
        let lin = &cert.lin;
        let v = check_generic_certificate(&rows(&lin.a), &rows(&lin.b1), &rows(&lin.b2), &rows(&cert.h), &k1, &k2).unwrap();
        assert!(v.passed, "{:?}", v.failure);
        let direct = assemble_c(&cert).on_support.min_eigenvalue;
        assert!((v.c_min_eigenvalue.unwrap() - direct).abs() <= 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn generic_path_failures() {
        let cert = build_certificate(&case2()).unwrap();
        let lin = &cert.lin;
        let k1 = samples(&cert, KernelIndex::First, cert.tau1, 4);
        let k2 = samples(&cert, KernelIndex::Second, cert.tau2, 4);
        let bad_h = vec![vec![1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let v = check_generic_certificate(&rows(&lin.a), &rows(&lin.b1), &rows(&lin.b2), &bad_h, &k1, &k2).unwrap();
        assert_eq!(v.failure.as_deref(), Some("H not positive definite"));

        let constant = vec![k1[0].clone(); 5];
        let v = check_generic_certificate(&rows(&lin.a), &rows(&lin.b1), &rows(&lin.b2), &rows(&cert.h), &constant, &k2)
            .unwrap();
        assert!(v.failure.unwrap().contains("not strictly decreasing"));

        let err = check_generic_certificate(&rows(&lin.a), &rows(&lin.b1)[..2], &rows(&lin.b2), &rows(&cert.h), &k1, &k2);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn options_are_validated() {
        let p = case2();
        for o in [
            CertificateOptions { alpha: 0.0, ..Default::default() },
            CertificateOptions { mu_fraction: 0.5, ..Default::default() },
            CertificateOptions { m_fraction: 1.0, ..Default::default() },
            CertificateOptions { h33_factor: 1.0, ..Default::default() },
        ] {
            assert!(matches!(build_certificate_with(&p, o), Err(Error::InvalidParam { .. })));
        }
        // a different alpha still yields a valid certificate
        let c = build_certificate_with(&p, CertificateOptions { alpha: 2.5, ..Default::default() }).unwrap();
        assert!(c.sigma > 0.0);
    }

    #[test]
    fn report_lists_every_scalar() {
        let r = build_certificate(&case2()).unwrap().report();
        for key in ["sigma =", "epsilon =", "q =", "h33 =", "beta =", "mu1 =", "L =", "K1(0) ="] {
            assert!(r.contains(key), "{key}");
        }
    }
}
