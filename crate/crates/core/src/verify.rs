//! Attraction estimates for the plankton-only equilibrium and their
//! numerical verification along simulated trajectories.
//!
//! With `u = (x - x0, y - y0, z)` and the certificate functional `V`, the
//! five admissibility conditions on the initial history guarantee
//!
//! ```text
//! |x - x0| <= sqrt(h22 / det) D(t),  |y - y0| <= sqrt(h11 / det) D(t),  |z| <= D(t) / sqrt(h33)
//! D(t) = sqrt(V0) exp(-eps t / 2) / (1 - (q / eps) sqrt(V0)),  det = h11 h22 - h12^2
//! ```
//!
//! and `dV/dt <= -eps V + q V^{3/2}` along the solution.

use std::fmt::Write as _;
use std::io::Write;

use crate::certificate::{KernelIndex, LkCertificate};
use crate::error::{Error, Result};
use crate::fmt17;
use crate::history::History;
use crate::model::ModelParams;
use crate::numlin::{quad_form3, Vec3};
use crate::sim::Trajectory;

/// Simpson subintervals per delay window.
pub const SIMPSON_INTERVALS: usize = 128;
/// Fixed part of the envelope tolerance.
pub const ENVELOPE_SLACK: f64 = 1e-6;
/// Multiplier on the solver error estimate in the envelope tolerance.
pub const SOLVER_ALLOWANCE_FACTOR: f64 = 10.0;
/// Slack on the Gronwall bound for `V`.
pub const GRONWALL_SLACK: f64 = 1e-7;
/// Relative slack of the differential inequality, `1e-5 (1 + |V|)`.
pub const DIFF_INEQ_SLACK: f64 = 1e-5;

/// The initial history in shifted coordinates, zero outside each
/// component's window.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedHistory {
    history: History,
    shift: Vec3,
}

impl ExtendedHistory {
    /// Shift at the equilibrium `(x0, y0, 0)`.
    pub fn new(history: History, x0: f64, y0: f64) -> Self {
        ExtendedHistory {
            history,
            shift: [x0, y0, 0.0],
        }
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    /// Value at `theta <= 0`.
    pub fn eval(&self, theta: f64) -> Result<Vec3> {
        if theta > 0.0 {
            return Err(Error::Domain(format!("extended history argument {theta} > 0")));
        }
        let v = if theta >= -self.history.tau_max() {
            self.history.eval(theta)?
        } else {
            [0.0; 3]
        };
        Ok(std::array::from_fn(|c| {
            if theta >= -self.history.window(c) {
                v[c] - self.shift[c]
            } else {
                0.0
            }
        }))
    }
}

/// Shift `hist` by the certificate's equilibrium.
pub fn extend_history(hist: &History, cert: &LkCertificate) -> ExtendedHistory {
    ExtendedHistory::new(hist.clone(), cert.lin.x0, cert.lin.y0)
}

/// Composite Simpson on `[a, b]` with `n` (even) subintervals.
fn simpson(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let h = (b - a) / n as f64;
    let mut sum = f(a)? + f(b)?;
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h)?;
    }
    Ok(sum * h / 3.0)
}

/// `<H u(t), u(t)> + sum_k int_{t - tau_k}^t <K_k(t - s) u(s), u(s)> ds`
/// where `u` is supplied by `shifted`.
fn functional(cert: &LkCertificate, t: f64, shifted: impl Fn(f64) -> Result<Vec3>) -> Result<f64> {
    let mut v = quad_form3(&cert.h, &shifted(t)?);
    for (which, tau) in [(KernelIndex::First, cert.tau1), (KernelIndex::Second, cert.tau2)] {
        if tau > 0.0 {
            v += simpson(t - tau, t, SIMPSON_INTERVALS, |s| {
                Ok(quad_form3(&cert.kernel_unchecked(which, t - s), &shifted(s)?))
            })?;
        }
    }
    Ok(v)
}

/// `V` at time zero for the extended initial history.
pub fn eval_v0(ext: &ExtendedHistory, cert: &LkCertificate) -> Result<f64> {
    functional(cert, 0.0, |s| ext.eval(s))
}

/// `V(t)` along a trajectory; the window reads the history for `s < 0`.
pub fn eval_v_along(traj: &Trajectory, cert: &LkCertificate, t: f64) -> Result<f64> {
    if !(0.0..=traj.t_end()).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {}]", traj.t_end())));
    }
    let ext = extend_history(traj.history(), cert);
    let shift = [cert.lin.x0, cert.lin.y0, 0.0];
    functional(cert, t, |s| {
        if s < 0.0 {
            ext.eval(s)
        } else {
            let v = traj.sample(s)?;
            Ok(std::array::from_fn(|c| v[c] - shift[c]))
        }
    })
}

/// One admissibility condition with both sides and `margin = rhs - lhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult {
    pub name: &'static str,
    pub description: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub strict: bool,
    pub passed: bool,
    /// Closed-form value of `lhs` when the history shape allows it.
    pub analytic_lhs: Option<f64>,
}

impl ConditionResult {
    fn new(name: &'static str, description: &'static str, lhs: f64, rhs: f64, strict: bool) -> Self {
        let passed = if strict { lhs < rhs } else { lhs <= rhs };
        ConditionResult {
            name,
            description,
            lhs,
            rhs,
            margin: rhs - lhs,
            strict,
            passed,
            analytic_lhs: None,
        }
    }
}

pub const CONDITION_NAMES: [&str; 5] = [
    "zooplankton_window_tau1",
    "zooplankton_window_tau2",
    "small_functional",
    "deflated_prey_zooplankton",
    "deflated_fish",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    pub v0: f64,
    pub conditions: Vec<ConditionResult>,
    /// True iff every condition passes.
    pub envelopes_valid: bool,
}

impl TheoremReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &ConditionResult> {
        self.conditions.iter().filter(|c| !c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "V0 = {}", fmt17(self.v0));
        for c in &self.conditions {
            let rel = if c.strict { "<" } else { "<=" };
            let _ = writeln!(out, "[{}] {}: {} {rel} rhs", if c.passed { "PASS" } else { "FAIL" }, c.name, c.description);
            let _ = writeln!(out, "  lhs = {}", fmt17(c.lhs));
            let _ = writeln!(out, "  rhs = {}", fmt17(c.rhs));
            let _ = writeln!(out, "  margin = {}", fmt17(c.margin));
            if let Some(a) = c.analytic_lhs {
                let _ = writeln!(out, "  analytic lhs = {}", fmt17(a));
            }
        }
        let _ = writeln!(out, "envelopes_valid = {}", self.envelopes_valid);
        out
    }
}

/// Gronwall deflation `sqrt(V0) / (1 - (q / eps) sqrt(V0))`, infinite once
/// the denominator is not positive.
fn deflated(cert: &LkCertificate, v0: f64) -> f64 {
    let denom = 1.0 - cert.q / cert.epsilon * v0.sqrt();
    if denom > 0.0 {
        v0.sqrt() / denom
    } else {
        f64::INFINITY
    }
}

/// Evaluate all five admissibility conditions literally.
pub fn check_initial_conditions(hist: &History, cert: &LkCertificate, p: &ModelParams) -> Result<TheoremReport> {
    let ext = extend_history(hist, cert);
    let v0 = eval_v0(&ext, cert)?;
    let y0 = cert.lin.y0;
    let det = cert.h_minor();
    let (h11, h22) = (cert.h11(), cert.h22());
    let e1c1 = p.e1() * p.c1();
    let e2c2 = p.e2() * p.c2();
    let damp1 = (-cert.m1 * cert.tau1 / 2.0).exp();
    let damp2 = (-cert.m2 * cert.tau2 / 2.0).exp();

    let mut w1 = ConditionResult::new(
        CONDITION_NAMES[0],
        "max over [-tau1, 0] of |psi - y0| vs sqrt(det)/h22 * mu1/(e1 c1) * exp(-m1 tau1 / 2)",
        hist.max_abs_dev_on(1, y0, cert.tau1),
        det.sqrt() / h22 * cert.mu1 / e1c1 * damp1,
        false,
    );
    w1.analytic_lhs = hist.analytic_max_abs_dev_on(1, y0, cert.tau1);
    let mut w2 = ConditionResult::new(
        CONDITION_NAMES[1],
        "max over [-tau2, 0] of |psi - y0| vs mu2/(e2 c2) * exp(-m2 tau2 / 2)",
        hist.max_abs_dev_on(1, y0, cert.tau2),
        cert.mu2 / e2c2 * damp2,
        false,
    );
    w2.analytic_lhs = hist.analytic_max_abs_dev_on(1, y0, cert.tau2);
    let small = ConditionResult::new(
        CONDITION_NAMES[2],
        "sqrt(V0) vs eps / q",
        v0.sqrt(),
        cert.epsilon / cert.q,
        true,
    );
    let g = deflated(cert, v0);
    let xy = ConditionResult::new(
        CONDITION_NAMES[3],
        "sqrt(V0)/(1 - (q/eps) sqrt(V0)) vs det/(h22 sqrt(h11)) * mu1/(e1 c1) * exp(-m1 tau1 / 2)",
        g,
        det / (h22 * h11.sqrt()) * cert.mu1 / e1c1 * damp1,
        false,
    );
    let z = ConditionResult::new(
        CONDITION_NAMES[4],
        "sqrt(V0)/(1 - (q/eps) sqrt(V0)) vs sqrt(det)/sqrt(h11) * mu2/(e2 c2) * exp(-m2 tau2 / 2)",
        g,
        det.sqrt() / h11.sqrt() * cert.mu2 / e2c2 * damp2,
        false,
    );
    let conditions = vec![w1, w2, small, xy, z];
    let envelopes_valid = conditions.iter().all(|c| c.passed);
    Ok(TheoremReport {
        v0,
        conditions,
        envelopes_valid,
    })
}

/// Envelope `(bx, by, bz)` at time `t`.
pub fn predicted_envelope(cert: &LkCertificate, v0: f64, t: f64) -> Result<Vec3> {
    let denom = 1.0 - cert.q / cert.epsilon * v0.sqrt();
    if !(denom > 0.0) || v0 < 0.0 {
        return Err(Error::Domain(format!(
            "envelope needs sqrt(V0) < eps/q (V0 = {v0:e}, eps/q = {:e})",
            cert.epsilon / cert.q
        )));
    }
    let d = v0.sqrt() * (-cert.epsilon * t / 2.0).exp() / denom;
    let det = cert.h_minor();
    Ok([
        cert.h22().sqrt() / det.sqrt() * d,
        cert.h11().sqrt() / det.sqrt() * d,
        d / cert.h33().sqrt(),
    ])
}

/// `V0 exp(-eps t) / (1 - (q/eps) sqrt(V0))^2`
pub fn gronwall_bound(cert: &LkCertificate, v0: f64, t: f64) -> f64 {
    let denom = 1.0 - cert.q / cert.epsilon * v0.sqrt();
    v0 * (-cert.epsilon * t).exp() / (denom * denom)
}

/// One verification sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSample {
    pub t: f64,
    pub state: Vec3,
    pub v: f64,
    pub bound: Vec3,
    /// `bound - |deviation|` per component.
    pub margin: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub tolerance: f64,
    pub samples: Vec<EnvelopeSample>,
    pub worst_margin: Vec3,
    /// Samples where some `margin < -tolerance`.
    pub violations: usize,
    /// Samples where some `margin < 0`, for information.
    pub strict_violations: usize,
    /// Smallest `gronwall_bound + slack - V` over the samples.
    pub worst_gronwall_margin: f64,
    pub gronwall_violations: usize,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.gronwall_violations == 0
    }

    pub fn worst(&self) -> f64 {
        self.worst_margin.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `t,x,y,z,V,bound_x,bound_y,bound_z,margin_x,margin_y,margin_z`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record([
            "t", "x", "y", "z", "V", "bound_x", "bound_y", "bound_z", "margin_x", "margin_y", "margin_z",
        ])
        .map_err(io)?;
        for s in &self.samples {
            let vals = [
                s.t, s.state[0], s.state[1], s.state[2], s.v, s.bound[0], s.bound[1], s.bound[2], s.margin[0],
                s.margin[1], s.margin[2],
            ];
            w.write_record(vals.iter().map(|v| fmt17(*v))).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Compare the trajectory with the predicted envelope at `times`.
/// `solver_error` widens the tolerance to `1e-6 + 10 * solver_error`.
pub fn check_envelope(
    traj: &Trajectory,
    cert: &LkCertificate,
    report: &TheoremReport,
    times: &[f64],
    solver_error: f64,
) -> Result<EnvelopeReport> {
    if !report.envelopes_valid {
        return Err(Error::Domain("envelope check needs all admissibility conditions to pass".into()));
    }
    let tolerance = ENVELOPE_SLACK + SOLVER_ALLOWANCE_FACTOR * solver_error;
    let eq = [cert.lin.x0, cert.lin.y0, 0.0];
    let mut samples = Vec::with_capacity(times.len());
    let mut worst_margin = [f64::INFINITY; 3];
    let mut violations = 0;
    let mut strict_violations = 0;
    let mut worst_gronwall_margin = f64::INFINITY;
    let mut gronwall_violations = 0;
    for &t in times {
        let state = traj.sample(t)?;
        let bound = predicted_envelope(cert, report.v0, t)?;
        let margin: Vec3 = std::array::from_fn(|c| bound[c] - (state[c] - eq[c]).abs());
        for c in 0..3 {
            worst_margin[c] = worst_margin[c].min(margin[c]);
        }
        if margin.iter().any(|&m| m < -tolerance) {
            violations += 1;
        }
        if margin.iter().any(|&m| m < 0.0) {
            strict_violations += 1;
        }
        let v = eval_v_along(traj, cert, t)?;
        let gm = gronwall_bound(cert, report.v0, t) + GRONWALL_SLACK - v;
        worst_gronwall_margin = worst_gronwall_margin.min(gm);
        if gm < 0.0 {
            gronwall_violations += 1;
        }
        samples.push(EnvelopeSample {
            t,
            state,
            v,
            bound,
            margin,
        });
    }
    Ok(EnvelopeReport {
        tolerance,
        samples,
        worst_margin,
        violations,
        strict_violations,
        worst_gronwall_margin,
        gronwall_violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffIneqReport {
    /// Interior samples actually checked.
    pub checked: usize,
    pub violations: usize,
    /// Violations with the tolerance removed, for information.
    pub strict_violations: usize,
    /// Smallest `-eps V + q V^{3/2} + tol - dV/dt`.
    pub worst_slack: f64,
    pub worst_at: f64,
}

impl DiffIneqReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Central differences of `V` with step `fd_step` at every sample time that
/// leaves room on both sides, checked against `-eps V + q V^{3/2}`.
pub fn check_differential_inequality(
    traj: &Trajectory,
    cert: &LkCertificate,
    times: &[f64],
    fd_step: f64,
) -> Result<DiffIneqReport> {
    let mut rep = DiffIneqReport {
        checked: 0,
        violations: 0,
        strict_violations: 0,
        worst_slack: f64::INFINITY,
        worst_at: f64::NAN,
    };
    for &t in times {
        if t - fd_step < 0.0 || t + fd_step > traj.t_end() {
            continue;
        }
        let v = eval_v_along(traj, cert, t)?;
        let dv = (eval_v_along(traj, cert, t + fd_step)? - eval_v_along(traj, cert, t - fd_step)?) / (2.0 * fd_step);
        let rhs = -cert.epsilon * v + cert.q * v.max(0.0).powf(1.5);
        let slack = rhs + DIFF_INEQ_SLACK * (1.0 + v.abs()) - dv;
        rep.checked += 1;
        if slack < 0.0 {
            rep.violations += 1;
        }
        if dv > rhs {
            rep.strict_violations += 1;
        }
        if slack < rep.worst_slack {
            rep.worst_slack = slack;
            rep.worst_at = t;
        }
    }
    Ok(rep)
}

/// `sup ||u||` over consecutive windows `[T, T + width]` starting at zero,
/// evaluated at the trajectory nodes.
pub fn windowed_sup_norms(traj: &Trajectory, cert: &LkCertificate, width: f64) -> Vec<f64> {
    let eq = [cert.lin.x0, cert.lin.y0, 0.0];
    let n = (traj.t_end() / width).floor() as usize;
    let mut sups = vec![0.0f64; n];
    for (t, s) in traj.times().iter().zip(traj.states()) {
        let k = (t / width).floor() as usize;
        let norm = (0..3).map(|c| (s[c] - eq[c]).powi(2)).sum::<f64>().sqrt();
        if k < n {
            sups[k] = sups[k].max(norm);
        }
        // the right endpoint belongs to the previous window as well
        if k >= 1 && k - 1 < n && *t == k as f64 * width {
            sups[k - 1] = sups[k - 1].max(norm);
        }
    }
    sups
}

/// Halve the deviation of `hist` from `(x0, y0, 0)` until every
/// admissibility condition passes, at most `max_halvings` times.
pub fn scale_until_admissible(
    hist: &History,
    cert: &LkCertificate,
    p: &ModelParams,
    max_halvings: u32,
) -> Result<(History, TheoremReport, f64)> {
    let base = [cert.lin.x0, cert.lin.y0, 0.0];
    let mut lambda = 1.0;
    let mut current = hist.clone();
    for _ in 0..=max_halvings {
        let report = check_initial_conditions(&current, cert, p)?;
        if report.envelopes_valid {
            return Ok((current, report, lambda));
        }
        lambda *= 0.5;
        current = hist.scaled_about(base, lambda)?;
    }
    Err(Error::Inapplicable(format!(
        "history not admissible after {max_halvings} halvings of its deviation"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::build_certificate;
    use crate::history::HistoryShape;
    use crate::model::{derive_params, RawParams};
    use crate::sim::{estimate_solver_error, integrate, strided_indices};

    fn params() -> ModelParams {
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

    fn offset_history(p: &ModelParams, cert: &LkCertificate, offset: Vec3) -> History {
        History::new(
            HistoryShape::EquilibriumPlusConstant {
                base: [cert.lin.x0, cert.lin.y0, 0.0],
                offset,
            },
            p,
        )
        .unwrap()
    }

    #[test]
    fn extension_shifts_and_truncates() {
        let mut raw = *params().raw();
        raw.tau2 = 0.3;
        let p = derive_params(raw).unwrap();
        let cert = build_certificate(&p).unwrap();
        let ext = extend_history(&offset_history(&p, &cert, [0.01, 0.02, 0.03]), &cert);
        let v = ext.eval(-0.05).unwrap();
        assert!((v[0] - 0.01).abs() < 1e-15 && (v[1] - 0.02).abs() < 1e-15 && (v[2] - 0.03).abs() < 1e-15);
        // x lives only on [-tau1, 0]
        assert_eq!(ext.eval(-0.2).unwrap()[0], 0.0);
        assert!((ext.eval(-0.2).unwrap()[1] - 0.02).abs() < 1e-15);
        assert_eq!(ext.eval(-5.0).unwrap(), [0.0; 3]);
        assert!(ext.eval(0.1).is_err());
    }

    #[test]
    fn v0_zero_at_equilibrium_and_closed_form() {
        let p = params();
        let cert = build_certificate(&p).unwrap();
        let zero = extend_history(&offset_history(&p, &cert, [0.0; 3]), &cert);
        assert_eq!(eval_v0(&zero, &cert).unwrap(), 0.0);

        let delta = 0.01;
        let ext = extend_history(&offset_history(&p, &cert, [delta, 0.0, 0.0]), &cert);
        let v0 = eval_v0(&ext, &cert).unwrap();
        let e1c1y0 = p.e1() * p.c1() * cert.lin.y0;
        let k11 = cert.alpha * e1c1y0 * e1c1y0 + cert.mu1 * cert.h11();
        let expect =
            delta * delta * (cert.h11() + k11 * (1.0 - (-cert.m1 * cert.tau1).exp()) / cert.m1);
        assert!((v0 - expect).abs() <= 1e-8 * expect, "{v0} vs {expect}");
    }

    #[test]
    fn v0_is_quadratic() {
        let p = params();
        let cert = build_certificate(&p).unwrap();
        let h = History::new(
            HistoryShape::EquilibriumPlusSine {
                base: [cert.lin.x0, cert.lin.y0, 0.05],
                amplitude: [0.01, 0.02, 0.01],
                frequency: 9.0,
                phase: 0.2,
            },
            &p,
        )
        .unwrap();
        let base = [cert.lin.x0, cert.lin.y0, 0.0];
        let v = eval_v0(&extend_history(&h, &cert), &cert).unwrap();
        let h2 = h.scaled_about(base, 2.0).unwrap();
        let v2 = eval_v0(&extend_history(&h2, &cert), &cert).unwrap();
        assert!((v2 - 4.0 * v).abs() <= 1e-10 * v2);
    }

    #[test]
    fn equilibrium_history_passes_with_full_margins() {
        let p = params();
        let cert = build_certificate(&p).unwrap();
        let h = offset_history(&p, &cert, [0.0; 3]);
        let rep = check_initial_conditions(&h, &cert, &p).unwrap();
        assert_eq!(rep.v0, 0.0);
        assert!(rep.envelopes_valid);
        for c in &rep.conditions {
            assert_eq!(c.margin, c.rhs);
        }
        assert_eq!(predicted_envelope(&cert, 0.0, 3.0).unwrap(), [0.0; 3]);
    }

    #[test]
    fn window_condition_fails_by_one_percent() {
        let p = params();
        let cert = build_certificate(&p).unwrap();
        let rhs = check_initial_conditions(&offset_history(&p, &cert, [0.0; 3]), &cert, &p).unwrap().conditions[0].rhs;
        let h = offset_history(&p, &cert, [0.0, 1.01 * rhs, 0.0]);
        let rep = check_initial_conditions(&h, &cert, &p).unwrap();
        let c = rep.condition(CONDITION_NAMES[0]).unwrap();
        assert!(!c.passed && c.margin < 0.0);
        assert!(!rep.envelopes_valid);
        assert_eq!(c.analytic_lhs, Some(c.lhs));
    }

    #[test]
    fn margins_improve_when_shrinking() {
        let p = params();
        let cert = build_certificate(&p).unwrap();
        let base = [cert.lin.x0, cert.lin.y0, 0.0];
        let h = offset_history(&p, &cert, [1e-3, -1e-3, 1e-3]);
        let small = h.scaled_about(base, 0.1).unwrap();
        let a = check_initial_conditions(&h, &cert, &p).unwrap();
        let b = check_initial_conditions(&small, &cert, &p).unwrap();
        assert!((b.v0 - 0.01 * a.v0).abs() <= 1e-10 * a.v0);
        for (x, y) in a.conditions.iter().zip(&b.conditions) {
            assert!(y.margin > x.margin, "{}", x.name);
        }
    }

    #[test]
    fn envelope_arithmetic() {
        let p = params();
        let mut cert = build_certificate(&p).unwrap();
        cert.h = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        // (q/eps) sqrt(V0) = 1/2 with V0 = 0.01
        cert.q = 5.0 * cert.epsilon;
        let b = predicted_envelope(&cert, 0.01, 0.0).unwrap();
        for v in b {
            assert!((v - 0.2).abs() < 1e-15);
        }
        let later = predicted_envelope(&cert, 0.01, 2.0 / cert.epsilon).unwrap();
        assert!((b[0] / later[0] - std::f64::consts::E).abs() < 1e-12);
        assert!(predicted_envelope(&cert, 0.04, 0.0).is_err());
    }

    #[test]
    fn admissible_run_end_to_end() {
        let p = params();
        let cert = build_certificate(&p).unwrap();
        let h = offset_history(&p, &cert, [0.05, 0.05, 0.05]);
        let (h, rep, lambda) = scale_until_admissible(&h, &cert, &p, 60).unwrap();
        assert!(lambda <= 1.0 && rep.envelopes_valid);
        let traj = integrate(&p, &h, 10.0, None).unwrap();
        let err = estimate_solver_error(&traj).unwrap();
        let times: Vec<f64> = strided_indices(traj.times().len(), 200).into_iter().map(|i| traj.times()[i]).collect();
        let env = check_envelope(&traj, &cert, &rep, &times, err).unwrap();
        assert!(env.passed(), "worst {:?} gronwall {}", env.worst_margin, env.worst_gronwall_margin);
        let v0_along = eval_v_along(&traj, &cert, 0.0).unwrap();
        assert!((v0_along - rep.v0).abs() <= 1e-9);
        let di = check_differential_inequality(&traj, &cert, &times, traj.step()).unwrap();
        assert!(di.checked > 0 && di.passed(), "{di:?}");
    }

    #[test]
    fn equilibrium_run_is_flat() {
        let p = params();
        let cert = build_certificate(&p).unwrap();
        let h = offset_history(&p, &cert, [0.0; 3]);
        let rep = check_initial_conditions(&h, &cert, &p).unwrap();
        let traj = integrate(&p, &h, 1.0, None).unwrap();
        let times = [0.0, 0.25, 0.5, 1.0];
        let env = check_envelope(&traj, &cert, &rep, &times, 0.0).unwrap();
        assert!(env.passed());
        for s in &env.samples {
            assert!(s.v.abs() < 1e-20);
        }
        let di = check_differential_inequality(&traj, &cert, &times, traj.step()).unwrap();
        assert!(di.passed());
    }

    #[test]
    fn envelope_check_requires_admissibility() {
        let p = params();
        let cert = build_certificate(&p).unwrap();
        let h = offset_history(&p, &cert, [0.5, 0.5, 0.5]);
        let rep = check_initial_conditions(&h, &cert, &p).unwrap();
        assert!(!rep.envelopes_valid);
        let traj = integrate(&p, &h, 0.5, None).unwrap();
        assert!(check_envelope(&traj, &cert, &rep, &[0.1], 0.0).is_err());
    }

    #[test]
    fn report_text_lists_conditions() {
        let p = params();
        let cert = build_certificate(&p).unwrap();
        let rep = check_initial_conditions(&offset_history(&p, &cert, [0.0; 3]), &cert, &p).unwrap();
        let text = rep.to_text();
        for n in CONDITION_NAMES {
            assert!(text.contains(n));
        }
        assert!(text.contains("envelopes_valid = true"));
    }
}
