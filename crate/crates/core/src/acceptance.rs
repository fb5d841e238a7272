//! Built-in acceptance suite, one function per criterion. Parameter sets
//! are drawn from `StdRng` with fixed seeds, so every run sees the same
//! cases. Used by the `acceptance` test target and `--seed-check`.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::certificate::{assemble_c, block_lower_bound, build_certificate, factored_l_minor, LkCertificate};
use crate::history::{History, HistoryShape};
use crate::model::{classify_equilibria, derive_params, linearize, rhs, ModelParams, RawParams};
use crate::numlin::{sym_eigen, SymMatrix};
use crate::sim::{check_positivity_boundedness, estimate_solver_error, integrate, strided_indices, Trajectory};
use crate::spectrum::{default_region, root_scan, GridSpec};
use crate::verify::{
    check_differential_inequality, check_envelope, check_initial_conditions, scale_until_admissible, TheoremReport,
};

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Set when the literal criterion cannot hold; the text explains why.
    pub structural_failure: Option<&'static str>,
    /// Result of the substitute evidence checked in that case.
    pub supplementary_passed: Option<bool>,
}

impl CriterionResult {
    fn new(id: u8, title: &'static str, passed: bool, detail: String) -> Self {
        CriterionResult {
            id,
            title,
            passed,
            detail,
            structural_failure: None,
            supplementary_passed: None,
        }
    }

    /// Passed, or failed only for the documented structural reason while
    /// the substitute evidence holds.
    pub fn acceptable(&self) -> bool {
        self.passed || (self.structural_failure.is_some() && self.supplementary_passed == Some(true))
    }

    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("criterion {} [{status}] {}: {}", self.id, self.title, self.detail);
        if let (Some(why), Some(sup)) = (self.structural_failure, self.supplementary_passed) {
            s.push_str(&format!(
                " | structural: {why}; supplementary evidence {}",
                if sup { "holds" } else { "FAILS" }
            ));
        }
        s
    }
}

fn base_raw(rng: &mut StdRng, tau: (f64, f64)) -> RawParams {
    RawParams {
        r: rng.gen_range(0.5..2.0),
        k: rng.gen_range(0.5..2.0),
        c1: rng.gen_range(0.5..2.0),
        c2: rng.gen_range(0.5..2.0),
        d1: 1.0,
        d2: rng.gen_range(0.3..2.0),
        b1: rng.gen_range(2.0..5.0),
        b2: rng.gen_range(1.0..4.0),
        tau1: rng.gen_range(tau.0..=tau.1),
        tau2: rng.gen_range(tau.0..=tau.1),
    }
}

/// Thresholds recomputed from the raw inputs: `(e1 c1 K, coexistence)`.
fn thresholds(raw: &RawParams) -> (f64, f64) {
    let e1 = raw.b1 * (-raw.c1 * raw.tau1).exp();
    let e2 = raw.b2 * (-raw.c2 * raw.tau2).exp();
    let thr2 = e1 * raw.c1 * raw.k;
    let thr3 = thr2 * (1.0 - raw.c1 * raw.d2 / (e2 * raw.c2 * raw.r));
    (thr2, thr3)
}

/// Parameters with `d1` strictly inside the delay-independent stable band.
pub fn sample_stable(rng: &mut StdRng, tau: (f64, f64)) -> ModelParams {
    let mut raw = base_raw(rng, tau);
    let (thr2, thr3) = thresholds(&raw);
    let lower = thr2 * (1.0f64 / 3.0).max(thr3 / thr2);
    raw.d1 = lower + rng.gen_range(0.05..0.95) * (thr2 - lower);
    derive_params(raw).expect("sampled parameters are valid")
}

/// Parameters with `d1` strictly below the coexistence threshold.
pub fn sample_unstable(rng: &mut StdRng, tau: (f64, f64)) -> ModelParams {
    loop {
        let mut raw = base_raw(rng, tau);
        let (_, thr3) = thresholds(&raw);
        if thr3 > 0.05 {
            raw.d1 = thr3 * rng.gen_range(0.05..0.95);
            return derive_params(raw).expect("sampled parameters are valid");
        }
    }
}

/// Every returned point zeroes the vector field, and the case matches the thresholds.
pub fn criterion_1() -> CriterionResult {
    let mut rng = StdRng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    let mut per_case = [0usize; 3];
    for i in 0..200 {
        let mut raw = base_raw(&mut rng, (0.0, 0.5));
        let (thr2, mut thr3) = thresholds(&raw);
        let target = i % 3;
        if target == 2 && thr3 <= 0.05 {
            // make coexistence reachable: raise the fish conversion
            raw.b2 = 4.0 * raw.c1 * raw.d2 / (raw.c2 * raw.r) * (raw.c2 * raw.tau2).exp();
            thr3 = thresholds(&raw).1;
        }
        raw.d1 = match target {
            0 => thr2 * rng.gen_range(1.0..2.0),
            1 => {
                let lo = thr3.max(0.0);
                lo + rng.gen_range(0.0..1.0) * (thr2 - lo)
            }
            _ => thr3 * rng.gen_range(0.01..0.99),
        };
        if raw.d1 <= 0.0 {
            raw.d1 = 1e-3 * thr2;
        }
        let p = derive_params(raw).expect("valid");
        let expected = if raw.d1 >= thr2 {
            1
        } else if raw.d1 >= thr3 {
            2
        } else {
            3
        };
        let set = classify_equilibria(&p);
        per_case[expected as usize - 1] += 1;
        if set.case_id.number() != expected || set.points.len() != expected as usize + 1 {
            mismatches += 1;
        }
        for e in &set.points {
            let f = rhs(&e.state, &e.state, &e.state, &p);
            worst = f.iter().fold(worst, |m, v| m.max(v.abs()));
        }
    }
    CriterionResult::new(
        1,
        "equilibrium correctness",
        worst <= 1e-12 && mismatches == 0,
        format!(
            "200 sets (cases 1/2/3: {}/{}/{}), max |rhs| = {worst:.3e} (tol 1e-12), case mismatches = {mismatches}",
            per_case[0], per_case[1], per_case[2]
        ),
    )
}

/// Root scans agree with the delay-independent stability test.
pub fn criterion_2() -> CriterionResult {
    let mut rng = StdRng::seed_from_u64(202);
    let mut wrong = 0;
    let mut max_stable = f64::NEG_INFINITY;
    let mut min_unstable = f64::INFINITY;
    for _ in 0..20 {
        let p = sample_stable(&mut rng, (0.01, 0.5));
        let lin = linearize(&p).expect("stable band has the plankton point");
        match root_scan(&lin, &p, default_region(&lin, &p), GridSpec::default()) {
            Ok(r) if r.rightmost_real_part < 0.0 => max_stable = max_stable.max(r.rightmost_real_part),
            _ => wrong += 1,
        }
    }
    for _ in 0..20 {
        let p = sample_unstable(&mut rng, (0.01, 0.5));
        let lin = linearize(&p).expect("unstable band has the plankton point");
        match root_scan(&lin, &p, default_region(&lin, &p), GridSpec::default()) {
            Ok(r) if r.has_root_with_positive_real_part() => min_unstable = min_unstable.min(r.rightmost_real_part),
            _ => wrong += 1,
        }
    }
    CriterionResult::new(
        2,
        "stability test corroboration",
        wrong == 0,
        format!(
            "20 stable + 20 unstable sets, misclassifications = {wrong}, max rightmost Re (stable) = {max_stable:.3e}, min rightmost Re (unstable) = {min_unstable:.3e}"
        ),
    )
}

/// The 20 certificate parameter sets shared by criteria 3 and 4.
pub fn certificate_sets() -> Vec<(ModelParams, LkCertificate)> {
    let mut rng = StdRng::seed_from_u64(303);
    (0..20)
        .map(|_| {
            let p = sample_stable(&mut rng, (0.01, 0.5));
            let c = build_certificate(&p).expect("stable band satisfies the rate inequalities");
            (p, c)
        })
        .collect()
}

/// Certificate construction, definiteness of the 9x9 block matrix and
/// tightness of `sigma`.
pub fn criterion_3() -> CriterionResult {
    let mut rng = StdRng::seed_from_u64(303);
    let mut built = 0;
    let mut full_pd = 0;
    let mut support_pd = 0;
    let mut bound_ok = 0;
    let mut sigma_ok = 0;
    let mut min_full = f64::INFINITY;
    let mut kernel_dims = Vec::new();
    for _ in 0..20 {
        let p = sample_stable(&mut rng, (0.01, 0.5));
        let Ok(cert) = build_certificate(&p) else { continue };
        built += 1;
        let c = assemble_c(&cert);
        min_full = min_full.min(c.full.min_eigenvalue);
        if c.full.positive_definite && c.full.min_eigenvalue > 0.0 {
            full_pd += 1;
        }
        if c.on_support.positive_definite {
            support_pd += 1;
        }
        kernel_dims.push(c.structural_kernel_dim());
        let diff = c.matrix.sub(&block_lower_bound(&cert));
        if sym_eigen(&diff).map(|e| e.min()).unwrap_or(f64::NEG_INFINITY) >= -1e-10 * c.matrix.frobenius_norm() {
            bound_ok += 1;
        }
        let l = SymMatrix::try_from_mat3(&cert.l).expect("L is symmetric");
        let h = SymMatrix::try_from_mat3(&cert.h).expect("H is symmetric");
        let gap = sym_eigen(&l.sub(&h.scale(cert.sigma))).map(|e| e.min()).unwrap_or(f64::NEG_INFINITY);
        if gap >= -1e-10 * l.frobenius_norm() {
            sigma_ok += 1;
        }
    }
    kernel_dims.sort_unstable();
    kernel_dims.dedup();
    let mut r = CriterionResult::new(
        3,
        "certificate soundness",
        built == 20 && full_pd == 20 && sigma_ok == 20,
        format!(
            "built {built}/20, full 9x9 C positive definite {full_pd}/20 (min eigenvalue {min_full:.3e}), L - sigma H >= -1e-10|L| {sigma_ok}/20"
        ),
    );
    if full_pd < 20 {
        r.structural_failure = Some(
            "C has identically zero rows for z(t-tau1), x(t-tau2), y(t-tau2), so its smallest eigenvalue is exactly 0",
        );
        r.supplementary_passed = Some(built == 20 && support_pd == 20 && bound_ok == 20 && sigma_ok == 20);
        r.detail.push_str(&format!(
            "; structural kernel dims {kernel_dims:?}, C positive definite on its support {support_pd}/20, C >= diag(L-R1-R2, e^(-m1 tau1) R1, e^(-m2 tau2) R2) {bound_ok}/20"
        ));
    }
    r
}

/// The factored leading minor of `L` against the computed one.
pub fn criterion_4() -> CriterionResult {
    let mut worst: f64 = 0.0;
    let sets = certificate_sets();
    for (p, c) in &sets {
        let direct = c.l[0][0] * c.l[1][1] - c.l[0][1] * c.l[1][0];
        let factored = factored_l_minor(c, p);
        worst = worst.max((direct - factored).abs() / direct.abs().max(factored.abs()));
    }
    CriterionResult::new(
        4,
        "closed-form minor cross-check",
        worst <= 1e-10,
        format!("{} sets, max relative difference {worst:.3e} (tol 1e-10)", sets.len()),
    )
}

fn logistic(r: f64, k: f64, x0: f64, t: f64) -> f64 {
    k * x0 * (r * t).exp() / (k + x0 * ((r * t).exp() - 1.0))
}

fn decoupled(tau: f64) -> ModelParams {
    derive_params(RawParams {
        r: 1.0,
        k: 1.0,
        c1: 0.0,
        c2: 0.0,
        d1: 1.0,
        d2: 1.0,
        b1: 1.0,
        b2: 1.0,
        tau1: tau,
        tau2: tau,
    })
    .expect("valid")
}

/// Solver accuracy and order on the decoupled logistic case.
pub fn criterion_5() -> CriterionResult {
    let (x0, t) = (0.1, 10.0);
    let run = |p: &ModelParams, step: Option<f64>| -> Option<f64> {
        let h = History::new(HistoryShape::Constant([x0, 0.2, 0.1]), p).ok()?;
        let tr = integrate(p, &h, t, step).ok()?;
        Some((tr.sample(t).ok()?[0] - logistic(1.0, 1.0, x0, t)).abs())
    };
    let err_default = run(&decoupled(0.1), None).unwrap_or(f64::INFINITY);
    // with c1 = c2 = 0 the delays do not act on x, so long delays permit long steps
    let wide = decoupled(4.0);
    let (e1, e2) = (
        run(&wide, Some(0.2)).unwrap_or(f64::INFINITY),
        run(&wide, Some(0.1)).unwrap_or(f64::INFINITY),
    );
    let order = (e1 / e2).log2();
    CriterionResult::new(
        5,
        "solver order",
        err_default <= 1e-8 && order >= 3.5,
        format!("error at t=10 with default step {err_default:.3e} (tol 1e-8), observed order {order:.3} (min 3.5)"),
    )
}

/// One admissible scenario for criteria 6 to 9.
pub struct AdmissibleRun {
    pub params: ModelParams,
    pub cert: LkCertificate,
    pub history: History,
    pub report: TheoremReport,
    pub scale: f64,
    pub traj: Trajectory,
    pub solver_error: f64,
    pub sample_times: Vec<f64>,
}

/// Horizon of the admissible runs.
pub const ADMISSIBLE_T_END: f64 = 50.0;

/// Ten admissible scenarios built by halving random perturbations of the
/// plankton-only point until every admissibility condition holds.
pub fn admissible_runs() -> Vec<AdmissibleRun> {
    let mut rng = StdRng::seed_from_u64(606);
    let mut runs = Vec::new();
    while runs.len() < 10 {
        let p = sample_stable(&mut rng, (0.01, 0.5));
        let cert = build_certificate(&p).expect("stable band admits a certificate");
        let (x0, y0) = (cert.lin.x0, cert.lin.y0);
        let sine = rng.gen_bool(0.5);
        let dir: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(0.2..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }, rng.gen_range(0.2..1.0)];
        let amp = 0.5 * x0.min(y0);
        let shape = if sine {
            HistoryShape::EquilibriumPlusSine {
                base: [x0, y0, amp],
                amplitude: [dir[0] * amp, dir[1] * amp, amp * 0.5],
                frequency: rng.gen_range(1.0..20.0),
                phase: rng.gen_range(0.0..6.0),
            }
        } else {
            HistoryShape::EquilibriumPlusConstant {
                base: [x0, y0, 0.0],
                offset: [dir[0] * amp, dir[1] * amp, dir[2] * amp],
            }
        };
        let Ok(hist) = History::new(shape, &p) else { continue };
        let Ok((history, report, scale)) = scale_until_admissible(&hist, &cert, &p, 80) else { continue };
        let traj = integrate(&p, &history, ADMISSIBLE_T_END, None).expect("admissible runs stay finite");
        let solver_error = estimate_solver_error(&traj).expect("half-step run succeeds");
        // about 500 samples over the horizon
        let stride = (traj.times().len() / 500).max(1);
        let sample_times = strided_indices(traj.times().len(), stride)
            .into_iter()
            .map(|i| traj.times()[i])
            .filter(|&t| t > 0.0)
            .collect();
        runs.push(AdmissibleRun {
            params: p,
            cert,
            history,
            report,
            scale,
            traj,
            solver_error,
            sample_times,
        });
    }
    runs
}

/// Envelope and Gronwall containment on the admissible runs.
pub fn criterion_6(runs: &[AdmissibleRun]) -> CriterionResult {
    let mut failures = 0;
    let mut worst: f64 = f64::INFINITY;
    let mut worst_gronwall: f64 = f64::INFINITY;
    let mut samples = 0;
    let mut strict = 0;
    let v0 = runs.iter().map(|r| r.report.v0).fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    let scale = runs.iter().map(|r| r.scale).fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    for r in runs {
        match check_envelope(&r.traj, &r.cert, &r.report, &r.sample_times, r.solver_error) {
            Ok(env) => {
                samples += env.samples.len();
                strict += env.strict_violations;
                worst = worst.min(env.worst() + env.tolerance);
                worst_gronwall = worst_gronwall.min(env.worst_gronwall_margin);
                if !env.passed() {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    CriterionResult::new(
        6,
        "envelope reproduction",
        failures == 0 && runs.len() == 10,
        format!(
            "{} runs on (0, {ADMISSIBLE_T_END}], {samples} samples, failing runs = {failures}, worst margin incl. tolerance {worst:.3e}, samples outside the envelope without tolerance = {strict}, worst Gronwall margin {worst_gronwall:.3e}, V0 in [{:.3e}, {:.3e}], deviation scale in [{:.3e}, {:.3e}]",
            runs.len(), v0.0, v0.1, scale.0, scale.1
        ),
    )
}

/// The differential inequality for `V` on the admissible runs.
pub fn criterion_7(runs: &[AdmissibleRun]) -> CriterionResult {
    let mut failures = 0;
    let mut checked = 0;
    let mut strict = 0;
    let mut worst = f64::INFINITY;
    for r in runs {
        match check_differential_inequality(&r.traj, &r.cert, &r.sample_times, r.traj.step()) {
            Ok(d) => {
                checked += d.checked;
                strict += d.strict_violations;
                worst = worst.min(d.worst_slack);
                if !d.passed() {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    CriterionResult::new(
        7,
        "differential inequality",
        failures == 0 && checked > 0,
        format!("{checked} interior samples, failing runs = {failures}, worst slack {worst:.3e}, samples violating without tolerance = {strict}"),
    )
}

/// Quadratic scaling of `V0` and monotone margins.
pub fn criterion_8(runs: &[AdmissibleRun]) -> CriterionResult {
    let mut worst_rel: f64 = 0.0;
    let mut not_improved = 0;
    for r in runs {
        let base = [r.cert.lin.x0, r.cert.lin.y0, 0.0];
        for lambda in [0.5, 0.25] {
            let Ok(h) = r.history.scaled_about(base, lambda) else {
                not_improved += 1;
                continue;
            };
            let Ok(rep) = check_initial_conditions(&h, &r.cert, &r.params) else {
                not_improved += 1;
                continue;
            };
            let expect = lambda * lambda * r.report.v0;
            worst_rel = worst_rel.max((rep.v0 - expect).abs() / expect);
            for (a, b) in r.report.conditions.iter().zip(&rep.conditions) {
                if !(b.margin > a.margin) {
                    not_improved += 1;
                }
            }
        }
    }
    CriterionResult::new(
        8,
        "quadratic scaling",
        worst_rel <= 1e-8 && not_improved == 0,
        format!(
            "{} runs x 2 factors, max relative V0 error {worst_rel:.3e} (tol 1e-8), margins not improved = {not_improved}",
            runs.len()
        ),
    )
}

/// Positivity and the prey bound across every simulated scenario.
pub fn criterion_9(runs: &[AdmissibleRun]) -> CriterionResult {
    let mut trajectories: Vec<(Trajectory, ModelParams)> =
        runs.iter().map(|r| (r.traj.clone(), r.params)).collect();
    let mut rng = StdRng::seed_from_u64(909);
    for _ in 0..10 {
        let p = sample_stable(&mut rng, (0.01, 0.5));
        let v = [rng.gen_range(0.01..3.0), rng.gen_range(0.0..20.0), rng.gen_range(0.0..5.0)];
        if let Ok(h) = History::new(HistoryShape::Constant(v), &p) {
            if let Ok(t) = integrate(&p, &h, 20.0, None) {
                trajectories.push((t, p));
            }
        }
    }
    for tau in [0.1, 4.0] {
        let p = decoupled(tau);
        if let Ok(h) = History::new(HistoryShape::Constant([0.1, 0.2, 0.1]), &p) {
            if let Ok(t) = integrate(&p, &h, 10.0, None) {
                trajectories.push((t, p));
            }
        }
    }
    let mut min_component = f64::INFINITY;
    let mut worst_prey = f64::NEG_INFINITY;
    let mut failures = 0;
    for (t, p) in &trajectories {
        let rep = check_positivity_boundedness(t, p);
        min_component = min_component.min(rep.min_component);
        worst_prey = worst_prey.max(rep.max_prey - rep.prey_bound);
        if !rep.passed() {
            failures += 1;
        }
    }
    CriterionResult::new(
        9,
        "positivity and boundedness",
        failures == 0,
        format!(
            "{} trajectories, min component {min_component:.3e} (tol -1e-9), max x - max(sup phi, K) = {worst_prey:.3e} (tol 1e-6)",
            trajectories.len()
        ),
    )
}

/// Run every criterion in order.
pub fn run_all() -> Vec<CriterionResult> {
    let mut out = vec![criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5()];
    let runs = admissible_runs();
    out.push(criterion_6(&runs));
    out.push(criterion_7(&runs));
    out.push(criterion_8(&runs));
    out.push(criterion_9(&runs));
    out
}
