//! Scenario pipeline: classify, certify, simulate, verify, and write
//! the reports.
//!
//! Exit codes: 0 all requested checks passed, 2 the attraction estimate does
//! not apply (reported, not an error), 3 an envelope, inequality or
//! positivity check failed, 4 input error.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::certificate::{build_certificate_with, LkCertificate};
use crate::error::{Error, Result};
use crate::fmt17;
use crate::model::{classify_equilibria, linearize, ModelParams};
use crate::scenario::{load_scenario, parse_scalar, set_dotted, Scenario};
use crate::sim::{check_positivity_boundedness, estimate_solver_error, integrate, strided_indices, PositivityReport};
use crate::spectrum::{default_region, lemma_classify, root_scan, GridSpec, StabilityVerdict};
use crate::verify::{
    check_differential_inequality, check_envelope, check_initial_conditions, scale_until_admissible, DiffIneqReport,
    EnvelopeReport, TheoremReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INADMISSIBLE: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

/// Headline numbers of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub exit_code: i32,
    pub verdict: Option<StabilityVerdict>,
    pub certificate: Option<LkCertificate>,
    pub theorem: Option<TheoremReport>,
    pub envelope: Option<EnvelopeReport>,
    pub diff_ineq: Option<DiffIneqReport>,
    pub positivity: Option<PositivityReport>,
    /// Deviation scale applied by `history.autoscale`.
    pub history_scale: f64,
    /// Why the exit code is not zero.
    pub reasons: Vec<String>,
    pub out_dir: PathBuf,
}

impl RunSummary {
    fn new(out_dir: PathBuf) -> Self {
        RunSummary {
            exit_code: EXIT_OK,
            verdict: None,
            certificate: None,
            theorem: None,
            envelope: None,
            diff_ineq: None,
            positivity: None,
            history_scale: 1.0,
            reasons: Vec::new(),
            out_dir,
        }
    }

    /// Record an outcome; a violation outranks inadmissibility.
    fn flag(&mut self, code: i32, reason: String) {
        if self.exit_code == EXIT_OK || (code == EXIT_VIOLATION && self.exit_code == EXIT_INADMISSIBLE) {
            self.exit_code = code;
        }
        self.reasons.push(reason);
    }
}

/// Run the scenario at `config`; `out` overrides `output.dir`.
/// Returns `Err` only for input errors (exit code 4).
pub fn run_scenario(config: &Path, out: Option<&Path>) -> Result<RunSummary> {
    let scenario = load_scenario(config)?;
    let base_dir = config.parent().unwrap_or(Path::new("."));
    let out_dir = match out {
        Some(o) => o.to_path_buf(),
        None => base_dir.join(&scenario.output.dir),
    };
    run_loaded(&scenario, base_dir, &out_dir)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Pipeline on an already parsed scenario.
pub fn run_loaded(s: &Scenario, base_dir: &Path, out_dir: &Path) -> Result<RunSummary> {
    let p = s.model()?;
    let hist = s.build_history(&p, base_dir)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let o = &s.output;
    let mut sum = RunSummary::new(out_dir.to_path_buf());

    let verdict = lemma_classify(&p).ok();
    sum.verdict = verdict.clone();
    if o.equilibria {
        write_file(&out_dir.join("equilibria.txt"), &equilibria_text(s, &p, verdict.as_ref())?)?;
    }

    let cert = match build_certificate_with(&p, s.overrides) {
        Ok(c) => Some(c),
        Err(e @ (Error::Inapplicable(_) | Error::Unsupported(_) | Error::Construction(_) | Error::Domain(_))) => {
            sum.flag(EXIT_INADMISSIBLE, format!("no certificate: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    if o.certificate {
        let text = match &cert {
            Some(c) => c.report(),
            None => format!("# no certificate\n{}\n", sum.reasons.last().cloned().unwrap_or_default()),
        };
        write_file(&out_dir.join("certificate.txt"), &text)?;
    }

    let (hist, theorem) = match &cert {
        Some(c) if s.history.autoscale => match scale_until_admissible(&hist, c, &p, s.history.max_halvings) {
            Ok((h, rep, lambda)) => {
                sum.history_scale = lambda;
                (h, Some(rep))
            }
            Err(Error::Inapplicable(m)) => {
                let rep = check_initial_conditions(&hist, c, &p)?;
                sum.flag(EXIT_INADMISSIBLE, m);
                (hist, Some(rep))
            }
            Err(e) => return Err(e),
        },
        Some(c) => {
            let rep = check_initial_conditions(&hist, c, &p)?;
            (hist, Some(rep))
        }
        None => (hist, None),
    };
    if let Some(rep) = &theorem {
        for c in rep.failed() {
            sum.flag(
                EXIT_INADMISSIBLE,
                format!("condition {} fails (margin {})", c.name, fmt17(c.margin)),
            );
        }
    }

    let traj = integrate(&p, &hist, s.solver.t_end, s.solver.step)?;
    if o.trajectory {
        traj.write_csv(create(&out_dir.join("trajectory.csv"))?, s.solver.stride)?;
    }
    let pos = check_positivity_boundedness(&traj, &p);
    if !pos.nonnegative {
        sum.flag(EXIT_VIOLATION, format!("component below -1e-9: {}", fmt17(pos.min_component)));
    }
    if !pos.prey_bounded {
        sum.flag(EXIT_VIOLATION, format!("prey exceeds max(sup phi, K): {}", fmt17(pos.max_prey)));
    }
    sum.positivity = Some(pos);

    let mut solver_error = None;
    if let (Some(c), Some(rep)) = (&cert, &theorem) {
        if rep.envelopes_valid {
            let err = if s.solver.error_estimate { estimate_solver_error(&traj)? } else { 0.0 };
            solver_error = Some(err);
            let times: Vec<f64> = strided_indices(traj.times().len(), s.solver.verify_stride)
                .into_iter()
                .map(|i| traj.times()[i])
                .collect();
            let env = check_envelope(&traj, c, rep, &times, err)?;
            if env.violations > 0 {
                sum.flag(EXIT_VIOLATION, format!("{} envelope violations", env.violations));
            }
            if env.gronwall_violations > 0 {
                sum.flag(EXIT_VIOLATION, format!("{} Gronwall bound violations", env.gronwall_violations));
            }
            if o.verification {
                env.write_csv(create(&out_dir.join("verification.csv"))?)?;
            }
            let di = check_differential_inequality(&traj, c, &times, traj.step())?;
            if !di.passed() {
                sum.flag(EXIT_VIOLATION, format!("{} differential inequality violations", di.violations));
            }
            sum.envelope = Some(env);
            sum.diff_ineq = Some(di);
        }
    }

    sum.certificate = cert;
    sum.theorem = theorem;
    if o.report {
        write_file(&out_dir.join("report.txt"), &report_text(&sum, &traj, solver_error))?;
    }
    Ok(sum)
}

fn equilibria_text(s: &Scenario, p: &ModelParams, verdict: Option<&StabilityVerdict>) -> Result<String> {
    let mut out = String::new();
    let set = classify_equilibria(p);
    let _ = writeln!(out, "case = {}", set.case_id.number());
    let _ = writeln!(out, "e1 = {}", fmt17(p.e1()));
    let _ = writeln!(out, "e2 = {}", fmt17(p.e2()));
    let _ = writeln!(out, "zooplankton_threshold = {}", fmt17(p.zooplankton_threshold()));
    let _ = writeln!(out, "coexistence_threshold = {}", fmt17(p.coexistence_threshold()));
    for e in &set.points {
        let v = e.state;
        let _ = writeln!(out, "{} = [{}, {}, {}]", e.label.as_str(), fmt17(v[0]), fmt17(v[1]), fmt17(v[2]));
    }
    match verdict {
        Some(v) => {
            let _ = writeln!(out, "plankton_only_verdict = {}", v.kind.as_str());
            let _ = writeln!(out, "verdict_witness = {}", v.witness);
        }
        None => {
            let _ = writeln!(out, "plankton_only_verdict = n/a (no plankton-only equilibrium)");
        }
    }
    if s.spectrum.scan && verdict.is_some() {
        let lin = linearize(p)?;
        let grid = GridSpec {
            nx: s.spectrum.nx,
            ny: s.spectrum.ny,
        };
        match root_scan(&lin, p, default_region(&lin, p), grid) {
            Ok(rep) => {
                let r = rep.search_region;
                let _ = writeln!(
                    out,
                    "root_scan_region = [{}, {}] x [{}, {}]",
                    fmt17(r.re_min),
                    fmt17(r.re_max),
                    fmt17(r.im_min),
                    fmt17(r.im_max)
                );
                let _ = writeln!(out, "root_count = {}", rep.total_count);
                let _ = writeln!(out, "rightmost_real_part = {}", fmt17(rep.rightmost_real_part));
                let _ = writeln!(out, "unresolved_cells = {}", rep.unresolved.len());
                for root in &rep.roots {
                    let _ = writeln!(
                        out,
                        "root = {} {:+}i (multiplicity {}, residual {})",
                        fmt17(root.value.re),
                        root.value.im,
                        root.multiplicity,
                        fmt17(root.residual)
                    );
                }
            }
            Err(e) => {
                let _ = writeln!(out, "root_scan = failed: {e}");
            }
        }
    }
    Ok(out)
}

fn report_text(sum: &RunSummary, traj: &crate::sim::Trajectory, solver_error: Option<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "exit_code = {}", sum.exit_code);
    for r in &sum.reasons {
        let _ = writeln!(out, "reason = {r}");
    }
    let _ = writeln!(out, "history_scale = {}", fmt17(sum.history_scale));
    let _ = writeln!(out, "t_end = {}", fmt17(traj.t_end()));
    let _ = writeln!(out, "step = {}", fmt17(traj.step()));
    if let Some(e) = solver_error {
        let _ = writeln!(out, "solver_error_estimate = {}", fmt17(e));
    }
    let _ = writeln!(out, "\n## admissibility conditions");
    match &sum.theorem {
        Some(t) => out.push_str(&t.to_text()),
        None => out.push_str("not evaluated (no certificate)\n"),
    }
    let _ = writeln!(out, "\n## envelopes");
    match &sum.envelope {
        Some(e) => {
            let _ = writeln!(out, "samples = {}", e.samples.len());
            let _ = writeln!(out, "tolerance = {}", fmt17(e.tolerance));
            let _ = writeln!(out, "worst_margin_x = {}", fmt17(e.worst_margin[0]));
            let _ = writeln!(out, "worst_margin_y = {}", fmt17(e.worst_margin[1]));
            let _ = writeln!(out, "worst_margin_z = {}", fmt17(e.worst_margin[2]));
            let _ = writeln!(out, "violations = {}", e.violations);
            let _ = writeln!(out, "violations_without_tolerance = {}", e.strict_violations);
            let _ = writeln!(out, "worst_gronwall_margin = {}", fmt17(e.worst_gronwall_margin));
            let _ = writeln!(out, "gronwall_violations = {}", e.gronwall_violations);
        }
        None => out.push_str("not checked (estimate does not apply)\n"),
    }
    let _ = writeln!(out, "\n## differential inequality dV/dt <= -eps V + q V^(3/2)");
    match &sum.diff_ineq {
        Some(d) => {
            let _ = writeln!(out, "checked = {}", d.checked);
            let _ = writeln!(out, "violations = {}", d.violations);
            let _ = writeln!(out, "violations_without_tolerance = {}", d.strict_violations);
            let _ = writeln!(out, "worst_slack = {}", fmt17(d.worst_slack));
            let _ = writeln!(out, "worst_at = {}", fmt17(d.worst_at));
        }
        None => out.push_str("not checked (estimate does not apply)\n"),
    }
    let _ = writeln!(out, "\n## positivity and boundedness");
    if let Some(p) = &sum.positivity {
        let _ = writeln!(out, "min_component = {} (t = {}, component {})", fmt17(p.min_component), fmt17(p.min_at.0), ["x", "y", "z"][p.min_at.1]);
        let _ = writeln!(out, "nonnegative = {}", p.nonnegative);
        let _ = writeln!(out, "prey_bound = {}", fmt17(p.prey_bound));
        let _ = writeln!(out, "max_prey = {}", fmt17(p.max_prey));
        let _ = writeln!(out, "prey_bounded = {}", p.prey_bounded);
        let s = p.observed_sup;
        let _ = writeln!(out, "observed_sup = [{}, {}, {}]", fmt17(s[0]), fmt17(s[1]), fmt17(s[2]));
        let _ = writeln!(out, "# observed suprema over [0, t_end] only; no claim beyond t_end");
    }
    out
}

/// One row of a sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub verdict: String,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub q: Option<f64>,
    pub v0: Option<f64>,
    pub admissible: bool,
    pub worst_margin: Option<f64>,
    pub exit_code: i32,
}

/// Run the scenario once per value of the dotted `key`. Each run writes to
/// `out_dir/run_<index>`; the summary goes to `out_dir/sweep.csv`.
pub fn sweep(config: &Path, key: &str, values: &[String], out_dir: &Path) -> Result<Vec<SweepRow>> {
    let text = fs::read_to_string(config).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
    let tree: toml::Value = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
    let base_dir = config.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let mut rows = Vec::with_capacity(values.len());
    for (i, raw) in values.iter().enumerate() {
        let mut t = tree.clone();
        set_dotted(&mut t, key, parse_scalar(raw))?;
        let run_dir = out_dir.join(format!("run_{i:03}"));
        let result = Scenario::from_value(t).and_then(|s| run_loaded(&s, base_dir, &run_dir));
        rows.push(match result {
            Ok(sum) => SweepRow {
                value: raw.trim().to_string(),
                verdict: sum.verdict.as_ref().map_or("n/a".into(), |v| v.kind.as_str().to_string()),
                sigma: sum.certificate.as_ref().map(|c| c.sigma),
                epsilon: sum.certificate.as_ref().map(|c| c.epsilon),
                q: sum.certificate.as_ref().map(|c| c.q),
                v0: sum.theorem.as_ref().map(|t| t.v0),
                admissible: sum.theorem.as_ref().is_some_and(|t| t.envelopes_valid),
                worst_margin: sum.envelope.as_ref().map(|e| e.worst()),
                exit_code: sum.exit_code,
            },
            Err(_) => SweepRow {
                value: raw.trim().to_string(),
                verdict: "error".into(),
                sigma: None,
                epsilon: None,
                q: None,
                v0: None,
                admissible: false,
                worst_margin: None,
                exit_code: EXIT_INPUT,
            },
        });
    }
    write_sweep_csv(&out_dir.join("sweep.csv"), &rows)?;
    Ok(rows)
}

fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record([
        "value", "verdict", "sigma", "epsilon", "q", "V0", "admissible", "worst_margin", "exit_code",
    ])
    .map_err(io)?;
    let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.value.clone(),
            r.verdict.clone(),
            opt(r.sigma),
            opt(r.epsilon),
            opt(r.q),
            opt(r.v0),
            r.admissible.to_string(),
            opt(r.worst_margin),
            r.exit_code.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARAMS: &str = r#"
[params]
r = 1.0
K = 1.0
c1 = 1.0
c2 = 1.0
d1 = 1.5
d2 = 1.0
b1 = 3.0
b2 = 1.0
tau1 = 0.1
tau2 = 0.1
"#;

    fn write_config(dir: &Path, extra: &str) -> PathBuf {
        let path = dir.join("scenario.toml");
        fs::write(&path, format!("{PARAMS}{extra}")).unwrap();
        path
    }

    const SHORT: &str = "\n[solver]\nt_end = 2.0\nerror_estimate = false\n[spectrum]\nscan = false\n";

    #[test]
    fn equilibrium_history_exits_zero() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), SHORT);
        let sum = run_scenario(&cfg, None).unwrap();
        assert_eq!(sum.exit_code, EXIT_OK, "{:?}", sum.reasons);
        for f in ["equilibria.txt", "certificate.txt", "trajectory.csv", "verification.csv", "report.txt"] {
            assert!(dir.path().join("out").join(f).exists(), "{f}");
        }
        let env = sum.envelope.unwrap();
        assert_eq!(env.worst(), 0.0);
    }

    #[test]
    fn window_violation_exits_two_and_names_condition() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), &format!("{SHORT}\n[history]\noffset = [0.0, 0.3, 0.0]\n"));
        let sum = run_scenario(&cfg, Some(&dir.path().join("o"))).unwrap();
        assert_eq!(sum.exit_code, EXIT_INADMISSIBLE);
        let report = fs::read_to_string(dir.path().join("o/report.txt")).unwrap();
        assert!(report.contains("condition zooplankton_window_tau1 fails"), "{report}");
        assert!(!dir.path().join("o/verification.csv").exists());
    }

    #[test]
    fn autoscaled_perturbation_exits_zero() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            &format!("{SHORT}\n[history]\noffset = [0.05, 0.05, 0.05]\nautoscale = true\n"),
        );
        let sum = run_scenario(&cfg, None).unwrap();
        assert_eq!(sum.exit_code, EXIT_OK, "{:?}", sum.reasons);
        assert!(sum.history_scale < 1.0);
        assert!(sum.envelope.unwrap().worst() > 0.0);
    }

    #[test]
    fn zero_delay_and_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("z.toml");
        fs::write(&cfg, format!("{}{SHORT}", PARAMS.replace("tau1 = 0.1", "tau1 = 0.0"))).unwrap();
        assert_eq!(run_scenario(&cfg, None).unwrap().exit_code, EXIT_INADMISSIBLE);
        fs::write(&cfg, PARAMS.replace("r = 1.0", "r = -1.0")).unwrap();
        assert!(matches!(run_scenario(&cfg, None), Err(Error::InvalidParam { field: "r", .. })));
        fs::write(&cfg, "[params\n").unwrap();
        assert!(matches!(run_scenario(&cfg, None), Err(Error::Config(_))));
    }

    #[test]
    fn reruns_are_bitwise_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), &format!("{SHORT}\n[history]\noffset = [0.001, 0.0, 0.001]\n"));
        run_scenario(&cfg, Some(&dir.path().join("a"))).unwrap();
        run_scenario(&cfg, Some(&dir.path().join("b"))).unwrap();
        for f in ["equilibria.txt", "certificate.txt", "trajectory.csv", "report.txt"] {
            assert_eq!(
                fs::read(dir.path().join("a").join(f)).unwrap(),
                fs::read(dir.path().join("b").join(f)).unwrap(),
                "{f}"
            );
        }
    }

    #[test]
    fn sweep_rows_and_empty_sweep() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), SHORT);
        let values: Vec<String> = ["1.2", "1.5", "0.5", "-1"].iter().map(|s| s.to_string()).collect();
        let rows = sweep(&cfg, "params.d1", &values, &dir.path().join("sw")).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].verdict, "asymptotically-stable");
        assert_eq!(rows[1].verdict, "asymptotically-stable");
        // b2 = 1 keeps the coexistence threshold negative, so no unstable band
        assert_eq!(rows[2].verdict, "delay-dependent");
        assert_eq!(rows[3].verdict, "error");
        let text = fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
        assert_eq!(text.lines().count(), 5);
        let empty = sweep(&cfg, "params.d1", &[], &dir.path().join("sw2")).unwrap();
        assert!(empty.is_empty());
        assert_eq!(fs::read_to_string(dir.path().join("sw2/sweep.csv")).unwrap().lines().count(), 1);
    }
}
