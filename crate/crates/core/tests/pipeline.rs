use std::fs;
use std::path::{Path, PathBuf};

use plankton_lk::acceptance::admissible_runs;
use plankton_lk::app::{run_loaded, sweep, EXIT_OK};
use plankton_lk::scenario::Scenario;
use plankton_lk::verify::{eval_v_along, predicted_envelope, windowed_sup_norms};

const PARAMS_B2_3: &str = r#"
[params]
r = 1.0
K = 1.0
c1 = 1.0
c2 = 1.0
d1 = 1.5
d2 = 1.0
b1 = 3.0
b2 = 3.0
tau1 = 0.1
tau2 = 0.1

[solver]
t_end = 2.0
"#;

fn write(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    fs::write(&p, body).unwrap();
    p
}

fn column(path: &Path, idx: usize) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

#[test]
fn d1_sweep_verdicts_follow_the_thresholds() {
    // e1 = e2 = 3 e^-0.1; stable for d1 in (e1 (1 - 1/e2), e1), unstable below.
    let e = 3.0 * (-0.1f64).exp();
    let lower = e * (1.0 - 1.0 / e);
    let values = [0.8, 1.2, 1.6, 1.8, 2.2, 2.6];
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), PARAMS_B2_3);
    let vals: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    sweep(&cfg, "params.d1", &vals, &dir.path().join("sw")).unwrap();
    let verdicts = column(&dir.path().join("sw/sweep.csv"), 1);
    for (d1, got) in values.iter().zip(&verdicts) {
        let want = if *d1 > lower && *d1 < e { "asymptotically-stable" } else { "unstable" };
        assert_eq!(got, want, "d1 = {d1}");
    }
}

#[test]
fn v0_grows_quadratically_until_admissibility_flips() {
    let body = PARAMS_B2_3.replace("b2 = 3.0", "b2 = 1.0")
        + "\n[history]\noffset = [0.05, -0.04, 0.02]\n\n[output]\ntrajectory = false\n";
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), &body);
    let scales: Vec<f64> = (0..8).map(|k| 2f64.powi(k - 7)).collect();
    let vals: Vec<String> = scales.iter().map(|v| v.to_string()).collect();
    let rows = sweep(&cfg, "history.scale", &vals, &dir.path().join("sw")).unwrap();
    for w in rows.windows(2) {
        let ratio = w[1].v0.unwrap() / w[0].v0.unwrap();
        assert!((ratio - 4.0).abs() < 4.0 * 1e-8, "ratio {ratio}");
    }
    let admissible: Vec<bool> = rows.iter().map(|r| r.admissible).collect();
    let flips = admissible.windows(2).filter(|w| w[0] != w[1]).count();
    assert!(admissible[0] && !admissible[admissible.len() - 1], "{admissible:?}");
    assert_eq!(flips, 1, "{admissible:?}");
}

#[test]
fn autoscaled_run_is_admissible_and_clean() {
    let body = PARAMS_B2_3.replace("b2 = 3.0", "b2 = 1.0")
        + "\n[history]\nkind = \"equilibrium_plus_sine\"\nbase = [0.55, 0.45, 0.0]\namplitude = [0.05, 0.04, 0.0]\nfrequency = 4.0\nautoscale = true\n";
    let s = Scenario::from_toml_str(&body).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let sum = run_loaded(&s, dir.path(), dir.path()).unwrap();
    assert_eq!(sum.exit_code, EXIT_OK, "{:?}", sum.reasons);
    assert!(sum.history_scale < 1.0);
    assert!(sum.theorem.unwrap().envelopes_valid);
}

// sup |u| over [T, T + 1] is not monotone in T: oscillatory decay trades
// deviation between components and can grow transiently. V is monotone,
// and the envelope dominates every window.
#[test]
fn lyapunov_functional_is_nonincreasing_on_admissible_runs() {
    for run in admissible_runs() {
        let v: Vec<f64> = run
            .sample_times
            .iter()
            .map(|&t| eval_v_along(&run.traj, &run.cert, t).unwrap())
            .collect();
        let tol = 1e-12 * run.report.v0;
        for (k, w) in v.windows(2).enumerate() {
            assert!(w[1] <= w[0] + tol, "sample {k}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn windowed_sup_stays_under_the_envelope() {
    for run in admissible_runs() {
        let sups = windowed_sup_norms(&run.traj, &run.cert, 1.0);
        for (k, s) in sups.iter().enumerate() {
            let env = predicted_envelope(&run.cert, run.report.v0, k as f64).unwrap();
            let bound = env.iter().map(|e| e * e).sum::<f64>().sqrt();
            assert!(*s <= bound + 1e-6 + 10.0 * run.solver_error, "window {k}: {s} > {bound}");
        }
        assert!(sups[sups.len() - 1] < sups[0]);
    }
}
