//! Fixed-step RK4 with cubic Hermite dense output for the two-delay system.
//!
//! Step sizes stay below `tau / 20`, so every delayed lookup inside a step
//! lands in the history or in an already completed step (method of steps).
//! A zero delay reads the current stage state, which turns that term into
//! an ordinary one.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt17;
use crate::history::History;
use crate::model::{rhs, ModelParams};
use crate::numlin::Vec3;

/// Components may dip this far below zero before a positivity failure.
pub const POSITIVITY_TOL: f64 = 1e-9;
/// Slack on the logistic bound for the prey component.
pub const PREY_BOUND_TOL: f64 = 1e-6;
/// Upper bound on `h / tau` for every positive delay.
pub const STEPS_PER_DELAY: f64 = 20.0;

/// `min(tau1, tau2, 0.01) / 20`, ignoring zero delays.
pub fn default_step(p: &ModelParams) -> f64 {
    [p.tau1(), p.tau2()]
        .into_iter()
        .filter(|&t| t > 0.0)
        .fold(0.01, f64::min)
        / STEPS_PER_DELAY
}

/// A completed numerical solution. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    params: ModelParams,
    history: History,
    t_end: f64,
    step: f64,
    times: Vec<f64>,
    states: Vec<Vec3>,
    derivs: Vec<Vec3>,
    observed_sup: Vec3,
}

impl Trajectory {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    pub fn history(&self) -> &History {
        &self.history
    }
    pub fn t_end(&self) -> f64 {
        self.t_end
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn states(&self) -> &[Vec3] {
        &self.states
    }
    pub fn derivs(&self) -> &[Vec3] {
        &self.derivs
    }
    /// Componentwise suprema over the nodes in `[0, t_end]`.
    pub fn observed_sup(&self) -> Vec3 {
        self.observed_sup
    }

    /// State at `t`: history for `t < 0`, Hermite interpolation otherwise.
    pub fn sample(&self, t: f64) -> Result<Vec3> {
        if t > self.t_end {
            return Err(Error::Domain(format!("sample time {t} beyond t_end = {}", self.t_end)));
        }
        lookup(&self.history, &self.times, &self.states, &self.derivs, t)
    }

    /// Write `t,x,y,z` for every `stride`-th node and the final node.
    pub fn write_csv<W: Write>(&self, out: W, stride: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["t", "x", "y", "z"]).map_err(io)?;
        for i in strided_indices(self.times.len(), stride) {
            let s = self.states[i];
            w.write_record([fmt17(self.times[i]), fmt17(s[0]), fmt17(s[1]), fmt17(s[2])])
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Every `stride`-th index of `0..n`, always including the last one.
pub fn strided_indices(n: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if n > 0 && idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    idx
}

fn hermite(t0: f64, t1: f64, y0: &Vec3, y1: &Vec3, f0: &Vec3, f1: &Vec3, t: f64) -> Vec3 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    std::array::from_fn(|c| h00 * y0[c] + h10 * h * f0[c] + h01 * y1[c] + h11 * h * f1[c])
}

/// Dense lookup over completed nodes. `derivs` may be one shorter than
/// `states` only if `t` does not reach the last interval.
fn lookup(history: &History, times: &[f64], states: &[Vec3], derivs: &[Vec3], t: f64) -> Result<Vec3> {
    if t < 0.0 {
        return history.eval(t);
    }
    let j = times.partition_point(|&v| v <= t);
    if j == 0 {
        return Err(Error::Domain(format!("lookup at {t} before the first node")));
    }
    let j = j - 1;
    if times[j] == t {
        return Ok(states[j]);
    }
    if j + 1 >= times.len() || j + 1 >= derivs.len() {
        return Err(Error::Domain(format!("lookup at {t} beyond the completed steps")));
    }
    Ok(hermite(
        times[j],
        times[j + 1],
        &states[j],
        &states[j + 1],
        &derivs[j],
        &derivs[j + 1],
        t,
    ))
}

/// Integrate on `[0, t_end]`. `step` defaults to [`default_step`] and must
/// not exceed `tau / 20` for any positive delay.
pub fn integrate(p: &ModelParams, hist: &History, t_end: f64, step: Option<f64>) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParam {
            field: "t_end",
            reason: format!("must be finite and > 0, got {t_end}"),
        });
    }
    let h = step.unwrap_or_else(|| default_step(p));
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParam {
            field: "step",
            reason: format!("must be finite and > 0, got {h}"),
        });
    }
    for (name, tau) in [("tau1", p.tau1()), ("tau2", p.tau2())] {
        if tau > 0.0 && h > tau / STEPS_PER_DELAY * (1.0 + 1e-12) {
            return Err(Error::InvalidParam {
                field: "step",
                reason: format!("step {h} exceeds {name}/20 = {}", tau / STEPS_PER_DELAY),
            });
        }
    }
    if hist.window(0) != p.tau1() || hist.window(2) != p.tau2() {
        return Err(Error::Domain("history windows do not match the model delays".into()));
    }

    let n_steps = ((t_end / h) - 1e-9).ceil().max(1.0) as usize;
    let node_time = |k: usize| if k >= n_steps { t_end } else { (k as f64 * h).min(t_end) };
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut derivs: Vec<Vec3> = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    states.push(hist.eval(0.0)?);

    let (tau1, tau2) = (p.tau1(), p.tau2());
    let field = |times: &[f64], states: &[Vec3], derivs: &[Vec3], t: f64, y: &Vec3| -> Result<Vec3> {
        let d1 = if tau1 == 0.0 { *y } else { lookup(hist, times, states, derivs, t - tau1)? };
        let d2 = if tau2 == 0.0 { *y } else { lookup(hist, times, states, derivs, t - tau2)? };
        Ok(rhs(y, &d1, &d2, p))
    };

    for k in 0..n_steps {
        let t0 = times[k];
        let t1 = node_time(k + 1);
        let dt = t1 - t0;
        let y = states[k];
        let k1 = field(&times, &states, &derivs, t0, &y)?;
        derivs.push(k1);
        let axpy = |a: &Vec3, s: f64| -> Vec3 { std::array::from_fn(|c| y[c] + s * a[c]) };
        let k2 = field(&times, &states, &derivs, t0 + 0.5 * dt, &axpy(&k1, 0.5 * dt))?;
        let k3 = field(&times, &states, &derivs, t0 + 0.5 * dt, &axpy(&k2, 0.5 * dt))?;
        let k4 = field(&times, &states, &derivs, t1, &axpy(&k3, dt))?;
        let next: Vec3 = std::array::from_fn(|c| y[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                t: t1,
                reason: format!("non-finite state {next:?}"),
            });
        }
        times.push(t1);
        states.push(next);
    }
    let last = states.len() - 1;
    let f_end = field(&times, &states, &derivs, times[last], &states[last])?;
    derivs.push(f_end);

    let observed_sup = states.iter().fold([f64::NEG_INFINITY; 3], |acc, s| std::array::from_fn(|c| acc[c].max(s[c])));
    Ok(Trajectory {
        params: *p,
        history: hist.clone(),
        t_end,
        step: h,
        times,
        states,
        derivs,
        observed_sup,
    })
}

/// Maximum nodewise difference between the run at `step` and at `step / 2`,
/// inflated by the Richardson factor `16/15`. An estimate of the global
/// error of the coarse run.
pub fn estimate_solver_error(traj: &Trajectory) -> Result<f64> {
    let fine = integrate(traj.params(), traj.history(), traj.t_end(), Some(traj.step() / 2.0))?;
    let mut worst: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let f = fine.sample(*t)?;
        for c in 0..3 {
            worst = worst.max((f[c] - s[c]).abs());
        }
    }
    Ok(worst * 16.0 / 15.0)
}

/// Positivity and boundedness of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    /// Smallest component over all nodes, with its time and component index.
    pub min_component: f64,
    pub min_at: (f64, usize),
    pub nonnegative: bool,
    /// `max(sup phi, K)`
    pub prey_bound: f64,
    pub max_prey: f64,
    pub prey_bounded: bool,
    pub observed_sup: Vec3,
}

impl PositivityReport {
    pub fn passed(&self) -> bool {
        self.nonnegative && self.prey_bounded
    }
}

pub fn check_positivity_boundedness(traj: &Trajectory, p: &ModelParams) -> PositivityReport {
    let mut min = (f64::INFINITY, 0.0, 0);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        for (c, &v) in s.iter().enumerate() {
            if v < min.0 {
                min = (v, *t, c);
            }
        }
    }
    let prey_bound = traj.history.sup_x().max(p.k());
    let max_prey = traj.observed_sup[0];
    PositivityReport {
        min_component: min.0,
        min_at: (min.1, min.2),
        nonnegative: min.0 >= -POSITIVITY_TOL,
        prey_bound,
        max_prey,
        prey_bounded: max_prey <= prey_bound + PREY_BOUND_TOL,
        observed_sup: traj.observed_sup,
    }
}
