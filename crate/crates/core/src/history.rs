//! Initial functions on the delay windows.
//!
//! The prey component lives on `[-tau1, 0]`, the zooplankton component on
//! `[-tau_max, 0]` and the fish component on `[-tau2, 0]`. Every shape is
//! defined on the whole of `[-tau_max, 0]`; the per-component windows only
//! matter for validation and window maxima.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numlin::Vec3;

/// Points in the dense grid used for window maxima, endpoints included.
pub const WINDOW_GRID_POINTS: usize = 1026;

#[derive(Debug, Clone, PartialEq)]
pub enum HistoryShape {
    Constant(Vec3),
    EquilibriumPlusConstant {
        base: Vec3,
        offset: Vec3,
    },
    /// `base + amplitude * sin(frequency * theta + phase)`, componentwise.
    EquilibriumPlusSine {
        base: Vec3,
        amplitude: Vec3,
        frequency: f64,
        phase: f64,
    },
    Table(Table),
}

/// Samples `(theta, x, y, z)` joined by a natural cubic spline per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    theta: Vec<f64>,
    values: [Vec<f64>; 3],
    /// Spline second derivatives at the nodes.
    curvature: [Vec<f64>; 3],
}

#[derive(Debug, Deserialize)]
struct TableRow {
    theta: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Table {
    pub fn new(theta: Vec<f64>, values: [Vec<f64>; 3]) -> Result<Self> {
        let n = theta.len();
        if n < 2 {
            return Err(Error::Config("history table needs at least two rows".into()));
        }
        if values.iter().any(|v| v.len() != n) {
            return Err(Error::Dimension("history table columns have different lengths".into()));
        }
        if theta.iter().chain(values.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Config("history table contains a non-finite value".into()));
        }
        if let Some(w) = theta.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "history table theta must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let curvature = [
            natural_spline_curvature(&theta, &values[0]),
            natural_spline_curvature(&theta, &values[1]),
            natural_spline_curvature(&theta, &values[2]),
        ];
        Ok(Table {
            theta,
            values,
            curvature,
        })
    }

    /// Read a CSV file with header `theta,x,y,z`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut theta = Vec::new();
        let mut values: [Vec<f64>; 3] = Default::default();
        for (i, row) in rdr.deserialize::<TableRow>().enumerate() {
            let row = row.map_err(|e| Error::Config(format!("{} row {}: {e}", path.display(), i + 1)))?;
            theta.push(row.theta);
            values[0].push(row.x);
            values[1].push(row.y);
            values[2].push(row.z);
        }
        Table::new(theta, values)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn eval(&self, t: f64) -> Vec3 {
        let n = self.theta.len();
        let j = self.theta.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let (t0, t1) = (self.theta[j], self.theta[j + 1]);
        let h = t1 - t0;
        let a = (t1 - t) / h;
        let b = (t - t0) / h;
        std::array::from_fn(|c| {
            let (y, m) = (&self.values[c], &self.curvature[c]);
            a * y[j] + b * y[j + 1] + ((a * a * a - a) * m[j] + (b * b * b - b) * m[j + 1]) * h * h / 6.0
        })
    }

    fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Result<Table> {
        let values = std::array::from_fn(|c| self.values[c].iter().map(|&v| f(c, v)).collect());
        Table::new(self.theta.clone(), values)
    }
}

/// Second derivatives of the natural cubic spline through `(x, y)`.
fn natural_spline_curvature(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        let diag = 2.0 * (h0 + h1) - h0 * c_prime[i - 1];
        c_prime[i] = h1 / diag;
        d_prime[i] = (rhs - h0 * d_prime[i - 1]) / diag;
    }
    for i in (1..n - 1).rev() {
        m[i] = d_prime[i] - c_prime[i] * m[i + 1];
    }
    m
}

/// A validated initial function together with its window lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    shape: HistoryShape,
    windows: Vec3,
}

impl History {
    /// Validate `shape` on the windows implied by `p`: finite, every
    /// component nonnegative on its window, and `x(0) > 0`.
    pub fn new(shape: HistoryShape, p: &ModelParams) -> Result<Self> {
        let h = History {
            shape,
            windows: [p.tau1(), p.tau_max(), p.tau2()],
        };
        h.validate()?;
        Ok(h)
    }

    pub fn shape(&self) -> &HistoryShape {
        &self.shape
    }

    /// Window length of component `c`.
    pub fn window(&self, c: usize) -> f64 {
        self.windows[c]
    }

    pub fn tau_max(&self) -> f64 {
        self.windows[1]
    }

    fn validate(&self) -> Result<()> {
        match &self.shape {
            HistoryShape::Constant(v) => finite("constant", v)?,
            HistoryShape::EquilibriumPlusConstant { base, offset } => {
                finite("base", base)?;
                finite("offset", offset)?;
            }
            HistoryShape::EquilibriumPlusSine {
                base,
                amplitude,
                frequency,
                phase,
            } => {
                finite("base", base)?;
                finite("amplitude", amplitude)?;
                if !frequency.is_finite() || !phase.is_finite() {
                    return Err(Error::Config("sine history frequency and phase must be finite".into()));
                }
            }
            HistoryShape::Table(t) => {
                let (first, last) = (t.theta[0], *t.theta.last().unwrap());
                let slack = 1e-12 * self.tau_max().max(1.0);
                if first > -self.tau_max() + slack || (last - 0.0).abs() > slack {
                    return Err(Error::Domain(format!(
                        "history table covers [{first}, {last}] but must span [{}, 0]",
                        -self.tau_max()
                    )));
                }
            }
        }
        for c in 0..3 {
            let (min, at) = self.window_min(c);
            if min < 0.0 {
                return Err(Error::Domain(format!(
                    "history component {} is negative ({min:e}) at theta = {at}",
                    ["x", "y", "z"][c]
                )));
            }
        }
        let x0 = self.eval_unchecked(0.0)[0];
        if !(x0 > 0.0) {
            return Err(Error::Domain(format!("history needs x(0) > 0, got {x0}")));
        }
        Ok(())
    }

    fn eval_unchecked(&self, theta: f64) -> Vec3 {
        match &self.shape {
            HistoryShape::Constant(v) => *v,
            HistoryShape::EquilibriumPlusConstant { base, offset } => std::array::from_fn(|c| base[c] + offset[c]),
            HistoryShape::EquilibriumPlusSine {
                base,
                amplitude,
                frequency,
                phase,
            } => {
                let s = (frequency * theta + phase).sin();
                std::array::from_fn(|c| base[c] + amplitude[c] * s)
            }
            HistoryShape::Table(t) => t.eval(theta),
        }
    }

    /// Value at `theta in [-tau_max, 0]`.
    pub fn eval(&self, theta: f64) -> Result<Vec3> {
        if !(theta <= 0.0 && theta >= -self.tau_max()) {
            return Err(Error::Domain(format!(
                "history argument {theta} outside [{}, 0]",
                -self.tau_max()
            )));
        }
        Ok(self.eval_unchecked(theta))
    }

    /// Component `c` on its own window.
    pub fn component(&self, c: usize, theta: f64) -> Result<f64> {
        if !(theta <= 0.0 && theta >= -self.windows[c]) {
            return Err(Error::Domain(format!(
                "history component {c} argument {theta} outside [{}, 0]",
                -self.windows[c]
            )));
        }
        Ok(self.eval_unchecked(theta)[c])
    }

    fn grid(&self, w: f64) -> impl Iterator<Item = f64> + '_ {
        let n = WINDOW_GRID_POINTS - 1;
        let table_nodes: Vec<f64> = match &self.shape {
            HistoryShape::Table(t) => t.theta.iter().copied().filter(|&v| v >= -w && v <= 0.0).collect(),
            _ => Vec::new(),
        };
        (0..=n)
            .map(move |k| if k == n { 0.0 } else { -w + w * k as f64 / n as f64 })
            .chain(table_nodes)
    }

    /// Minimum of component `c` over its window and where it occurs.
    fn window_min(&self, c: usize) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        let candidates: Vec<f64> = self
            .grid(self.windows[c])
            .chain(self.critical_points(self.windows[c]).into_iter().flatten())
            .collect();
        for t in candidates {
            let v = self.eval_unchecked(t)[c];
            if v < best.0 || v.is_nan() {
                best = (v, t);
            }
        }
        best
    }

    /// Maximum of `|component_c - reference|` over the window, on the dense
    /// grid plus window endpoints.
    pub fn window_max_abs_dev(&self, c: usize, reference: f64) -> f64 {
        self.max_abs_dev_on(c, reference, self.windows[c])
    }

    /// As [`Self::window_max_abs_dev`] on `[-w, 0]`, `w <= tau_max`.
    pub fn max_abs_dev_on(&self, c: usize, reference: f64, w: f64) -> f64 {
        self.grid(w.min(self.tau_max()))
            .map(|t| (self.eval_unchecked(t)[c] - reference).abs())
            .fold(0.0, f64::max)
    }

    /// Exact window maximum of `|component_c - reference|` for preset shapes.
    pub fn analytic_window_max_abs_dev(&self, c: usize, reference: f64) -> Option<f64> {
        self.analytic_max_abs_dev_on(c, reference, self.windows[c])
    }

    pub fn analytic_max_abs_dev_on(&self, c: usize, reference: f64, w: f64) -> Option<f64> {
        let pts = self.critical_points(w.min(self.tau_max()))?;
        Some(
            pts.into_iter()
                .map(|t| (self.eval_unchecked(t)[c] - reference).abs())
                .fold(0.0, f64::max),
        )
    }

    /// Endpoints of `[-w, 0]` and interior extrema of a preset shape.
    fn critical_points(&self, w: f64) -> Option<Vec<f64>> {
        match &self.shape {
            HistoryShape::Constant(_) | HistoryShape::EquilibriumPlusConstant { .. } => Some(vec![-w, 0.0]),
            HistoryShape::EquilibriumPlusSine { frequency, phase, .. } => {
                let mut pts = vec![-w, 0.0];
                if *frequency != 0.0 {
                    let (u0, u1) = {
                        let a = phase - frequency * w;
                        (a.min(*phase), a.max(*phase))
                    };
                    let mut k = ((u0 - FRAC_PI_2) / PI).ceil();
                    while FRAC_PI_2 + k * PI <= u1 {
                        let t = (FRAC_PI_2 + k * PI - phase) / frequency;
                        pts.push(t.clamp(-w, 0.0));
                        k += 1.0;
                    }
                }
                Some(pts)
            }
            HistoryShape::Table(_) => None,
        }
    }

    /// `sup` of the prey component over its window.
    pub fn sup_x(&self) -> f64 {
        let w = self.windows[0];
        let grid_max = self.grid(w).map(|t| self.eval_unchecked(t)[0]).fold(f64::NEG_INFINITY, f64::max);
        match self.critical_points(w) {
            Some(pts) => pts.into_iter().map(|t| self.eval_unchecked(t)[0]).fold(grid_max, f64::max),
            None => grid_max,
        }
    }

    /// `base + lambda * (phi - base)`, the same shape with its deviation
    /// from `base` scaled by `lambda`.
    pub fn scaled_about(&self, base: Vec3, lambda: f64) -> Result<History> {
        let mix = |v: &Vec3, c: usize| base[c] + lambda * (v[c] - base[c]);
        let shape = match &self.shape {
            HistoryShape::Constant(v) => HistoryShape::Constant(std::array::from_fn(|c| mix(v, c))),
            HistoryShape::EquilibriumPlusConstant { base: b, offset } => HistoryShape::EquilibriumPlusConstant {
                base: std::array::from_fn(|c| mix(b, c)),
                offset: offset.map(|o| lambda * o),
            },
            HistoryShape::EquilibriumPlusSine {
                base: b,
                amplitude,
                frequency,
                phase,
            } => HistoryShape::EquilibriumPlusSine {
                base: std::array::from_fn(|c| mix(b, c)),
                amplitude: amplitude.map(|a| lambda * a),
                frequency: *frequency,
                phase: *phase,
            },
            HistoryShape::Table(t) => HistoryShape::Table(t.map_values(|c, v| base[c] + lambda * (v - base[c]))?),
        };
        let h = History {
            shape,
            windows: self.windows,
        };
        h.validate()?;
        Ok(h)
    }
}

fn finite(what: &str, v: &Vec3) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config(format!("history {what} must be finite")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_params, RawParams};
    use proptest::prelude::*;

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
            tau2: 0.3,
        })
        .unwrap()
    }

    #[test]
    fn windows_follow_delays() {
        let h = History::new(HistoryShape::Constant([1.0, 0.5, 0.1]), &params()).unwrap();
        assert_eq!([h.window(0), h.window(1), h.window(2)], [0.1, 0.3, 0.3]);
        assert!(h.eval(-0.3).is_ok());
        assert!(h.eval(-0.31).is_err());
        assert!(h.eval(1e-9).is_err());
        assert!(h.component(0, -0.2).is_err());
    }

    #[test]
    fn rejects_negative_values_and_zero_prey() {
        let p = params();
        let neg = HistoryShape::EquilibriumPlusSine {
            base: [1.0, 0.1, 0.0],
            amplitude: [0.0, 0.2, 0.0],
            frequency: 10.0,
            phase: 0.0,
        };
        assert!(matches!(History::new(neg, &p), Err(Error::Domain(ref m)) if m.contains("component y")));
        assert!(History::new(HistoryShape::Constant([0.0, 1.0, 1.0]), &p).is_err());
        assert!(History::new(HistoryShape::Constant([f64::NAN, 1.0, 1.0]), &p).is_err());
    }

    #[test]
    fn sine_window_max_matches_analytic() {
        let p = params();
        let h = History::new(
            HistoryShape::EquilibriumPlusSine {
                base: [0.5, 0.5, 0.5],
                amplitude: [0.1, 0.2, 0.05],
                frequency: 7.0,
                phase: 0.4,
            },
            &p,
        )
        .unwrap();
        for c in 0..3 {
            let a = h.analytic_window_max_abs_dev(c, 0.5).unwrap();
            let g = h.window_max_abs_dev(c, 0.5);
            assert!(g <= a + 1e-15);
            assert!(a - g < 1e-5, "component {c}: {a} vs {g}");
        }
        // window of y is 0.3 long, 7 * 0.3 > pi/2 reaches a crest
        assert!((h.analytic_window_max_abs_dev(1, 0.5).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn spline_is_exact_for_linear_data() {
        // natural spline is exact for linear data
        let theta: Vec<f64> = (0..=10).map(|k| -0.3 + 0.03 * k as f64).collect();
        let lin = |t: f64| 0.7 + 2.0 * t;
        let cols = [
            theta.iter().map(|&t| lin(t) + 1.0).collect(),
            theta.iter().map(|&t| lin(t)).collect(),
            vec![0.2; 11],
        ];
        let h = History::new(HistoryShape::Table(Table::new(theta, cols).unwrap()), &params()).unwrap();
        for t in [-0.3, -0.17, -0.01, 0.0] {
            let v = h.eval(t).unwrap();
            assert!((v[1] - lin(t)).abs() < 1e-14);
            assert!((v[2] - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn spline_approximates_smooth_function() {
        let n = 40;
        let theta: Vec<f64> = (0..=n).map(|k| -0.3 + 0.3 * k as f64 / n as f64).collect();
        let f = |t: f64| 1.0 + 0.3 * (5.0 * t).sin();
        let cols = [
            theta.iter().map(|&t| f(t)).collect(),
            theta.iter().map(|&t| f(t)).collect(),
            theta.iter().map(|&t| f(t)).collect(),
        ];
        let h = History::new(HistoryShape::Table(Table::new(theta.clone(), cols).unwrap()), &params()).unwrap();
        for k in 0..n {
            let t = 0.5 * (theta[k] + theta[k + 1]);
            // natural end conditions cost O(h^2) near the window edges
            assert!((h.eval(t).unwrap()[0] - f(t)).abs() < 1e-4);
        }
        for &t in &theta {
            assert_eq!(h.eval(t).unwrap()[0], f(t));
        }
    }

    #[test]
    fn table_must_cover_window() {
        let cols = [vec![1.0; 2], vec![1.0; 2], vec![1.0; 2]];
        let short = Table::new(vec![-0.2, 0.0], cols.clone()).unwrap();
        assert!(History::new(HistoryShape::Table(short), &params()).is_err());
        assert!(Table::new(vec![0.0, -0.3], cols).is_err());
    }

    #[test]
    fn table_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        std::fs::write(&path, "theta,x,y,z\n-0.3,1,0.5,0.1\n-0.1,1,0.6,0.1\n0,1,0.5,0.1\n").unwrap();
        let t = Table::from_csv(&path).unwrap();
        assert_eq!(t.theta(), &[-0.3, -0.1, 0.0]);
        std::fs::write(&path, "theta,x,y\n0,1,1\n").unwrap();
        assert!(matches!(Table::from_csv(&path), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn scaling_scales_deviation(amp in 0.0..0.4f64, freq in 0.0..30.0f64, lambda in 0.0..1.0f64, t in -0.3..0.0f64) {
            let p = params();
            let base = [0.5, 0.5, 0.5];
            let h = History::new(HistoryShape::EquilibriumPlusSine {
                base, amplitude: [amp; 3], frequency: freq, phase: 0.3,
            }, &p).unwrap();
            let s = h.scaled_about(base, lambda).unwrap();
            let (v, w) = (h.eval(t).unwrap(), s.eval(t).unwrap());
            for c in 0..3 {
                prop_assert!(((w[c] - base[c]) - lambda * (v[c] - base[c])).abs() < 1e-15);
            }
        }

        #[test]
        fn grid_max_never_exceeds_analytic(amp in -0.4..0.4f64, freq in -40.0..40.0f64, phase in -4.0..4.0f64) {
            let p = params();
            let h = History::new(HistoryShape::EquilibriumPlusSine {
                base: [0.5; 3], amplitude: [amp; 3], frequency: freq, phase,
            }, &p).unwrap();
            for c in 0..3 {
                let a = h.analytic_window_max_abs_dev(c, 0.45).unwrap();
                let g = h.window_max_abs_dev(c, 0.45);
                prop_assert!(g <= a + 1e-14);
                prop_assert!(a - g <= amp.abs() * 1e-3);
            }
        }
    }
}
